#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "addes/dataset.hpp"

using namespace addes;

namespace {

PlantedConfig tiny(std::uint64_t seed = 1) {
  PlantedConfig c = PlantedConfig::reference();
  c.n_labeled = 40;
  c.n_unlabeled = 60;
  c.n_test = 30;
  c.seed = seed;
  return c;
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(Planted, ReferenceConfiguration) {
  const PlantedConfig c = PlantedConfig::reference();
  EXPECT_EQ(c.num_inexact, 8u);
  EXPECT_EQ(c.num_target, 2u);
  EXPECT_EQ(c.dim, 32u);
  EXPECT_EQ(c.n_labeled, 500u);
  EXPECT_EQ(c.n_unlabeled, 3000u);
  EXPECT_EQ(c.n_test, 2000u);
  EXPECT_EQ(c.noise_scale, 0.5);
  EXPECT_EQ(c.flip_rate, 0.1);
  ASSERT_EQ(c.target_parents.size(), 2u);
  for (const auto& p : c.target_parents) EXPECT_EQ(p.size(), 2u);
}

TEST(Planted, DegenerateConfigIsRejected) {
  PlantedConfig c = tiny();
  c.num_inexact = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(generate_planted(c), ConfigError);
}

TEST(Planted, JointIsNormalized) {
  const PlantedModel m = build_planted_model(PlantedConfig::reference());
  double s = 0;
  for (double p : m.joint) {
    EXPECT_GE(p, 0.0);
    s += p;
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_EQ(m.joint.size(), std::size_t{1} << 10);
}

TEST(Planted, SplitsCarryTheRightLabels) {
  const PlantedDraw d = generate_planted(tiny());
  const auto& b = d.bundle;
  EXPECT_EQ(b.d_l.size(), 40u);
  EXPECT_EQ(b.d_u.size(), 60u);
  EXPECT_EQ(b.test.size(), 30u);
  EXPECT_EQ(b.d_e.size(), b.d_l.size());
  EXPECT_EQ(b.d_l_hidden_targets.size(), b.d_l.size());
  for (const auto& i : b.d_l) EXPECT_TRUE(i.y_s && !i.y_t);
  for (const auto& i : b.d_u) EXPECT_TRUE(!i.y_s && !i.y_t);
  for (const auto& i : b.test) EXPECT_TRUE(i.y_s && i.y_t);
  for (const auto& i : b.d_e) EXPECT_TRUE(i.y_s && i.y_t);
}

TEST(Planted, FixedSeedIsBitIdentical) {
  const PlantedDraw a = generate_planted(tiny(3)), b = generate_planted(tiny(3));
  EXPECT_EQ(a.bundle.d_l, b.bundle.d_l);
  EXPECT_EQ(a.bundle.d_u, b.bundle.d_u);
  EXPECT_EQ(a.bundle.test, b.bundle.test);
  EXPECT_TRUE(a.graph.adjacency.same_values(b.graph.adjacency));
  EXPECT_NE(generate_planted(tiny(4)).bundle.d_u, a.bundle.d_u);
}

TEST(Planted, NoiselessInstancesDecodeExactly) {
  PlantedConfig c = tiny();
  c.noise_scale = 0;
  const PlantedDraw d = generate_planted(c);
  const Tensor& proto = d.bundle.planted->prototypes;
  const std::size_t w = proto.rows(), dim = proto.cols();
  Eigen::MatrixXd p(w, dim);
  for (std::size_t i = 0; i < w; ++i)
    for (std::size_t j = 0; j < dim; ++j) p(i, j) = proto(i, j);
  const auto solver = p.transpose().colPivHouseholderQr();
  for (const auto& inst : d.bundle.test) {
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(inst.x.data(), dim);
    Eigen::VectorXd y = solver.solve(x);
    for (std::size_t i = 0; i < w; ++i) {
      const double truth = i < c.num_inexact ? (*inst.y_s)[i] : (*inst.y_t)[i - c.num_inexact];
      EXPECT_NEAR(y(i), truth, 1e-9);
    }
  }
}

TEST(Planted, EmpiricalMarginalsMatchTheJoint) {
  const PlantedModel m = build_planted_model(PlantedConfig::reference());
  Rng rng(17);
  constexpr std::size_t n = 10000;
  const auto labels = sample_planted_labels(m, n, rng);
  for (std::size_t i = 0; i < 10; ++i) {
    double hits = 0;
    for (const auto& y : labels) hits += y[i];
    const double p = m.marginal(i);
    EXPECT_LT(std::fabs(hits / n - p), 3 * std::sqrt(p * (1 - p) / n)) << "class " << i;
  }
}

TEST(Planted, InducedConditionalsConvergeToTheJoint) {
  const PlantedModel m = build_planted_model(PlantedConfig::reference());
  Rng rng(18);
  const auto labels = sample_planted_labels(m, 10000, rng);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < 10; ++i) names.push_back("w" + std::to_string(i));
  const Tensor a = conditional_adjacency(count_cooccurrence(labels, LabelSpace(names, {})));
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j) EXPECT_NEAR(a(i, j), m.conditional(i, j), 0.05) << i << "," << j;
}

TEST(Planted, GraphCarriesTheDeclaredTargetLinks) {
  const PlantedConfig c = PlantedConfig::reference();
  const PlantedDraw d = generate_planted(tiny());
  for (std::size_t t = 0; t < c.num_target; ++t)
    for (std::size_t s = 0; s < c.num_inexact; ++s) {
      const bool parent = std::find(c.target_parents[t].begin(), c.target_parents[t].end(), s) !=
                          c.target_parents[t].end();
      EXPECT_EQ(d.graph.edge(c.num_inexact + t, s), parent ? 1.0 : 0.0);
    }
}

TEST(EstimatedLabeled, MatchesGroundTruthAtTheFlipRate) {
  PlantedConfig c = PlantedConfig::reference();
  c.n_labeled = 5000;
  c.n_unlabeled = 10;
  c.n_test = 10;
  const PlantedDraw d = generate_planted(c);
  ASSERT_EQ(d.bundle.d_e.size(), d.bundle.d_l.size());
  double exact = 0;
  for (std::size_t i = 0; i < d.bundle.d_e.size(); ++i) exact += *d.bundle.d_e[i].y_t == d.bundle.d_l_hidden_targets[i];
  const double p = (1 - c.flip_rate) * (1 - c.flip_rate), n = double(d.bundle.d_e.size());
  EXPECT_LT(std::fabs(exact / n - p), 3 * std::sqrt(p * (1 - p) / n));
}

TEST(EstimatedLabeled, AllZeroInexactGivesAllZeroTargets) {
  const PlantedDraw d = generate_planted(tiny());
  Instance inst{{0.0, 0.0}, LabelVector(8, 0), std::nullopt};
  const auto e = build_estimated_labeled({inst}, d.graph);
  EXPECT_EQ(*e[0].y_t, LabelVector(2, 0));
}

TEST(SplitTail, LastCeilFractionIsValidation) {
  std::vector<Instance> items(10);
  for (std::size_t i = 0; i < 10; ++i) items[i].x = {double(i)};
  const Split s = split_tail(items, 0.25);
  EXPECT_EQ(s.train.size(), 7u);
  EXPECT_EQ(s.validation.size(), 3u);
  EXPECT_EQ(s.validation.front().x[0], 7.0);
  EXPECT_THROW(split_tail(items, 1.0), ConfigError);
}

TEST(Jsonl, InstanceRoundTripIsBitExact) {
  Instance inst{{0.1, -1.0 / 3.0, 1e-300, 12345.678901234567}, LabelVector{1, 0}, LabelVector{1}};
  EXPECT_EQ(instance_from_json(instance_to_json(inst)), inst);
}

TEST(Jsonl, MissingLabelsParseAsUnlabeled) {
  const Instance i = instance_from_json(R"({"x": [1.5, 2.5]})");
  EXPECT_FALSE(i.y_s);
  EXPECT_FALSE(i.y_t);
  EXPECT_EQ(i.x, (std::vector<double>{1.5, 2.5}));
}

TEST(Jsonl, NonBinaryLabelIsParseError) {
  EXPECT_THROW(instance_from_json(R"({"x": [1.0], "y_s": [2]})"), ParseError);
  EXPECT_THROW(instance_from_json(R"({"y_s": [1]})"), ParseError);
}

TEST(Jsonl, CorruptedLineReportsItsIndex) {
  const auto path = scratch("addes_corrupt.jsonl");
  {
    std::ofstream out(path);
    out << R"({"x": [1.0]})" << '\n' << R"({"x": [2.0]})" << '\n' << "{broken" << '\n';
  }
  try {
    load_instances(path);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
}

TEST(Bundle, SaveThenLoadIsEqual) {
  const auto dir = scratch("addes_bundle_rt");
  const PlantedDraw d = generate_planted(tiny(5));
  save_bundle(d.bundle, dir);
  const DatasetBundle back = load_bundle(dir);
  EXPECT_EQ(back.space, d.bundle.space);
  EXPECT_EQ(back.relations, d.bundle.relations);
  EXPECT_EQ(back.d_l, d.bundle.d_l);
  EXPECT_EQ(back.d_u, d.bundle.d_u);
  EXPECT_EQ(back.d_e, d.bundle.d_e);
  EXPECT_EQ(back.test, d.bundle.test);
  EXPECT_EQ(back.d_l_hidden_targets, d.bundle.d_l_hidden_targets);
  ASSERT_TRUE(back.planted);
  EXPECT_TRUE(back.planted->prototypes.same_values(d.bundle.planted->prototypes));
  EXPECT_EQ(back.planted->joint, d.bundle.planted->joint);
  std::filesystem::remove_all(dir);
}

TEST(Bundle, MissingDirectoryNamesTheFile) {
  try {
    load_bundle(scratch("addes_no_such_bundle"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("addes_no_such_bundle"), std::string::npos);
  }
}

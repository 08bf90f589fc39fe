#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "addes/generative.hpp"
#include "addes/probability.hpp"
#include "test_util.hpp"

using namespace addes;
using addes::testing::TinyModel;

namespace {

void fill_prefix(ParamStore& store, const std::string& prefix, double v) {
  for (std::size_t i : store.with_prefix(prefix))
    for (auto& x : store[i].tensor.values()) x = v;
}

LossBreakdown breakdown(TinyModel& m, const GenConfig& cfg, std::uint64_t noise) {
  Tape tape;
  Rng rng(noise);
  LossContext ctx{tape, m.model, m.prior, cfg, rng};
  return total_loss(ctx, m.l_x, m.l_y_s, m.u_x).values;
}

double grad_norm(const ParamStore& store, const std::string& prefix) {
  double s = 0;
  for (std::size_t i : store.with_prefix(prefix)) {
    const auto& g = store[i].tensor.grad;
    if (g)
      for (double v : *g) s += v * v;
  }
  return std::sqrt(s);
}

bool is_classifier(const std::string& n) { return n.rfind("classifier/", 0) == 0; }

}  // namespace

TEST(Model, ParameterGroupsAreNamedByModule) {
  TinyModel m(1);
  EXPECT_FALSE(m.model.params.with_prefix("encoder/").empty());
  EXPECT_FALSE(m.model.params.with_prefix("decoder/").empty());
  EXPECT_FALSE(m.model.params.with_prefix("classifier/").empty());
  std::size_t total = m.model.params.with_prefix("encoder/").size() +
                      m.model.params.with_prefix("decoder/").size() +
                      m.model.params.with_prefix("classifier/").size();
  EXPECT_EQ(total, m.model.params.size());
}

TEST(Encoder, ZeroWeightsGiveBiasMeanAndExpBiasSigma) {
  TinyModel m(2);
  fill_prefix(m.model.params, "encoder/", 0.0);
  const Dense& last = m.model.encoder.layers.back();
  m.model.params[last.bias].tensor = Tensor::from_rows({{0.3, -0.2, 0.5, -1.0}});
  Tape tape;
  Rng rng(0);
  GenConfig cfg;
  LossContext ctx{tape, m.model, m.prior, cfg, rng};
  EncoderOutput e = encode(ctx, tape.constant(m.l_x));
  for (std::size_t i = 0; i < m.l_x.rows(); ++i) {
    EXPECT_DOUBLE_EQ(e.mu_z.value()(i, 0), 0.3);
    EXPECT_DOUBLE_EQ(e.mu_z.value()(i, 1), -0.2);
    EXPECT_DOUBLE_EQ(e.sigma_z.value()(i, 0), std::exp(0.5));
    EXPECT_DOUBLE_EQ(e.sigma_z.value()(i, 1), std::exp(-1.0));
  }
}

TEST(Decoder, IsDeterministic) {
  TinyModel m(3);
  Tape tape;
  Rng rng(0);
  GenConfig cfg;
  LossContext ctx{tape, m.model, m.prior, cfg, rng};
  Var z = tape.constant(Tensor::from_rows({{0.1, -0.4}}));
  Var ys = tape.constant(Tensor::from_rows({{1, 0}}));
  Var yt = tape.constant(Tensor::from_rows({{0.7}}));
  DecoderOutput a = decode(ctx, z, ys, yt), b = decode(ctx, z, ys, yt);
  EXPECT_TRUE(a.mu_x.value().same_values(b.mu_x.value()));
  EXPECT_TRUE(a.sigma_x.value().same_values(b.sigma_x.value()));
}

TEST(ElboLabeled, StandardNormalPosteriorHasZeroKlZ) {
  TinyModel m(4);
  fill_prefix(m.model.params, "encoder/", 0.0);
  Tape tape;
  Rng rng(0);
  GenConfig cfg;
  LossContext ctx{tape, m.model, m.prior, cfg, rng};
  ElboTerms t = elbo_labeled(ctx, m.l_x, m.l_y_s);
  for (double v : t.kl_z.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(ElboLabeled, IdentityDecoderGivesConstantReconstruction) {
  TinyModel m(5, 1);
  fill_prefix(m.model.params, "decoder/", 0.0);
  const Dense& last = m.model.decoder.layers.back();
  Tensor& bias = m.model.params[last.bias].tensor;
  for (std::size_t j = 0; j < 4; ++j) bias[j] = m.l_x[j];  // mu_x = x, half-log-var = 0
  Tape tape;
  Rng rng(0);
  GenConfig cfg;
  LossContext ctx{tape, m.model, m.prior, cfg, rng};
  ElboTerms t = elbo_labeled(ctx, m.l_x, m.l_y_s);
  EXPECT_NEAR(t.recon.value().item(), -0.5 * 4 * std::log(2 * std::numbers::pi), 1e-12);
}

TEST(ElboLabeled, KlYMatchesClampedTargetPrior) {
  TinyModel m(6);
  Tape tape;
  Rng rng(0);
  GenConfig cfg;
  LossContext ctx{tape, m.model, m.prior, cfg, rng};
  ElboTerms t = elbo_labeled(ctx, m.l_x, m.l_y_s);
  const Tensor prior = m.prior.clamped_target_prior(m.l_y_s);
  for (std::size_t i = 0; i < m.l_x.rows(); ++i) {
    const double q = t.y_t.value()(i, 0), p = prior(i, 0);
    EXPECT_NEAR(t.kl_y.value()(i, 0), q * std::log(q / p) + (1 - q) * std::log((1 - q) / (1 - p)), 1e-12);
  }
}

TEST(ElboLabeled, LabelWidthMismatchIsDimensionError) {
  TinyModel m(7);
  Tape tape;
  Rng rng(0);
  GenConfig cfg;
  LossContext ctx{tape, m.model, m.prior, cfg, rng};
  EXPECT_THROW(elbo_labeled(ctx, m.l_x, Tensor(3, 3)), DimensionError);
}

TEST(ElboUnlabeled, KlZIsTheGaussianKlOfTheEncoder) {
  TinyModel m(8);
  Tape tape;
  Rng rng(0);
  GenConfig cfg;
  LossContext ctx{tape, m.model, m.prior, cfg, rng};
  ElboTerms t = elbo_unlabeled(ctx, m.u_x);
  EncoderOutput e = encode(ctx, tape.constant(m.u_x));
  EXPECT_TRUE(t.kl_z.value().same_values(kl_diag_gaussian_vs_std_normal(e.mu_z, e.sigma_z).value()));
}

TEST(ElboUnlabeled, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    TinyModel m(seed);
    GenConfig cfg;
    const double err = addes::testing::param_gradcheck(
        m.model.params,
        [&](Tape& tape, Rng& rng) {
          LossContext ctx{tape, m.model, m.prior, cfg, rng};
          return mean(elbo_unlabeled(ctx, m.u_x).elbo);
        },
        seed + 100, [](const std::string&) { return true; });
    EXPECT_LT(err, 1e-4) << "seed " << seed;
  }
}

TEST(TotalLoss, BreakdownIsAdditive) {
  TinyModel m(9);
  GenConfig cfg;
  cfg.alpha = 0.7;
  cfg.beta = 1.3;
  const LossBreakdown b = breakdown(m, cfg, 11);
  EXPECT_NEAR(b.total, -(b.recon - b.kl_z - b.kl_y) + 0.7 * b.l_cons + 1.3 * b.l_c_s, 1e-12);
  EXPECT_GT(b.l_cons, 0.0);
  EXPECT_GT(b.l_c_s, 0.0);
}

TEST(TotalLoss, ZeroWeightsLeaveTheNegatedElbo) {
  TinyModel m(10);
  GenConfig cfg;
  cfg.alpha = 0;
  cfg.beta = 0;
  const LossBreakdown b = breakdown(m, cfg, 12);
  EXPECT_NEAR(b.total, -(b.recon - b.kl_z - b.kl_y), 1e-12);
}

TEST(TotalLoss, DoublingAlphaDoublesOnlyTheConstraintTerm) {
  TinyModel m(11);
  GenConfig a, b;
  a.alpha = 0.4;
  b.alpha = 0.8;
  const LossBreakdown la = breakdown(m, a, 13), lb = breakdown(m, b, 13);
  EXPECT_EQ(la.recon, lb.recon);
  EXPECT_EQ(la.l_cons, lb.l_cons);
  EXPECT_NEAR(lb.total - la.total, 0.4 * la.l_cons, 1e-12);
}

TEST(TotalLoss, EmptyBatchIsRejected) {
  TinyModel m(12);
  GenConfig cfg;
  Tape tape;
  Rng rng(0);
  LossContext ctx{tape, m.model, m.prior, cfg, rng};
  Tensor none;
  EXPECT_THROW(total_loss(ctx, m.l_x, m.l_y_s, none), ContractError);
}

TEST(Constraint, SoftHalfLabelsAgainstUniformClassifier) {
  TinyModel m(13);
  fill_prefix(m.model.params, "classifier/extractor", 0.0);
  GenConfig cfg;
  cfg.constraint_label_source = ConstraintLabelSource::kPosterior;
  Tape tape;
  Rng rng(0);
  LossContext ctx{tape, m.model, m.prior, cfg, rng};
  ConstraintPool pool{tape.constant(Tensor(4, 2, 0.1)), tape.constant(Tensor(4, 2, 0.5)),
                      tape.constant(Tensor(4, 1, 0.5))};
  EXPECT_NEAR(loss_constraint(ctx, 4, pool).value().item(), 3 * std::log(2.0), 1e-12);
}

TEST(Constraint, EmptyPoolInPriorModeIsRejected) {
  TinyModel m(14);
  LabelPrior empty({}, m.graph, 1e-3);
  GenConfig cfg;
  cfg.constraint_label_source = ConstraintLabelSource::kPrior;
  Tape tape;
  Rng rng(0);
  LossContext ctx{tape, m.model, empty, cfg, rng};
  EXPECT_THROW(loss_constraint(ctx, 2, std::nullopt), ContractError);
}

TEST(Constraint, GradientReachesDecoderInEveryMode) {
  for (auto mode : {ConstraintLabelSource::kPrior, ConstraintLabelSource::kPosterior, ConstraintLabelSource::kMixed}) {
    for (bool stop : {true, false}) {
      TinyModel m(15);
      GenConfig cfg;
      cfg.constraint_label_source = mode;
      cfg.constraint_stop_grad_classifier = stop;
      Tape tape;
      Rng rng(21);
      LossContext ctx{tape, m.model, m.prior, cfg, rng};
      ElboTerms lab = elbo_labeled(ctx, m.l_x, m.l_y_s);
      ConstraintPool pool{lab.z, lab.y_s, lab.y_t};
      m.model.params.zero_grad();
      tape.backward(loss_constraint(ctx, m.l_x.rows(), pool));
      EXPECT_GT(grad_norm(m.model.params, "decoder/"), 0.0) << to_string(mode);
      if (stop) EXPECT_EQ(grad_norm(m.model.params, "classifier/"), 0.0) << to_string(mode);
    }
  }
}

TEST(Constraint, GradientMatchesFiniteDifferencesWithoutStopGradient) {
  TinyModel m(16);
  GenConfig cfg;
  cfg.constraint_stop_grad_classifier = false;
  const double err = addes::testing::param_gradcheck(
      m.model.params,
      [&](Tape& tape, Rng& rng) {
        LossContext ctx{tape, m.model, m.prior, cfg, rng};
        return total_loss(ctx, m.l_x, m.l_y_s, m.u_x).total;
      },
      5, [](const std::string&) { return true; });
  EXPECT_LT(err, 1e-4);
}

TEST(Constraint, StopGradientKeepsOtherGradientsExact) {
  TinyModel m(17);
  GenConfig cfg;
  const double err = addes::testing::param_gradcheck(
      m.model.params,
      [&](Tape& tape, Rng& rng) {
        LossContext ctx{tape, m.model, m.prior, cfg, rng};
        ElboTerms lab = elbo_labeled(ctx, m.l_x, m.l_y_s);
        return loss_constraint(ctx, m.l_x.rows(), ConstraintPool{lab.z, lab.y_s, lab.y_t});
      },
      6, [](const std::string& n) { return !is_classifier(n); });
  EXPECT_LT(err, 1e-4);
}

TEST(SampleLabeled, FixedSeedIsBitIdentical) {
  TinyModel m(18);
  Rng a(4), b(4);
  SyntheticSet x = sample_labeled(50, m.model, m.prior, a), y = sample_labeled(50, m.model, m.prior, b);
  EXPECT_TRUE(x.x.same_values(y.x));
  EXPECT_EQ(x.y_s, y.y_s);
  EXPECT_EQ(x.y_t, y.y_t);
  EXPECT_EQ(x.size(), 50u);
}

TEST(SampleLabeled, TargetsFollowTheRelationRule) {
  TinyModel m(19);
  Rng rng(5);
  SyntheticSet s = sample_labeled(40, m.model, m.prior, rng);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s.y_t[i], estimate_target_prior(s.y_s[i], m.graph));
}

TEST(SampleLabeled, ProvidedLabelsAreCycled) {
  TinyModel m(20);
  Rng rng(5);
  std::vector<LabelVector> labels{{1, 1}, {0, 1}};
  SyntheticSet s = sample_labeled(5, m.model, m.prior, rng, &labels);
  EXPECT_EQ(s.y_s[0], labels[0]);
  EXPECT_EQ(s.y_s[3], labels[1]);
}

TEST(SampleLabeled, NonPositiveCountIsArgumentError) {
  TinyModel m(21);
  Rng rng(5);
  EXPECT_THROW(sample_labeled(0, m.model, m.prior, rng), std::invalid_argument);
}

TEST(LabelPrior, MarginalsAreClampedEmpiricalRates) {
  TinyModel m(22);
  // pool {1,0}, {0,1}, {1,1}, {0,0}; t0 follows s0
  const Tensor& mg = m.prior.marginals();
  EXPECT_DOUBLE_EQ(mg[0], 0.5);
  EXPECT_DOUBLE_EQ(mg[1], 0.5);
  EXPECT_DOUBLE_EQ(mg[2], 0.5);
  LabelPrior all_on({{1, 1}}, m.graph, 1e-3);
  EXPECT_DOUBLE_EQ(all_on.marginals()[0], 1 - 1e-3);
}

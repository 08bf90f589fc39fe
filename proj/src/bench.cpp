#include "addes/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "addes/probability.hpp"
#include "json.hpp"

namespace addes {

Arch arch_from_string(const std::string& s) {
  if (s == "independent") return Arch::kIndependent;
  if (s == "graph-aware") return Arch::kGraphAware;
  throw ConfigError("unknown downstream arch: " + s + " (independent | graph-aware)");
}

std::string to_string(Arch a) { return a == Arch::kIndependent ? "independent" : "graph-aware"; }

Variant variant_from_string(const std::string& s) {
  if (s == "full") return Variant::kFull;
  if (s == "addes-cnn") return Variant::kAddesCnn;
  if (s == "addes-w") return Variant::kAddesW;
  throw ConfigError("unknown variant: " + s + " (full | addes-cnn | addes-w)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kAddesCnn: return "addes-cnn";
    case Variant::kAddesW: return "addes-w";
  }
  return "full";
}

LabeledSet LabeledSet::from_instances(const std::vector<Instance>& items) {
  if (items.empty()) throw ContractError("labeled set: no instances");
  LabeledSet s;
  s.x = x_of(items);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].y_s || !items[i].y_t) {
      throw ContractError("labeled set: instance " + std::to_string(i) + " lacks y_s or y_t");
    }
    s.y_s.push_back(*items[i].y_s);
    s.y_t.push_back(*items[i].y_t);
  }
  return s;
}

LabeledSet LabeledSet::with_synthetic(const SyntheticSet& synthetic, std::size_t n) const {
  if (n > synthetic.size()) throw ContractError("with_synthetic: asked for more rows than generated");
  LabeledSet out = *this;
  if (n == 0) return out;
  const std::size_t d = x.cols();
  if (synthetic.x.cols() != d) throw DimensionError("with_synthetic: dimension mismatch");
  std::vector<double> values = x.values();
  values.insert(values.end(), synthetic.x.values().begin(),
                synthetic.x.values().begin() + static_cast<std::ptrdiff_t>(n * d));
  out.x = Tensor({size() + n, d}, std::move(values));
  out.y_s.insert(out.y_s.end(), synthetic.y_s.begin(), synthetic.y_s.begin() + static_cast<std::ptrdiff_t>(n));
  out.y_t.insert(out.y_t.end(), synthetic.y_t.begin(), synthetic.y_t.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

namespace {

Tensor gather_rows(const Tensor& src, const std::vector<std::size_t>& idx) {
  const std::size_t c = src.cols();
  Tensor out(idx.size(), c);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(src.values().begin() + static_cast<std::ptrdiff_t>(idx[i] * c), c,
                out.values().begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  return out;
}

Tensor full_labels(const LabeledSet& set) {
  const std::size_t s = set.y_s.front().size(), t = set.y_t.front().size();
  Tensor y(set.size(), s + t);
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (std::size_t j = 0; j < s; ++j) y(i, j) = set.y_s[i][j];
    for (std::size_t j = 0; j < t; ++j) y(i, s + j) = set.y_t[i][j];
  }
  return y;
}

std::vector<std::vector<double>> to_rows(const Tensor& t) {
  std::vector<std::vector<double>> out(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    auto r = t.row_span(i);
    out[i].assign(r.begin(), r.end());
  }
  return out;
}

}  // namespace

DownstreamModel fit_downstream(const LabeledSet& train, const LabelGraph& graph,
                               const DownstreamConfig& config, std::uint64_t seed,
                               const Tensor* unlabeled, double entropy_lambda) {
  if (train.size() == 0) throw ContractError("train_downstream: empty training set");
  if (config.batch_size == 0) throw ConfigError("downstream batch_size must be positive");
  const bool use_entropy = entropy_lambda > 0;
  if (use_entropy && (!unlabeled || unlabeled->rows() == 0)) {
    throw ContractError("entropy regularization needs a non-empty D_u");
  }
  DownstreamModel m;
  Rng init = Rng::stream(seed, "downstream-init");
  const LabelGraph g = config.arch == Arch::kIndependent ? edgeless(graph) : graph;
  m.classifier = GcnClassifier::create(m.params, "downstream", train.x.cols(), g, config.classifier, init);
  Rng rng = Rng::stream(seed, "downstream-training");
  const Tensor y = full_labels(train);
  const std::size_t n = train.size(), bs = config.batch_size;
  Optimizer opt(OptimizerKind::kAdam, config.lr);
  for (std::size_t e = 0; e < config.epochs; ++e) {
    const auto perm = rng.permutation(n);
    for (std::size_t start = 0; start < n; start += bs) {
      std::vector<std::size_t> idx(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                   perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + bs)));
      Tape tape;
      Var probs = m.classifier.classify(tape, m.params, tape.constant(gather_rows(train.x, idx)), true);
      Var loss = mean(binary_cross_entropy(probs, tape.constant(gather_rows(y, idx))));
      if (use_entropy) {
        const auto uidx = rng.sample_indices(unlabeled->rows(), bs);
        Var up = m.classifier.classify(tape, m.params, tape.constant(gather_rows(*unlabeled, uidx)), true);
        loss = add(loss, scale(mean_binary_entropy(up), entropy_lambda));
      }
      m.params.zero_grad();
      tape.backward(loss);
      opt.step(m.params);
    }
  }
  m.params.zero_grad();
  return m;
}

MetricReport score_downstream(DownstreamModel& model, const LabeledSet& test, const LabelSpace& space,
                              bool inexact) {
  Prediction p = model.classifier.predict(model.params, test.x);
  if (inexact) return score_classes(to_rows(p.y_s_hat), test.y_s, space.inexact_classes());
  return score_classes(to_rows(p.y_t_hat), test.y_t, space.target_classes());
}

MetricReport train_downstream(const LabeledSet& train, const LabeledSet& test,
                              const LabelGraph& graph, const DownstreamConfig& config,
                              std::uint64_t seed) {
  DownstreamModel m = fit_downstream(train, graph, config, seed);
  MetricReport r = score_downstream(m, test, graph.space);
  r.seed = seed;
  return r;
}

MetricReport baseline_entropy_reg(const LabeledSet& train, const Tensor& unlabeled_x,
                                  const LabeledSet& test, const LabelGraph& graph,
                                  const DownstreamConfig& config, std::uint64_t seed,
                                  double lambda) {
  if (unlabeled_x.values().empty()) throw ContractError("baseline_entropy_reg: D_u is empty");
  if (!(lambda >= 0)) throw ConfigError("entropy lambda must be non-negative");
  DownstreamConfig c = config;
  c.arch = Arch::kIndependent;
  DownstreamModel m = fit_downstream(train, graph, c, seed, &unlabeled_x, lambda);
  MetricReport r = score_downstream(m, test, graph.space);
  r.seed = seed;
  return r;
}

double mean_prediction_entropy(DownstreamModel& model, const Tensor& x) {
  Tape tape;
  Var p = model.classifier.classify(tape, model.params, tape.constant(x), false);
  return mean_binary_entropy(p).value().item();
}

LabelGraph classifier_graph_for(Variant variant, const DatasetBundle& bundle,
                                const LabelGraph& relation_graph) {
  switch (variant) {
    case Variant::kFull: return relation_graph;
    case Variant::kAddesCnn: return edgeless(relation_graph);
    case Variant::kAddesW: {
      if (bundle.d_l_hidden_targets.size() != bundle.d_l.size()) {
        throw ContractError("addes-w needs ground-truth target labels for every D_l instance");
      }
      std::vector<std::pair<LabelVector, LabelVector>> pairs;
      for (std::size_t i = 0; i < bundle.d_l.size(); ++i) {
        pairs.emplace_back(*bundle.d_l[i].y_s, bundle.d_l_hidden_targets[i]);
      }
      LabelGraph g = weighted_full_graph(pairs, bundle.space);
      g.relations = relation_graph.relations;
      return g;
    }
  }
  return relation_graph;
}

GeneratorRun train_generator(const DatasetBundle& bundle, const LabelGraph& relation_graph,
                             Variant variant, const PipelineConfig& config, std::uint64_t seed) {
  GeneratorRun run;
  run.classifier_graph = classifier_graph_for(variant, bundle, relation_graph);
  Rng init = Rng::stream(seed, "init");
  run.model = AddesModel::create(bundle.dim(), run.classifier_graph, config.model,
                                 config.gen.fixed_decoder_sigma, init);
  TrainConfig tc = config.train;
  tc.seed = seed;
  const Split l = split_tail(bundle.d_l, tc.val_fraction);
  run.prior = LabelPrior(y_s_of(l.train), relation_graph, config.gen.prior_clamp_eps);
  {
    Trainer trainer(run.model, run.prior, config.gen, tc,
                    TrainData::from_instances(bundle.d_l, bundle.d_u, tc.val_fraction));
    run.state = trainer.fit();
  }
  return run;
}

AugmentationResult evaluate_augmentation(GeneratorRun& run, const DatasetBundle& bundle,
                                         const PipelineConfig& config, std::uint64_t seed,
                                         const std::vector<std::size_t>& grid) {
  if (grid.empty()) throw ConfigError("|D_s| grid is empty");
  const Split e = split_tail(bundle.d_e, config.train.val_fraction);
  const LabeledSet train = LabeledSet::from_instances(e.train);
  const LabeledSet test = LabeledSet::from_instances(bundle.test);
  const std::optional<LabeledSet> val =
      e.validation.empty() ? std::nullopt : std::optional(LabeledSet::from_instances(e.validation));
  const LabelGraph& graph = run.prior.graph();
  const std::size_t max_g = *std::max_element(grid.begin(), grid.end());
  SyntheticSet syn;
  if (max_g > 0) {
    Rng gen_rng = Rng::stream(seed, "generation");
    syn = sample_labeled(max_g, run.model, run.prior, gen_rng);
  }

  AugmentationResult out;
  double best = -1;
  std::optional<MetricReport> baseline;
  for (std::size_t g : grid) {
    DownstreamModel m = fit_downstream(train.with_synthetic(syn, g), graph, config.downstream, seed);
    const double v = val ? score_downstream(m, *val, graph.space).map : 0.0;
    out.validation_map.emplace_back(g, v);
    MetricReport test_report = score_downstream(m, test, graph.space);
    out.test_map.emplace_back(g, test_report.map);
    if (g == 0) baseline = test_report;
    if (v > best || (v == best && g > out.chosen_ds)) {
      best = v;
      out.chosen_ds = g;
      out.augmented = test_report;
    }
  }
  if (!baseline) {
    DownstreamModel m = fit_downstream(train, graph, config.downstream, seed);
    baseline = score_downstream(m, test, graph.space);
  }
  out.baseline = *baseline;
  for (MetricReport* r : {&out.augmented, &out.baseline}) {
    r->seed = seed;
    r->config_hash = config.config_hash;
  }
  return out;
}

MetricReport run_ablation(Variant variant, const DatasetBundle& bundle,
                          const LabelGraph& relation_graph, const PipelineConfig& config,
                          std::uint64_t seed) {
  GeneratorRun run = train_generator(bundle, relation_graph, variant, config, seed);
  return evaluate_augmentation(run, bundle, config, seed, config.ds_grid).augmented;
}

double latent_probe_auc(AddesModel& model, const LabeledSet& train, const LabeledSet& test,
                        std::uint64_t seed, std::size_t epochs) {
  const Tensor z_train = encode_mean(model, train.x);
  const Tensor z_test = encode_mean(model, test.x);
  const std::size_t s = train.y_s.front().size(), d = z_train.cols();
  ParamStore params;
  Rng init = Rng::stream(seed, "probe");
  const Dense layer = add_dense(params, "probe", d, s, init);
  Tensor y(train.size(), s);
  for (std::size_t i = 0; i < train.size(); ++i)
    for (std::size_t j = 0; j < s; ++j) y(i, j) = train.y_s[i][j];
  Optimizer opt(OptimizerKind::kAdam, 0.05);
  for (std::size_t e = 0; e < epochs; ++e) {
    Tape tape;
    Var p = sigmoid(dense_forward(tape, params, layer, tape.constant(z_train), true));
    Var loss = mean(binary_cross_entropy(p, tape.constant(y)));
    params.zero_grad();
    tape.backward(loss);
    opt.step(params);
  }
  Tape tape;
  Var p = sigmoid(dense_forward(tape, params, layer, tape.constant(z_test), false));
  std::vector<std::string> names;
  for (std::size_t j = 0; j < s; ++j) names.push_back("s" + std::to_string(j));
  return score_classes(to_rows(p.value()), test.y_s, names).auc;
}

double classifier_inexact_auc(AddesModel& model, const LabeledSet& test, const LabelSpace& space) {
  Prediction p = model.classifier.predict(model.params, test.x);
  return score_classes(to_rows(p.y_s_hat), test.y_s, space.inexact_classes()).auc;
}

SweepSpec SweepSpec::defaults_for(const std::string& variable) {
  SweepSpec s;
  s.variable = variable;
  if (variable == "size_of_Ds") s.grid = {0, 500, 1000, 2000, 4000};
  else if (variable == "size_of_Dl") s.grid = {100, 250, 500, 1000};
  else if (variable == "alpha") s.grid = {0.01, 0.1, 1, 10};
  else if (variable == "beta") s.grid = {0.01, 0.1, 1, 10, 100};
  else throw ConfigError("unknown sweep variable: " + variable +
                         " (size_of_Ds | size_of_Dl | alpha | beta)");
  return s;
}

void SweepSpec::validate() const {
  defaults_for(variable);
  if (grid.empty()) throw ConfigError("sweep " + variable + ": grid is empty");
  if (seeds.empty()) throw ConfigError("sweep " + variable + ": no seeds");
  for (double v : grid) {
    if (!(v >= 0) || !std::isfinite(v)) throw ConfigError("sweep " + variable + ": negative grid value");
    if ((variable == "size_of_Ds" || variable == "size_of_Dl") && v != std::floor(v)) {
      throw ConfigError("sweep " + variable + ": sizes must be integers");
    }
  }
  if (variable == "size_of_Dl" && *std::min_element(grid.begin(), grid.end()) < 1) {
    throw ConfigError("sweep size_of_Dl: sizes must be positive");
  }
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec, const PlantedConfig& data,
                                const PipelineConfig& config) {
  spec.validate();
  std::vector<SweepRow> rows;
  auto row = [&](double value, std::uint64_t seed, MetricReport r) {
    r.seed = seed;
    r.config_hash = config.config_hash;
    rows.push_back({"full", spec.variable, value, seed, std::move(r)});
  };
  if (spec.variable == "size_of_Ds") {
    std::vector<std::size_t> grid;
    for (double v : spec.grid) grid.push_back(static_cast<std::size_t>(v));
    for (auto seed : spec.seeds) {
      PlantedConfig dc = data;
      dc.seed = seed;
      PlantedDraw draw = generate_planted(dc);
      GeneratorRun run = train_generator(draw.bundle, draw.graph, Variant::kFull, config, seed);
      const Split e = split_tail(draw.bundle.d_e, config.train.val_fraction);
      const LabeledSet train = LabeledSet::from_instances(e.train);
      const LabeledSet test = LabeledSet::from_instances(draw.bundle.test);
      const std::size_t max_g = *std::max_element(grid.begin(), grid.end());
      SyntheticSet syn;
      if (max_g > 0) {
        Rng gen_rng = Rng::stream(seed, "generation");
        syn = sample_labeled(max_g, run.model, run.prior, gen_rng);
      }
      for (std::size_t g : grid) {
        row(static_cast<double>(g), seed,
            train_downstream(train.with_synthetic(syn, g), test, draw.graph, config.downstream, seed));
      }
    }
  } else {
    for (double value : spec.grid) {
      for (auto seed : spec.seeds) {
        PlantedConfig dc = data;
        dc.seed = seed;
        PipelineConfig pc = config;
        if (spec.variable == "size_of_Dl") dc.n_labeled = static_cast<std::size_t>(value);
        if (spec.variable == "alpha") pc.gen.alpha = value;
        if (spec.variable == "beta") pc.gen.beta = value;
        PlantedDraw draw = generate_planted(dc);
        row(value, seed, run_ablation(Variant::kFull, draw.bundle, draw.graph, pc, seed));
      }
    }
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.value < b.value; });
  return rows;
}

namespace {

std::string num(double v) {
  if (v == std::floor(v) && std::fabs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  return nlohmann::json(v).dump();
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::vector<std::string> classes;
  std::set<std::string> seen;
  for (const auto& r : rows)
    for (const auto& c : r.report.classes)
      if (seen.insert(c).second) classes.push_back(c);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "variant,variable,value,seed,map,auc";
  for (const auto& c : classes) out << ",ap_" << c;
  for (const auto& c : classes) out << ",auc_" << c;
  out << ",config_hash\n";
  for (const auto& r : rows) {
    out << r.variant << ',' << r.variable << ',' << num(r.value) << ',' << r.seed << ','
        << num(r.report.map) << ',' << num(r.report.auc);
    for (const auto& c : classes) {
      auto it = r.report.per_class_ap.find(c);
      out << ',' << (it == r.report.per_class_ap.end() ? "" : num(it->second));
    }
    for (const auto& c : classes) {
      auto it = r.report.per_class_auc.find(c);
      out << ',' << (it == r.report.per_class_auc.end() ? "" : num(it->second));
    }
    out << ',' << r.report.config_hash << '\n';
  }
}

void write_plot_data(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::map<double, std::pair<double, std::size_t>> acc;
  for (const auto& r : rows) {
    auto& [sum, n] = acc[r.value];
    sum += r.report.map;
    ++n;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [value, sn] : acc) {
    out << num(value) << ' ' << num(sn.first / static_cast<double>(sn.second)) << '\n';
  }
}

}  // namespace addes

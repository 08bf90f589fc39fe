#include "addes/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace addes {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxPlantedClasses = 20;

}  // namespace

PlantedConfig PlantedConfig::reference() {
  PlantedConfig c;
  c.fill_defaults();
  return c;
}

void PlantedConfig::fill_defaults() {
  const bool is_reference_shape = num_inexact == 8 && num_target == 2;
  if (base_rates.empty()) {
    if (is_reference_shape) {
      base_rates = {0.30, 0.25, 0.22, 0.20, 0.15, 0.15, 0.12, 0.10};
    } else {
      base_rates.assign(num_inexact, 0.2);
    }
  }
  if (dependencies.empty() && is_reference_shape) {
    dependencies = {{0, 4, 0.5}, {2, 5, 0.4}, {1, 6, 0.4}, {3, 7, 0.3}};
  }
  if (target_parents.empty() && num_inexact > 0) {
    for (std::size_t t = 0; t < num_target; ++t) {
      target_parents.push_back({(2 * t) % num_inexact, (2 * t + 1) % num_inexact});
    }
  }
}

void PlantedConfig::validate() const {
  if (num_inexact == 0) throw ConfigError("planted config: at least one inexact class is required");
  if (dim == 0) throw ConfigError("planted config: dim must be positive");
  if (num_inexact + num_target > kMaxPlantedClasses) {
    throw ConfigError("planted config: at most " + std::to_string(kMaxPlantedClasses) +
                      " classes are supported by the exact joint table");
  }
  if (n_labeled == 0 || n_unlabeled == 0 || n_test == 0) {
    throw ConfigError("planted config: n_labeled, n_unlabeled and n_test must be positive");
  }
  if (!(noise_scale >= 0)) throw ConfigError("planted config: noise_scale must be non-negative");
  if (base_rates.size() != num_inexact) {
    throw ConfigError("planted config: base_rates needs one entry per inexact class");
  }
  for (double r : base_rates) {
    if (!(r >= 0 && r <= 1)) throw ConfigError("planted config: base rates must be in [0,1]");
  }
  for (const auto& d : dependencies) {
    if (d.parent >= num_inexact || d.child >= num_inexact || d.parent == d.child) {
      throw ConfigError("planted config: dependency references an invalid inexact class");
    }
    if (!(d.prob >= 0 && d.prob <= 1)) throw ConfigError("planted config: dependency prob out of range");
  }
  if (target_parents.size() != num_target) {
    throw ConfigError("planted config: target_parents needs one entry per target class");
  }
  for (const auto& ps : target_parents) {
    if (ps.empty()) throw ConfigError("planted config: every target needs at least one parent");
    for (auto p : ps) {
      if (p >= num_inexact) throw ConfigError("planted config: target parent out of range");
    }
  }
  if (!(flip_rate >= 0 && flip_rate <= 1)) throw ConfigError("planted config: flip_rate out of range");
}

std::vector<std::string> PlantedConfig::inexact_names() const {
  std::vector<std::string> n;
  for (std::size_t i = 0; i < num_inexact; ++i) n.push_back("s" + std::to_string(i));
  return n;
}

std::vector<std::string> PlantedConfig::target_names() const {
  std::vector<std::string> n;
  for (std::size_t i = 0; i < num_target; ++i) n.push_back("t" + std::to_string(i));
  return n;
}

double PlantedModel::marginal(std::size_t i) const {
  double p = 0;
  for (std::size_t k = 0; k < joint.size(); ++k)
    if (k >> i & 1U) p += joint[k];
  return p;
}

double PlantedModel::pair_marginal(std::size_t i, std::size_t j) const {
  double p = 0;
  for (std::size_t k = 0; k < joint.size(); ++k)
    if ((k >> i & 1U) && (k >> j & 1U)) p += joint[k];
  return p;
}

double PlantedModel::conditional(std::size_t i, std::size_t j) const {
  const double pj = marginal(j);
  return pj > 0 ? pair_marginal(i, j) / pj : 0.0;
}

PlantedModel build_planted_model(const PlantedConfig& config) {
  config.validate();
  const std::size_t s = config.num_inexact, t = config.num_target, w = s + t;
  PlantedModel m;
  m.config = config;
  // Exact propagation of probability mass through the generative steps.
  std::vector<double> p(std::size_t{1} << w, 0.0);
  p[0] = 1.0;
  auto set_bit = [&](std::size_t bit, auto prob_on) {
    std::vector<double> next(p.size(), 0.0);
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (p[k] == 0) continue;
      const double on = prob_on(k);
      next[k | (std::size_t{1} << bit)] += p[k] * on;
      next[k & ~(std::size_t{1} << bit)] += p[k] * (1 - on);
    }
    p.swap(next);
  };
  for (std::size_t i = 0; i < s; ++i) {
    set_bit(i, [&](std::size_t) { return config.base_rates[i]; });
  }
  for (const auto& d : config.dependencies) {
    set_bit(d.child, [&](std::size_t k) {
      const bool child = k >> d.child & 1U;
      if (child) return 1.0;
      return (k >> d.parent & 1U) ? d.prob : 0.0;
    });
  }
  for (std::size_t ti = 0; ti < t; ++ti) {
    set_bit(s + ti, [&](std::size_t k) {
      bool any = false;
      for (auto par : config.target_parents[ti]) any = any || (k >> par & 1U);
      return any ? 1.0 - config.flip_rate : config.flip_rate;
    });
  }
  m.joint = std::move(p);
  return m;
}

std::vector<LabelVector> sample_planted_labels(const PlantedModel& model, std::size_t n, Rng& rng) {
  const std::size_t w = model.config.num_inexact + model.config.num_target;
  std::vector<double> cdf(model.joint.size());
  double acc = 0;
  for (std::size_t k = 0; k < cdf.size(); ++k) cdf[k] = (acc += model.joint[k]);
  std::vector<LabelVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform() * acc;
    std::size_t k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    k = std::min(k, cdf.size() - 1);
    LabelVector y(w);
    for (std::size_t j = 0; j < w; ++j) y[j] = (k >> j) & 1U;
    out.push_back(std::move(y));
  }
  return out;
}

std::size_t DatasetBundle::dim() const {
  for (const auto* part : {&d_l, &d_u, &test, &d_e})
    if (!part->empty()) return part->front().x.size();
  return 0;
}

LabelGraph build_relation_graph(const DatasetBundle& bundle, std::optional<double> threshold) {
  const auto counts = count_cooccurrence(y_s_of(bundle.d_l), bundle.space);
  return link_targets(conditional_adjacency(counts, threshold), bundle.space, bundle.relations);
}

PlantedDraw generate_planted(const PlantedConfig& raw) {
  PlantedConfig config = raw;
  config.fill_defaults();
  PlantedModel model = build_planted_model(config);
  const std::size_t s = config.num_inexact, t = config.num_target, w = s + t, d = config.dim;

  Rng rng = Rng::stream(config.seed, "data");
  model.prototypes = rng.normal_tensor(w, d);

  const std::size_t total = config.n_labeled + config.n_unlabeled + config.n_test;
  const auto labels = sample_planted_labels(model, total, rng);

  DatasetBundle b;
  b.space = LabelSpace(config.inexact_names(), config.target_names());
  for (std::size_t ti = 0; ti < t; ++ti) {
    for (auto par : config.target_parents[ti]) b.relations[b.space.target_classes()[ti]].insert(b.space.inexact_classes()[par]);
  }
  for (std::size_t n = 0; n < total; ++n) {
    Instance inst;
    inst.x.assign(d, 0.0);
    for (std::size_t j = 0; j < w; ++j) {
      if (!labels[n][j]) continue;
      for (std::size_t k = 0; k < d; ++k) inst.x[k] += model.prototypes(j, k);
    }
    for (std::size_t k = 0; k < d; ++k) inst.x[k] += config.noise_scale * rng.normal();
    LabelVector ys(labels[n].begin(), labels[n].begin() + static_cast<std::ptrdiff_t>(s));
    LabelVector yt(labels[n].begin() + static_cast<std::ptrdiff_t>(s), labels[n].end());
    if (n < config.n_labeled) {
      inst.y_s = ys;
      b.d_l_hidden_targets.push_back(yt);
      b.d_l.push_back(std::move(inst));
    } else if (n < config.n_labeled + config.n_unlabeled) {
      b.d_u.push_back(std::move(inst));
    } else {
      inst.y_s = ys;
      inst.y_t = yt;
      b.test.push_back(std::move(inst));
    }
  }
  PlantedDraw out;
  out.graph = build_relation_graph(b);
  b.d_e = build_estimated_labeled(b.d_l, out.graph);
  b.planted = std::move(model);
  out.bundle = std::move(b);
  return out;
}

std::vector<Instance> build_estimated_labeled(const std::vector<Instance>& d_l,
                                              const LabelGraph& graph) {
  std::vector<Instance> out;
  out.reserve(d_l.size());
  for (const auto& inst : d_l) {
    if (!inst.y_s) throw ContractError("build_estimated_labeled: D_l instance without y_s");
    Instance e = inst;
    e.y_t = estimate_target_prior(*inst.y_s, graph);
    out.push_back(std::move(e));
  }
  return out;
}

Split split_tail(const std::vector<Instance>& items, double fraction) {
  if (!(fraction >= 0 && fraction < 1)) throw ConfigError("validation fraction must be in [0, 1)");
  const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(items.size())));
  Split s;
  const auto cut = static_cast<std::ptrdiff_t>(items.size() - std::min(k, items.size()));
  s.train.assign(items.begin(), items.begin() + cut);
  s.validation.assign(items.begin() + cut, items.end());
  return s;
}

std::vector<LabelVector> y_s_of(const std::vector<Instance>& items) {
  std::vector<LabelVector> out;
  out.reserve(items.size());
  for (const auto& i : items) {
    if (!i.y_s) throw ContractError("instance without y_s where labels are required");
    out.push_back(*i.y_s);
  }
  return out;
}

Tensor x_of(const std::vector<Instance>& items) {
  if (items.empty()) throw DimensionError("x_of: no instances");
  const std::size_t d = items.front().x.size();
  Tensor t(items.size(), d);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].x.size() != d) throw DimensionError("x_of: ragged instances");
    std::copy(items[i].x.begin(), items[i].x.end(), t.values().begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return t;
}

std::string instance_to_json(const Instance& inst) {
  json j;
  j["x"] = inst.x;
  if (inst.y_s) j["y_s"] = std::vector<int>(inst.y_s->begin(), inst.y_s->end());
  if (inst.y_t) j["y_t"] = std::vector<int>(inst.y_t->begin(), inst.y_t->end());
  return j.dump();
}

namespace {

LabelVector labels_from_json(const json& j, const char* field) {
  LabelVector out;
  for (const auto& v : j) {
    const int b = v.get<int>();
    if (b != 0 && b != 1) throw ParseError(std::string(field) + " entries must be 0 or 1");
    out.push_back(static_cast<std::uint8_t>(b));
  }
  return out;
}

}  // namespace

Instance instance_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
    Instance inst;
    inst.x = j.at("x").get<std::vector<double>>();
    if (inst.x.empty()) throw ParseError("x must be non-empty");
    if (j.contains("y_s") && !j["y_s"].is_null()) inst.y_s = labels_from_json(j["y_s"], "y_s");
    if (j.contains("y_t") && !j["y_t"].is_null()) inst.y_t = labels_from_json(j["y_t"], "y_t");
    return inst;
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
}

void save_instances(const std::vector<Instance>& items, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& i : items) out << instance_to_json(i) << '\n';
}

std::vector<Instance> load_instances(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::vector<Instance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(instance_from_json(line));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

namespace {

json planted_config_json(const PlantedConfig& c) {
  json deps = json::array();
  for (const auto& d : c.dependencies) deps.push_back({{"parent", d.parent}, {"child", d.child}, {"prob", d.prob}});
  return {{"num_inexact", c.num_inexact}, {"num_target", c.num_target}, {"dim", c.dim},
          {"n_labeled", c.n_labeled},     {"n_unlabeled", c.n_unlabeled}, {"n_test", c.n_test},
          {"noise_scale", c.noise_scale}, {"base_rates", c.base_rates},  {"dependencies", deps},
          {"target_parents", c.target_parents}, {"flip_rate", c.flip_rate}, {"seed", c.seed}};
}

PlantedConfig planted_config_from_json(const json& j) {
  PlantedConfig c;
  c.num_inexact = j.at("num_inexact");
  c.num_target = j.at("num_target");
  c.dim = j.at("dim");
  c.n_labeled = j.at("n_labeled");
  c.n_unlabeled = j.at("n_unlabeled");
  c.n_test = j.at("n_test");
  c.noise_scale = j.at("noise_scale");
  c.base_rates = j.at("base_rates").get<std::vector<double>>();
  for (const auto& d : j.at("dependencies")) c.dependencies.push_back({d.at("parent"), d.at("child"), d.at("prob")});
  c.target_parents = j.at("target_parents").get<std::vector<std::vector<std::size_t>>>();
  c.flip_rate = j.at("flip_rate");
  c.seed = j.at("seed");
  return c;
}

}  // namespace

void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_instances(bundle.d_l, dir / "dl.jsonl");
  save_instances(bundle.d_u, dir / "du.jsonl");
  save_instances(bundle.d_e, dir / "de.jsonl");
  save_instances(bundle.test, dir / "test.jsonl");
  json meta;
  meta["inexact_classes"] = bundle.space.inexact_classes();
  meta["target_classes"] = bundle.space.target_classes();
  json rel = json::object();
  for (const auto& [t, rs] : bundle.relations) rel[t] = std::vector<std::string>(rs.begin(), rs.end());
  meta["relations"] = rel;
  json hidden = json::array();
  for (const auto& y : bundle.d_l_hidden_targets) hidden.push_back(std::vector<int>(y.begin(), y.end()));
  meta["d_l_hidden_targets"] = hidden;
  if (bundle.planted) {
    const auto& p = *bundle.planted;
    json proto = json::array();
    for (std::size_t i = 0; i < p.prototypes.rows(); ++i) {
      auto r = p.prototypes.row_span(i);
      proto.push_back(std::vector<double>(r.begin(), r.end()));
    }
    meta["planted"] = {{"config", planted_config_json(p.config)}, {"prototypes", proto}};
  }
  std::ofstream out(dir / "meta.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "meta.json").string());
  out << meta.dump(2) << '\n';
}

DatasetBundle load_bundle(const std::filesystem::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw ConfigError("cannot read " + (dir / "meta.json").string());
  DatasetBundle b;
  try {
    json meta = json::parse(in);
    b.space = LabelSpace(meta.at("inexact_classes").get<std::vector<std::string>>(),
                         meta.at("target_classes").get<std::vector<std::string>>());
    for (const auto& [t, rs] : meta.at("relations").items()) {
      auto names = rs.get<std::vector<std::string>>();
      b.relations[t] = std::set<std::string>(names.begin(), names.end());
    }
    for (const auto& y : meta.value("d_l_hidden_targets", json::array())) {
      b.d_l_hidden_targets.push_back(labels_from_json(y, "d_l_hidden_targets"));
    }
    if (meta.contains("planted")) {
      PlantedConfig cfg = planted_config_from_json(meta["planted"].at("config"));
      PlantedModel pm = build_planted_model(cfg);
      std::vector<std::vector<double>> rows = meta["planted"].at("prototypes");
      pm.prototypes = Tensor::from_rows(rows);
      b.planted = std::move(pm);
    }
  } catch (const json::exception& e) {
    throw ParseError((dir / "meta.json").string() + ": " + e.what());
  }
  b.d_l = load_instances(dir / "dl.jsonl");
  b.d_u = load_instances(dir / "du.jsonl");
  b.d_e = load_instances(dir / "de.jsonl");
  b.test = load_instances(dir / "test.jsonl");
  return b;
}

}  // namespace addes

#include "addes/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace addes {

namespace {

class Reader {
 public:
  Reader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(path(key) + ": " + e.what());
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const Json& at(const char* key) const { return j_.at(key); }
  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown config key: " + path(k));
    }
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <typename Enum, typename Parse>
void get_enum(Reader& r, const char* key, Enum& out, Parse parse) {
  std::string s;
  if (!r.has(key)) return;
  r.get(key, s);
  out = parse(s);
}

}  // namespace

Json to_json(const PlantedConfig& c) {
  Json deps = Json::array();
  for (const auto& d : c.dependencies) deps.push_back({{"parent", d.parent}, {"child", d.child}, {"prob", d.prob}});
  return {{"num_inexact", c.num_inexact}, {"num_target", c.num_target},   {"dim", c.dim},
          {"n_labeled", c.n_labeled},     {"n_unlabeled", c.n_unlabeled}, {"n_test", c.n_test},
          {"noise_scale", c.noise_scale}, {"base_rates", c.base_rates},  {"dependencies", deps},
          {"target_parents", c.target_parents}, {"flip_rate", c.flip_rate}, {"seed", c.seed}};
}

PlantedConfig planted_config_from(const Json& j) {
  PlantedConfig c;
  Reader r(j, "data");
  r.get("num_inexact", c.num_inexact);
  r.get("num_target", c.num_target);
  r.get("dim", c.dim);
  r.get("n_labeled", c.n_labeled);
  r.get("n_unlabeled", c.n_unlabeled);
  r.get("n_test", c.n_test);
  r.get("noise_scale", c.noise_scale);
  r.get("base_rates", c.base_rates);
  if (r.has("dependencies")) {
    for (const auto& d : r.at("dependencies")) {
      Reader dr(d, r.path("dependencies[]"));
      LabelDependency dep;
      dr.get("parent", dep.parent);
      dr.get("child", dep.child);
      dr.get("prob", dep.prob);
      dr.finish();
      c.dependencies.push_back(dep);
    }
  }
  r.get("target_parents", c.target_parents);
  r.get("flip_rate", c.flip_rate);
  r.get("seed", c.seed);
  r.finish();
  return c;
}

Json to_json(const ClassifierConfig& c) {
  return {{"extractor_hidden", c.extractor_hidden},
          {"feature_dim", c.feature_dim},
          {"gcn_hidden", c.gcn_hidden},
          {"extractor_activation", to_string(c.extractor_activation)}};
}

ClassifierConfig classifier_config_from(const Json& j) {
  ClassifierConfig c;
  Reader r(j, "classifier");
  r.get("extractor_hidden", c.extractor_hidden);
  r.get("feature_dim", c.feature_dim);
  r.get("gcn_hidden", c.gcn_hidden);
  get_enum(r, "extractor_activation", c.extractor_activation, activation_from_string);
  r.finish();
  return c;
}

Json to_json(const ModelConfig& c) {
  return {{"latent_dim", c.latent_dim},
          {"encoder_hidden", c.encoder_hidden},
          {"decoder_hidden", c.decoder_hidden},
          {"activation", to_string(c.activation)},
          {"classifier", to_json(c.classifier)}};
}

ModelConfig model_config_from(const Json& j) {
  ModelConfig c;
  Reader r(j, "model");
  r.get("latent_dim", c.latent_dim);
  r.get("encoder_hidden", c.encoder_hidden);
  r.get("decoder_hidden", c.decoder_hidden);
  get_enum(r, "activation", c.activation, activation_from_string);
  if (r.has("classifier")) c.classifier = classifier_config_from(r.at("classifier"));
  r.finish();
  return c;
}

Json to_json(const GenConfig& c) {
  return {{"alpha", c.alpha},
          {"beta", c.beta},
          {"prior_clamp_eps", c.prior_clamp_eps},
          {"constraint_label_source", to_string(c.constraint_label_source)},
          {"constraint_stop_grad_classifier", c.constraint_stop_grad_classifier},
          {"fixed_decoder_sigma", c.fixed_decoder_sigma}};
}

GenConfig gen_config_from(const Json& j) {
  GenConfig c;
  Reader r(j, "gen");
  r.get("alpha", c.alpha);
  r.get("beta", c.beta);
  r.get("prior_clamp_eps", c.prior_clamp_eps);
  get_enum(r, "constraint_label_source", c.constraint_label_source, label_source_from_string);
  r.get("constraint_stop_grad_classifier", c.constraint_stop_grad_classifier);
  r.get("fixed_decoder_sigma", c.fixed_decoder_sigma);
  r.finish();
  if (!(c.alpha >= 0) || !(c.beta >= 0)) throw ConfigError("gen: alpha and beta must be non-negative");
  return c;
}

Json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"lr", c.lr},
          {"optimizer", to_string(c.optimizer)},
          {"pretrain_classifier_epochs", c.pretrain_classifier_epochs},
          {"pretrain_autoencoder_epochs", c.pretrain_autoencoder_epochs},
          {"joint_epochs", c.joint_epochs},
          {"early_stop_patience", c.early_stop_patience},
          {"val_fraction", c.val_fraction},
          {"skip_pretraining", c.skip_pretraining},
          {"seed", c.seed}};
}

TrainConfig train_config_from(const Json& j) {
  TrainConfig c;
  Reader r(j, "train");
  r.get("batch_size", c.batch_size);
  r.get("lr", c.lr);
  get_enum(r, "optimizer", c.optimizer, optimizer_from_string);
  r.get("pretrain_classifier_epochs", c.pretrain_classifier_epochs);
  r.get("pretrain_autoencoder_epochs", c.pretrain_autoencoder_epochs);
  r.get("joint_epochs", c.joint_epochs);
  r.get("early_stop_patience", c.early_stop_patience);
  r.get("val_fraction", c.val_fraction);
  r.get("skip_pretraining", c.skip_pretraining);
  r.get("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

Json to_json(const DownstreamConfig& c) {
  return {{"classifier", to_json(c.classifier)},
          {"arch", to_string(c.arch)},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr}};
}

DownstreamConfig downstream_config_from(const Json& j) {
  DownstreamConfig c;
  Reader r(j, "downstream");
  if (r.has("classifier")) c.classifier = classifier_config_from(r.at("classifier"));
  get_enum(r, "arch", c.arch, arch_from_string);
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  r.get("lr", c.lr);
  r.finish();
  if (c.batch_size == 0 || !(c.lr > 0)) throw ConfigError("downstream: batch_size and lr must be positive");
  return c;
}

Json to_json(const SweepSpec& s) {
  return {{"variable", s.variable}, {"grid", s.grid}, {"seeds", s.seeds}};
}

SweepSpec sweep_spec_from(const Json& j) {
  Reader r(j, "sweeps[]");
  std::string variable;
  r.get("variable", variable);
  SweepSpec s = SweepSpec::defaults_for(variable);
  r.get("grid", s.grid);
  r.get("seeds", s.seeds);
  r.finish();
  s.validate();
  return s;
}

Json to_json(const RunConfig& c) {
  Json sweeps = Json::array();
  for (const auto& s : c.sweeps) sweeps.push_back(to_json(s));
  Json data = to_json(c.data);
  Json train = to_json(c.train);
  // the root seed drives every sub-stream
  data.erase("seed");
  train.erase("seed");
  return {{"seed", c.seed},
          {"output_dir", c.output_dir},
          {"data", data},
          {"model", to_json(c.model)},
          {"gen", to_json(c.gen)},
          {"train", train},
          {"downstream", to_json(c.downstream)},
          {"ds_grid", c.ds_grid},
          {"entropy_lambda", c.entropy_lambda},
          {"sweeps", sweeps}};
}

RunConfig run_config_from(const Json& j) {
  RunConfig c;
  Reader r(j, "");
  r.get("seed", c.seed);
  r.get("output_dir", c.output_dir);
  if (r.has("data")) c.data = planted_config_from(r.at("data"));
  if (r.has("model")) c.model = model_config_from(r.at("model"));
  if (r.has("gen")) c.gen = gen_config_from(r.at("gen"));
  if (r.has("train")) c.train = train_config_from(r.at("train"));
  if (r.has("downstream")) c.downstream = downstream_config_from(r.at("downstream"));
  r.get("ds_grid", c.ds_grid);
  r.get("entropy_lambda", c.entropy_lambda);
  if (r.has("sweeps")) {
    for (const auto& s : r.at("sweeps")) c.sweeps.push_back(sweep_spec_from(s));
  }
  r.finish();
  for (const char* part : {"data", "train"}) {
    if (j.contains(part) && j[part].contains("seed")) {
      throw ConfigError(std::string(part) + ".seed is not settable; use the root seed");
    }
  }
  c.data.seed = c.seed;
  c.train.seed = c.seed;
  c.data.fill_defaults();
  c.validate();
  return c;
}

void RunConfig::validate() const {
  data.validate();
  train.validate();
  if (!(entropy_lambda >= 0)) throw ConfigError("entropy_lambda must be non-negative");
  for (const auto& s : sweeps) s.validate();
}

PipelineConfig RunConfig::pipeline() const {
  PipelineConfig p;
  p.model = model;
  p.gen = gen;
  p.train = train;
  p.downstream = downstream;
  p.ds_grid = ds_grid;
  p.config_hash = config_hash(*this);
  return p;
}

void apply_override(Json& doc, const std::string& dotted_path, const std::string& value) {
  if (dotted_path.empty()) throw ConfigError("empty override path");
  Json parsed;
  try {
    parsed = Json::parse(value);
  } catch (const Json::exception&) {
    parsed = value;
  }
  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted_path.find('.', start);
    const std::string key = dotted_path.substr(start, dot - start);
    if (key.empty()) throw ConfigError("malformed override path: " + dotted_path);
    if (!node->is_object()) throw ConfigError("override path crosses a non-object: " + dotted_path);
    if (dot == std::string::npos) {
      (*node)[key] = parsed;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides) {
  Json doc = Json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    try {
      doc = Json::parse(in);
    } catch (const Json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: " + o);
    apply_override(doc, o.substr(0, eq), o.substr(eq + 1));
  }
  return run_config_from(doc);
}

std::string config_hash(const RunConfig& c) {
  Json doc = to_json(c);
  doc.erase("output_dir");  // where artifacts go does not change them
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(doc.dump())));
  return buf;
}

}  // namespace addes

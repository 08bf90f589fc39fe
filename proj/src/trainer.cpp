#include "addes/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "addes/config.hpp"
#include "addes/probability.hpp"

namespace addes {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(lr > 0)) throw ConfigError("train.lr must be positive");
  if (!(val_fraction >= 0 && val_fraction < 1)) throw ConfigError("train.val_fraction must be in [0, 1)");
}

namespace {

Tensor rows_of(const Tensor& src, const std::vector<std::size_t>& idx) {
  Tensor out(idx.size(), src.cols());
  const std::size_t c = src.cols();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(src.values().begin() + static_cast<std::ptrdiff_t>(idx[i] * c), c,
                out.values().begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  return out;
}

Tensor y_s_tensor(const std::vector<Instance>& items, std::size_t width) {
  auto ys = y_s_of(items);
  Tensor t(items.size(), width);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (ys[i].size() != width) throw DimensionError("y_s has inconsistent length");
    for (std::size_t j = 0; j < width; ++j) t(i, j) = ys[i][j];
  }
  return t;
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void accumulate(LossBreakdown& acc, const LossBreakdown& v) {
  acc.recon += v.recon;
  acc.kl_z += v.kl_z;
  acc.kl_y += v.kl_y;
  acc.l_cons += v.l_cons;
  acc.l_c_s += v.l_c_s;
  acc.total += v.total;
}

void divide(LossBreakdown& acc, double n) {
  acc.recon /= n;
  acc.kl_z /= n;
  acc.kl_y /= n;
  acc.l_cons /= n;
  acc.l_c_s /= n;
  acc.total /= n;
}

}  // namespace

TrainData TrainData::from_instances(const std::vector<Instance>& d_l,
                                    const std::vector<Instance>& d_u, double val_fraction) {
  if (d_l.empty()) throw ContractError("training needs a non-empty D_l");
  if (d_u.empty()) throw ContractError("training needs a non-empty D_u");
  const std::size_t s = d_l.front().y_s ? d_l.front().y_s->size() : 0;
  Split l = split_tail(d_l, val_fraction);
  Split u = split_tail(d_u, val_fraction);
  if (l.train.empty() || u.train.empty()) throw ContractError("validation split leaves no training data");
  TrainData t;
  t.l_x = x_of(l.train);
  t.l_y_s = y_s_tensor(l.train, s);
  t.u_x = x_of(u.train);
  if (!l.validation.empty()) {
    t.val_l_x = x_of(l.validation);
    t.val_l_y_s = y_s_tensor(l.validation, s);
  }
  if (!u.validation.empty()) t.val_u_x = x_of(u.validation);
  return t;
}

Trainer::Trainer(AddesModel& model, const LabelPrior& prior, GenConfig gen, TrainConfig config,
                 TrainData data)
    : model_(model),
      prior_(prior),
      gen_(gen),
      config_(config),
      data_(std::move(data)),
      rng_(Rng::stream(config.seed, "training")) {
  config_.validate();
  if (data_.num_labeled() == 0) throw ContractError("training needs a non-empty D_l");
  if (data_.l_x.cols() != model_.data_dim) {
    throw DimensionError("training data has dimension " + std::to_string(data_.l_x.cols()) +
                         ", model expects " + std::to_string(model_.data_dim));
  }
  state_.optimizer = Optimizer(config_.optimizer, config_.lr);
}

std::size_t Trainer::steps_per_epoch(bool labeled_only) const {
  const std::size_t n = labeled_only ? data_.num_labeled()
                                     : std::max(data_.num_labeled(), data_.num_unlabeled());
  return ceil_div(n, config_.batch_size);
}

void Trainer::sample_batch(bool with_unlabeled, Tensor& lx, Tensor& ly, Tensor& ux) {
  const std::size_t n = config_.batch_size;
  last_l_ = rng_.sample_indices(data_.num_labeled(), n);
  lx = rows_of(data_.l_x, last_l_);
  ly = rows_of(data_.l_y_s, last_l_);
  if (with_unlabeled) {
    last_u_ = rng_.sample_indices(data_.num_unlabeled(), n);
    ux = rows_of(data_.u_x, last_u_);
  }
}

void Trainer::pretrain_classifier() {
  if (data_.num_labeled() == 0) throw ContractError("pretrain_classifier: empty D_l");
  const std::size_t s = model_.num_inexact, t = model_.num_target;
  Optimizer opt(config_.optimizer, config_.lr);
  const std::size_t steps = steps_per_epoch(true);
  for (std::size_t e = 0; e < config_.pretrain_classifier_epochs; ++e) {
    for (std::size_t k = 0; k < steps; ++k) {
      Tensor lx, ly, ux;
      sample_batch(false, lx, ly, ux);
      Tape tape;
      Var probs = model_.classifier.classify(tape, model_.params, tape.constant(lx), true);
      Var loss = scale(loss_supervised(probs, ly), gen_.beta);
      if (t > 0) {
        Var yt = clamp(slice_cols(probs, s, t), kProbClamp, 1.0 - kProbClamp);
        Var prior = tape.constant(prior_.clamped_target_prior(ly));
        loss = add(loss, mean(kl_bernoulli_vec(yt, prior)));
      }
      model_.params.zero_grad();
      tape.backward(loss);
      opt.step(model_.params);
    }
  }
  model_.params.zero_grad();
  state_.classifier_pretrained = true;
}

void Trainer::pretrain_autoencoder() {
  if (data_.num_unlabeled() == 0) throw ContractError("pretrain_autoencoder: empty D_u");
  Optimizer opt(config_.optimizer, config_.lr);
  const std::size_t steps = steps_per_epoch(false);
  for (std::size_t e = 0; e < config_.pretrain_autoencoder_epochs; ++e) {
    for (std::size_t k = 0; k < steps; ++k) {
      Tensor lx, ly, ux;
      sample_batch(true, lx, ly, ux);
      Tape tape;
      LossContext ctx{tape, model_, prior_, gen_, rng_, Trainable{true, true, false}};
      LossEval ev = total_loss(ctx, lx, ly, ux);
      model_.params.zero_grad();
      tape.backward(ev.total);
      opt.step(model_.params);
    }
  }
  model_.params.zero_grad();
  state_.autoencoder_pretrained = true;
}

double Trainer::validation_loss() {
  if (data_.val_l_x.values().empty() || data_.val_u_x.values().empty()) return 0.0;
  Rng noise = Rng::stream(config_.seed, "validation");
  Tape tape;
  LossContext ctx{tape, model_, prior_, gen_, noise, Trainable::none()};
  return total_loss(ctx, data_.val_l_x, data_.val_l_y_s, data_.val_u_x).values.total;
}

EpochLog Trainer::run_joint_epoch() {
  if (data_.num_unlabeled() == 0) throw ContractError("train_joint: D_u is empty");
  const std::size_t steps = steps_per_epoch(false);
  LossBreakdown acc;
  for (std::size_t k = 0; k < steps; ++k) {
    Tensor lx, ly, ux;
    sample_batch(true, lx, ly, ux);
    Tape tape;
    LossContext ctx{tape, model_, prior_, gen_, rng_, Trainable::all()};
    LossEval ev = total_loss(ctx, lx, ly, ux);
    if (!std::isfinite(ev.values.total)) {
      throw DomainError("joint training diverged at epoch " + std::to_string(state_.epoch + 1));
    }
    model_.params.zero_grad();
    tape.backward(ev.total);
    state_.optimizer.step(model_.params);
    accumulate(acc, ev.values);
  }
  model_.params.zero_grad();
  divide(acc, static_cast<double>(steps));

  EpochLog row;
  row.epoch = ++state_.epoch;
  row.train = acc;
  row.val_total = validation_loss();
  state_.log.push_back(row);
  if (state_.best_params.empty() || row.val_total < state_.best_val) {
    state_.best_val = row.val_total;
    state_.best_epoch = row.epoch;
    state_.best_params = snapshot(model_.params);
    state_.since_best = 0;
  } else {
    ++state_.since_best;
    if (config_.early_stop_patience > 0 && state_.since_best >= config_.early_stop_patience) {
      state_.stopped = true;
    }
  }
  return row;
}

const TrainState& Trainer::train_joint() {
  if (!config_.skip_pretraining &&
      !(state_.classifier_pretrained && state_.autoencoder_pretrained)) {
    throw ConfigError("train_joint before both pretraining stages; set skip_pretraining to bypass");
  }
  if (data_.num_unlabeled() == 0) throw ContractError("train_joint: D_u is empty");
  while (state_.epoch < config_.joint_epochs && !state_.stopped) run_joint_epoch();
  if (!state_.best_params.empty()) restore_values(model_.params, state_.best_params);
  sync_state_out();
  return state_;
}

const TrainState& Trainer::fit() {
  if (!config_.skip_pretraining) {
    pretrain_classifier();
    pretrain_autoencoder();
  }
  return train_joint();
}

void Trainer::sync_state_out() { state_.rng_state = rng_.save_state(); }

void Trainer::restore(TrainState state) {
  state_ = std::move(state);
  if (!state_.rng_state.empty()) rng_.load_state(state_.rng_state);
}

std::vector<Parameter> snapshot(const ParamStore& store) {
  std::vector<Parameter> out;
  for (const auto& p : store) out.push_back({p.name, Tensor(p.tensor.shape(), p.tensor.values())});
  return out;
}

void restore_values(ParamStore& store, const std::vector<Parameter>& values) {
  for (const auto& p : values) {
    Tensor& dst = store[store.index_of(p.name)].tensor;
    if (dst.shape() != p.tensor.shape()) {
      throw DimensionError("parameter " + p.name + ": stored shape " + shape_string(p.tensor.shape()) +
                           " vs model " + shape_string(dst.shape()));
    }
    dst.values() = p.tensor.values();
  }
}

std::string params_digest(const ParamStore& store) {
  std::string bytes;
  for (const auto& p : store) {
    bytes += p.name;
    bytes.push_back('\0');
    const auto& v = p.tensor.values();
    bytes.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

namespace {

Json params_json(const std::vector<Parameter>& params) {
  Json out = Json::object();
  for (const auto& p : params) out[p.name] = {{"shape", p.tensor.shape()}, {"values", p.tensor.values()}};
  return out;
}

std::vector<Parameter> params_from_json(const Json& j) {
  std::vector<Parameter> out;
  for (const auto& [name, v] : j.items()) {
    out.push_back({name, Tensor(v.at("shape").get<Shape>(), v.at("values").get<std::vector<double>>())});
  }
  return out;
}

Json breakdown_json(const LossBreakdown& b) {
  return {{"recon", b.recon}, {"kl_z", b.kl_z},   {"kl_y", b.kl_y},
          {"l_cons", b.l_cons}, {"l_c_s", b.l_c_s}, {"total", b.total}};
}

LossBreakdown breakdown_from_json(const Json& j) {
  return {j.at("recon"), j.at("kl_z"), j.at("kl_y"), j.at("l_cons"), j.at("l_c_s"), j.at("total")};
}

Json state_json(const TrainState& s) {
  Json moments = Json::object();
  for (const auto& [name, m] : s.optimizer.state()) moments[name] = {{"m", m.m}, {"v", m.v}, {"t", m.t}};
  Json log = Json::array();
  for (const auto& row : s.log) {
    log.push_back({{"epoch", row.epoch}, {"train", breakdown_json(row.train)}, {"val_total", row.val_total}});
  }
  return {{"epoch", s.epoch},
          {"best_val", std::isfinite(s.best_val) ? Json(s.best_val) : Json(nullptr)},
          {"best_epoch", s.best_epoch},
          {"since_best", s.since_best},
          {"classifier_pretrained", s.classifier_pretrained},
          {"autoencoder_pretrained", s.autoencoder_pretrained},
          {"stopped", s.stopped},
          {"best_params", params_json(s.best_params)},
          {"optimizer", {{"kind", to_string(s.optimizer.kind())}, {"lr", s.optimizer.lr()}, {"moments", moments}}},
          {"rng_state", s.rng_state},
          {"log", log}};
}

TrainState state_from_json(const Json& j) {
  TrainState s;
  s.epoch = j.at("epoch");
  s.best_val = j.at("best_val").is_null() ? std::numeric_limits<double>::infinity()
                                          : j.at("best_val").get<double>();
  s.best_epoch = j.at("best_epoch");
  s.since_best = j.at("since_best");
  s.classifier_pretrained = j.at("classifier_pretrained");
  s.autoencoder_pretrained = j.at("autoencoder_pretrained");
  s.stopped = j.at("stopped");
  s.best_params = params_from_json(j.at("best_params"));
  const Json& o = j.at("optimizer");
  s.optimizer = Optimizer(optimizer_from_string(o.at("kind")), o.at("lr").get<double>());
  for (const auto& [name, m] : o.at("moments").items()) {
    s.optimizer.state()[name] = {m.at("m").get<std::vector<double>>(), m.at("v").get<std::vector<double>>(),
                                 m.at("t").get<std::int64_t>()};
  }
  s.rng_state = j.at("rng_state");
  for (const auto& row : j.at("log")) {
    s.log.push_back({row.at("epoch"), breakdown_from_json(row.at("train")), row.at("val_total")});
  }
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const AddesModel& model,
                     const LabelGraph& classifier_graph, const TrainState* state) {
  Json doc;
  doc["format"] = "addes-checkpoint";
  doc["version"] = 1;
  doc["data_dim"] = model.data_dim;
  doc["fixed_decoder_sigma"] = model.fixed_decoder_sigma;
  doc["model_config"] = to_json(model.config);
  doc["classifier_graph"] = Json::parse(graph_to_json(classifier_graph));
  doc["params"] = params_json(snapshot(model.params));
  if (state) doc["train_state"] = state_json(*state);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << doc.dump() << '\n';
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read checkpoint " + path.string());
  try {
    Json doc = Json::parse(in);
    if (doc.value("format", "") != "addes-checkpoint") throw ParseError("not a checkpoint file");
    LoadedCheckpoint out;
    out.classifier_graph = graph_from_json(doc.at("classifier_graph").dump());
    Rng unused(0);
    out.model = AddesModel::create(doc.at("data_dim"), out.classifier_graph,
                                   model_config_from(doc.at("model_config")),
                                   doc.at("fixed_decoder_sigma"), unused);
    auto params = params_from_json(doc.at("params"));
    if (params.size() != out.model.params.size()) {
      throw ParseError("checkpoint has " + std::to_string(params.size()) + " parameters, model needs " +
                       std::to_string(out.model.params.size()));
    }
    restore_values(out.model.params, params);
    if (doc.contains("train_state")) out.state = state_from_json(doc.at("train_state"));
    return out;
  } catch (const Json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,recon,kl_z,kl_y,l_cons,l_c_s,total,val_total\n";
  out.precision(17);
  for (const auto& r : log) {
    out << r.epoch << ',' << r.train.recon << ',' << r.train.kl_z << ',' << r.train.kl_y << ','
        << r.train.l_cons << ',' << r.train.l_c_s << ',' << r.train.total << ',' << r.val_total << '\n';
  }
}

}  // namespace addes

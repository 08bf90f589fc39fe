#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "addes/dataset.hpp"
#include "addes/generative.hpp"

namespace addes {

struct TrainConfig {
  std::size_t batch_size = 64;  // N
  double lr = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::size_t pretrain_classifier_epochs = 20;
  std::size_t pretrain_autoencoder_epochs = 20;
  std::size_t joint_epochs = 60;
  std::size_t early_stop_patience = 10;  // 0 disables early stopping
  double val_fraction = 0.1;
  bool skip_pretraining = false;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Tensors for the labeled and unlabeled training and validation parts.
struct TrainData {
  Tensor l_x, l_y_s;
  Tensor u_x;
  Tensor val_l_x, val_l_y_s;
  Tensor val_u_x;

  std::size_t num_labeled() const { return l_x.rows(); }
  std::size_t num_unlabeled() const { return u_x.rows(); }

  /// Holds out the tail `val_fraction` of both D_l and D_u.
  static TrainData from_instances(const std::vector<Instance>& d_l,
                                  const std::vector<Instance>& d_u, double val_fraction);
};

struct EpochLog {
  std::size_t epoch = 0;
  LossBreakdown train;
  double val_total = 0;
};

struct TrainState {
  std::size_t epoch = 0;  // completed joint epochs
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t since_best = 0;
  bool classifier_pretrained = false;
  bool autoencoder_pretrained = false;
  bool stopped = false;
  std::vector<Parameter> best_params;
  Optimizer optimizer;
  std::string rng_state;
  std::vector<EpochLog> log;
};

/// Staged optimization of one model. Each step draws N labeled and N
/// unlabeled instances; an epoch is ceil(max(|D_l|, |D_u|) / N) steps.
class Trainer {
 public:
  Trainer(AddesModel& model, const LabelPrior& prior, GenConfig gen, TrainConfig config,
          TrainData data);

  /// beta * L_C^s plus the labeled KL on target outputs; classifier only.
  void pretrain_classifier();
  /// Full objective with the classifier frozen.
  void pretrain_autoencoder();
  /// One joint epoch plus validation and early-stop bookkeeping.
  EpochLog run_joint_epoch();
  /// Joint epochs until the budget or early stop; restores the best-validation
  /// parameters into the model.
  const TrainState& train_joint();
  /// All three stages in order, honoring skip_pretraining.
  const TrainState& fit();

  /// Total loss on the validation part under a fixed noise stream.
  double validation_loss();

  const TrainState& state() const { return state_; }
  TrainState& state() { return state_; }
  const TrainConfig& config() const { return config_; }
  const GenConfig& gen_config() const { return gen_; }
  AddesModel& model() { return model_; }
  Rng& rng() { return rng_; }

  /// Batch indices the last step used, for sampling checks.
  const std::vector<std::size_t>& last_labeled_batch() const { return last_l_; }
  const std::vector<std::size_t>& last_unlabeled_batch() const { return last_u_; }

  /// Persist RNG into the state before saving; restore after loading.
  void sync_state_out();
  void restore(TrainState state);

 private:
  std::size_t steps_per_epoch(bool labeled_only) const;
  void sample_batch(bool with_unlabeled, Tensor& lx, Tensor& ly, Tensor& ux);

  AddesModel& model_;
  const LabelPrior& prior_;
  GenConfig gen_;
  TrainConfig config_;
  TrainData data_;
  Rng rng_;
  TrainState state_;
  std::vector<std::size_t> last_l_, last_u_;
};

std::vector<Parameter> snapshot(const ParamStore& store);
void restore_values(ParamStore& store, const std::vector<Parameter>& values);
/// Hex FNV-1a digest of every parameter name and value byte.
std::string params_digest(const ParamStore& store);

struct LoadedCheckpoint {
  AddesModel model;
  LabelGraph classifier_graph;
  std::optional<TrainState> state;
};

/// JSON document: model config, classifier graph, every parameter as
/// {shape, values}, and optionally the training state.
void save_checkpoint(const std::filesystem::path& path, const AddesModel& model,
                     const LabelGraph& classifier_graph, const TrainState* state);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& log);

}  // namespace addes

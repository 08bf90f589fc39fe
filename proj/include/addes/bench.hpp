#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "addes/dataset.hpp"
#include "addes/metrics.hpp"
#include "addes/trainer.hpp"

namespace addes {

enum class Arch { kIndependent, kGraphAware };
Arch arch_from_string(const std::string& s);
std::string to_string(Arch a);

enum class Variant { kFull, kAddesCnn, kAddesW };
Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

struct DownstreamConfig {
  ClassifierConfig classifier;
  Arch arch = Arch::kGraphAware;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double lr = 1e-3;
};

/// Fully labeled instances for downstream training and testing.
struct LabeledSet {
  Tensor x;
  std::vector<LabelVector> y_s, y_t;

  std::size_t size() const { return y_s.size(); }
  static LabeledSet from_instances(const std::vector<Instance>& items);
  /// This set followed by the first `n` rows of `synthetic`.
  LabeledSet with_synthetic(const SyntheticSet& synthetic, std::size_t n) const;
};

struct DownstreamModel {
  ParamStore params;
  GcnClassifier classifier;
};

/// Fresh classifier fit on every W column. With entropy_lambda > 0 each step
/// also adds lambda times the mean prediction entropy on an unlabeled batch.
DownstreamModel fit_downstream(const LabeledSet& train, const LabelGraph& graph,
                               const DownstreamConfig& config, std::uint64_t seed,
                               const Tensor* unlabeled = nullptr, double entropy_lambda = 0.0);

/// Metrics over target classes, or over S classes when `inexact` is set.
MetricReport score_downstream(DownstreamModel& model, const LabeledSet& test, const LabelSpace& space,
                              bool inexact = false);

MetricReport train_downstream(const LabeledSet& train, const LabeledSet& test,
                              const LabelGraph& graph, const DownstreamConfig& config,
                              std::uint64_t seed);

/// Independent classifier on D_e plus lambda * unlabeled entropy.
MetricReport baseline_entropy_reg(const LabeledSet& train, const Tensor& unlabeled_x,
                                  const LabeledSet& test, const LabelGraph& graph,
                                  const DownstreamConfig& config, std::uint64_t seed,
                                  double lambda = 0.1);

/// Mean binary entropy of a model's predictions on `x`.
double mean_prediction_entropy(DownstreamModel& model, const Tensor& x);

struct PipelineConfig {
  ModelConfig model;
  GenConfig gen;
  TrainConfig train;
  DownstreamConfig downstream;
  /// Candidate |D_s| values for validation selection.
  std::vector<std::size_t> ds_grid{500, 1000, 2000, 4000};
  std::string config_hash;
};

struct GeneratorRun {
  AddesModel model;
  LabelGraph classifier_graph;
  LabelPrior prior;
  TrainState state;
};

/// Classifier graph per variant: the relation graph, its edgeless form, or the
/// weighted graph over ground-truth D_l labels.
LabelGraph classifier_graph_for(Variant variant, const DatasetBundle& bundle,
                                const LabelGraph& relation_graph);

GeneratorRun train_generator(const DatasetBundle& bundle, const LabelGraph& relation_graph,
                             Variant variant, const PipelineConfig& config, std::uint64_t seed);

struct AugmentationResult {
  std::size_t chosen_ds = 0;
  std::vector<std::pair<std::size_t, double>> validation_map;  // (|D_s|, val mAP)
  std::vector<std::pair<std::size_t, double>> test_map;        // (|D_s|, test mAP)
  MetricReport augmented;  // test metrics, D_e ∪ D_s at chosen_ds
  MetricReport baseline;   // test metrics, D_e only
};

/// D_e split into train/validation, one synthetic pool of max(grid) items,
/// one downstream fit per grid value, |D_s| chosen by validation target mAP.
AugmentationResult evaluate_augmentation(GeneratorRun& run, const DatasetBundle& bundle,
                                         const PipelineConfig& config, std::uint64_t seed,
                                         const std::vector<std::size_t>& grid);

MetricReport run_ablation(Variant variant, const DatasetBundle& bundle,
                          const LabelGraph& relation_graph, const PipelineConfig& config,
                          std::uint64_t seed);

/// Macro-AUC over S of a per-class logistic probe from the posterior mean of z.
double latent_probe_auc(AddesModel& model, const LabeledSet& train, const LabeledSet& test,
                        std::uint64_t seed, std::size_t epochs = 200);
/// Macro-AUC over S of the model's own classifier.
double classifier_inexact_auc(AddesModel& model, const LabeledSet& test, const LabelSpace& space);

struct SweepSpec {
  std::string variable;  // size_of_Ds | size_of_Dl | alpha | beta
  std::vector<double> grid;
  std::vector<std::uint64_t> seeds{1};

  static SweepSpec defaults_for(const std::string& variable);
  void validate() const;
};

struct SweepRow {
  std::string variant;
  std::string variable;
  double value = 0;
  std::uint64_t seed = 0;
  MetricReport report;
};

/// One pipeline run per (grid value, seed); rows ordered by value, then seed.
std::vector<SweepRow> run_sweep(const SweepSpec& spec, const PlantedConfig& data,
                                const PipelineConfig& config);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);
/// "<value> <mean mAP over seeds>" per line, one line per grid value.
void write_plot_data(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

}  // namespace addes

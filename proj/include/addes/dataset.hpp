#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "addes/label_graph.hpp"
#include "addes/rng.hpp"

namespace addes {

struct Instance {
  std::vector<double> x;
  std::optional<LabelVector> y_s;
  std::optional<LabelVector> y_t;

  bool operator==(const Instance&) const = default;
};

/// "If parent is on, switch child on with probability `prob`", applied in
/// declaration order after the independent base draws.
struct LabelDependency {
  std::size_t parent = 0;
  std::size_t child = 0;
  double prob = 0.0;
};

struct PlantedConfig {
  std::size_t num_inexact = 8;
  std::size_t num_target = 2;
  std::size_t dim = 32;
  std::size_t n_labeled = 500;
  std::size_t n_unlabeled = 3000;
  std::size_t n_test = 2000;
  double noise_scale = 0.5;
  std::vector<double> base_rates;  // per inexact class; defaults when empty
  std::vector<LabelDependency> dependencies;
  /// For each target class, the inexact classes whose OR defines it.
  std::vector<std::vector<std::size_t>> target_parents;
  double flip_rate = 0.1;
  std::uint64_t seed = 1;

  /// The reference configuration with base rates, dependencies and target
  /// parents filled in.
  static PlantedConfig reference();
  void fill_defaults();
  void validate() const;
  std::vector<std::string> inexact_names() const;
  std::vector<std::string> target_names() const;
};

/// Exact label joint over W plus class prototypes. x = sum_i y_i mu_i + noise.
struct PlantedModel {
  PlantedConfig config;
  Tensor prototypes;          // |W| x d
  std::vector<double> joint;  // 2^|W| probabilities, bit i = class i of W

  double marginal(std::size_t i) const;
  double pair_marginal(std::size_t i, std::size_t j) const;
  /// P(l_i | l_j) under the joint.
  double conditional(std::size_t i, std::size_t j) const;
};

PlantedModel build_planted_model(const PlantedConfig& config);

struct DatasetBundle {
  LabelSpace space;
  RelatedClassSets relations;
  std::vector<Instance> d_l;   // x, y_s
  std::vector<Instance> d_u;   // x
  std::vector<Instance> d_e;   // x, y_s, estimated y_t
  std::vector<Instance> test;  // x, y_s, y_t
  /// Ground-truth y_t of D_l, withheld from training; only the weighted-graph
  /// ablation reads it.
  std::vector<LabelVector> d_l_hidden_targets;
  std::optional<PlantedModel> planted;

  std::size_t dim() const;
};

struct PlantedDraw {
  DatasetBundle bundle;
  LabelGraph graph;  // conditional adjacency from D_l plus the true target links
};

PlantedDraw generate_planted(const PlantedConfig& config);

/// Sample `n` full label vectors over W from the planted joint.
std::vector<LabelVector> sample_planted_labels(const PlantedModel& model, std::size_t n, Rng& rng);

/// The reference relation graph for a bundle: counts over D_l, conditional
/// adjacency, and the declared target links.
LabelGraph build_relation_graph(const DatasetBundle& bundle,
                                std::optional<double> threshold = std::nullopt);

std::vector<Instance> build_estimated_labeled(const std::vector<Instance>& d_l,
                                              const LabelGraph& graph);

/// Last ceil(fraction * n) items form the validation part.
struct Split {
  std::vector<Instance> train;
  std::vector<Instance> validation;
};
Split split_tail(const std::vector<Instance>& items, double fraction);

std::string instance_to_json(const Instance& inst);
Instance instance_from_json(const std::string& line);

void save_instances(const std::vector<Instance>& items, const std::filesystem::path& path);
std::vector<Instance> load_instances(const std::filesystem::path& path);

/// Directory layout: dl.jsonl, du.jsonl, de.jsonl, test.jsonl, meta.json.
void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);
DatasetBundle load_bundle(const std::filesystem::path& dir);

std::vector<LabelVector> y_s_of(const std::vector<Instance>& items);
Tensor x_of(const std::vector<Instance>& items);

}  // namespace addes

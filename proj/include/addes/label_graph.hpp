#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "addes/tensor.hpp"

namespace addes {

using LabelVector = std::vector<std::uint8_t>;

/// Inexact-supervision classes S followed by target classes T. The combined
/// index space W = S ++ T is what the class graph and classifier use.
class LabelSpace {
 public:
  LabelSpace() = default;
  LabelSpace(std::vector<std::string> inexact, std::vector<std::string> target);

  const std::vector<std::string>& inexact_classes() const { return inexact_; }
  const std::vector<std::string>& target_classes() const { return target_; }
  std::size_t num_inexact() const { return inexact_.size(); }
  std::size_t num_target() const { return target_.size(); }
  std::size_t num_classes() const { return inexact_.size() + target_.size(); }

  /// Index in W, throws ContractError on an unknown name.
  std::size_t index_of(const std::string& name) const;
  bool is_inexact(const std::string& name) const;
  bool is_target(const std::string& name) const;
  std::string name_at(std::size_t w) const;

  bool operator==(const LabelSpace& o) const {
    return inexact_ == o.inexact_ && target_ == o.target_;
  }

 private:
  std::vector<std::string> inexact_;
  std::vector<std::string> target_;
  std::map<std::string, std::size_t> index_;
};

struct CooccurrenceCounts {
  // M is |S| x |S| row-major, N has |S| entries.
  std::size_t num_classes = 0;
  std::vector<std::int64_t> pair_counts;
  std::vector<std::int64_t> class_counts;

  std::int64_t pair(std::size_t i, std::size_t j) const { return pair_counts[i * num_classes + j]; }
};

/// target class name -> related inexact class names (R_t).
using RelatedClassSets = std::map<std::string, std::set<std::string>>;

struct LabelGraph {
  LabelSpace space;
  Tensor adjacency;   // |W| x |W|
  Tensor embeddings;  // |W| x m
  bool one_hot_embeddings = true;
  RelatedClassSets relations;

  double edge(std::size_t i, std::size_t j) const { return adjacency(i, j); }
};

CooccurrenceCounts count_cooccurrence(const std::vector<LabelVector>& labels,
                                      const LabelSpace& space);

/// |S| x |S| block with entries M_ij / N_j (0 when N_j == 0). With a
/// threshold, entries >= threshold become 1 and the rest 0.
Tensor conditional_adjacency(const CooccurrenceCounts& counts,
                             std::optional<double> threshold = std::nullopt);

/// Embed the S x S block in a |W| x |W| adjacency and add binary, symmetric
/// target links from `relations`. Embeddings default to one-hot.
LabelGraph link_targets(const Tensor& inexact_block, const LabelSpace& space,
                        const RelatedClassSets& relations);

/// y_t(i) = 1 iff some j with y_s(j) = 1 has A[t_i, s_j] == 1.
LabelVector estimate_target_prior(const LabelVector& y_s, const LabelGraph& graph);

/// D^-1 (A + I), D the diagonal of row sums of A + I.
Tensor normalize_adjacency(const Tensor& adjacency);

/// Conditional-probability adjacency over the whole class set, computed from
/// ground-truth (y_s, y_t) pairs. Target rows and columns carry co-occurrence
/// weights instead of binary links.
LabelGraph weighted_full_graph(const std::vector<std::pair<LabelVector, LabelVector>>& labels,
                               const LabelSpace& space);

/// Same graph with the adjacency zeroed (no message passing between classes).
LabelGraph edgeless(const LabelGraph& graph);

/// Permute a graph into the class order of `space` (names must match as sets).
LabelGraph reorder(const LabelGraph& graph, const LabelSpace& space);

void save_graph(const LabelGraph& graph, const std::filesystem::path& path);
LabelGraph load_graph(const std::filesystem::path& path);
std::string graph_to_json(const LabelGraph& graph);
LabelGraph graph_from_json(const std::string& text);

RelatedClassSets load_relations(const std::filesystem::path& path);
void validate_relations(const RelatedClassSets& relations, const LabelSpace& space);

}  // namespace addes

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "addes/label_graph.hpp"

namespace addes {

/// Mean of precision@k over the ranks k of the positives, scores sorted
/// descending (ties keep input order). Throws ContractError without positives.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// P(score of a random positive > score of a random negative), ties count 1/2.
/// Throws ContractError unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct MetricReport {
  std::vector<std::string> classes;  // reported classes, in column order
  std::map<std::string, double> per_class_ap;
  std::map<std::string, double> per_class_auc;
  double map = 0;
  double auc = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  /// Classes left out of the macro averages, with the reason.
  std::vector<std::string> warnings;
};

/// Per-class AP/AUC of `scores` (n x k) against `labels` (n rows of k bits)
/// and their unweighted means. Classes with a single label value are skipped
/// from the means and noted in `warnings`.
MetricReport score_classes(const std::vector<std::vector<double>>& scores,
                           const std::vector<LabelVector>& labels,
                           const std::vector<std::string>& class_names);

}  // namespace addes

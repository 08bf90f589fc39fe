#include "addes/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace addes {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw DimensionError(std::string(what) + ": scores and labels differ in length");
}

}  // namespace

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_lengths(scores.size(), labels.size(), "average_precision");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (!labels[order[k]]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  if (hits == 0) throw ContractError("average_precision: no positive labels");
  return sum / static_cast<double>(hits);
}

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_lengths(scores.size(), labels.size(), "roc_auc");
  // Rank-sum form: midranks over tied groups give the 1/2 tie convention.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j + 1);  // 1-based ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) {
        pos_rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ContractError("roc_auc: needs both positive and negative labels");
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (pos_rank_sum - np * (np + 1) / 2) / (np * nn);
}

MetricReport score_classes(const std::vector<std::vector<double>>& scores,
                           const std::vector<LabelVector>& labels,
                           const std::vector<std::string>& class_names) {
  check_lengths(scores.size(), labels.size(), "score_classes");
  const std::size_t k = class_names.size();
  MetricReport r;
  r.classes = class_names;
  double ap_sum = 0, auc_sum = 0;
  std::size_t ap_n = 0, auc_n = 0;
  std::vector<double> col(scores.size());
  std::vector<std::uint8_t> lab(scores.size());
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i].size() != k || labels[i].size() != k) {
        throw DimensionError("score_classes: row " + std::to_string(i) + " has the wrong width");
      }
      col[i] = scores[i][c];
      lab[i] = labels[i][c];
      pos += lab[i];
    }
    const std::string& name = class_names[c];
    if (pos == 0) {
      r.warnings.push_back(name + ": no positives, skipped");
      continue;
    }
    r.per_class_ap[name] = average_precision(col, lab);
    ap_sum += r.per_class_ap[name];
    ++ap_n;
    if (pos == scores.size()) {
      r.warnings.push_back(name + ": no negatives, AUC skipped");
      continue;
    }
    r.per_class_auc[name] = roc_auc(col, lab);
    auc_sum += r.per_class_auc[name];
    ++auc_n;
  }
  r.map = ap_n ? ap_sum / static_cast<double>(ap_n) : 0.0;
  r.auc = auc_n ? auc_sum / static_cast<double>(auc_n) : 0.0;
  return r;
}

}  // namespace addes

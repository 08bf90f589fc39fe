#include <gtest/gtest.h>

#include "addes/metrics.hpp"
#include "addes/rng.hpp"

using namespace addes;

namespace {

using Labels = std::vector<std::uint8_t>;

// Precision at each positive's rank, rank by strictly higher score or equal
// score earlier in the input.
double brute_ap(const std::vector<double>& s, const Labels& y) {
  double total = 0;
  int positives = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    ++positives;
    int rank = 1, hits = 1;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j == i) continue;
      if (s[j] > s[i] || (s[j] == s[i] && j < i)) {
        ++rank;
        hits += y[j];
      }
    }
    total += double(hits) / rank;
  }
  return total / positives;
}

double brute_auc(const std::vector<double>& s, const Labels& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] && !y[j]) {
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

}  // namespace

TEST(AveragePrecision, PositivesOnTopScoreOne) {
  std::vector<double> s{0.9, 0.8, 0.3, 0.1};
  Labels y{1, 1, 0, 0};
  EXPECT_EQ(average_precision(s, y), 1.0);
}

TEST(AveragePrecision, SinglePositiveAtRankTwo) {
  std::vector<double> s{0.9, 0.8, 0.7};
  Labels y{0, 1, 0};
  EXPECT_EQ(average_precision(s, y), 0.5);
}

TEST(AveragePrecision, NoPositivesIsContractError) {
  std::vector<double> s{0.9, 0.8};
  Labels y{0, 0};
  EXPECT_THROW(average_precision(s, y), ContractError);
}

TEST(AveragePrecision, LengthMismatchIsDimensionError) {
  std::vector<double> s{0.9, 0.8};
  Labels y{0};
  EXPECT_THROW(average_precision(s, y), DimensionError);
}

TEST(RocAuc, PerfectSeparationAndAllTies) {
  std::vector<double> s{0.9, 0.8, 0.3, 0.1};
  Labels y{1, 1, 0, 0};
  EXPECT_EQ(roc_auc(s, y), 1.0);
  std::vector<double> flat(4, 0.4);
  EXPECT_EQ(roc_auc(flat, y), 0.5);
}

TEST(RocAuc, SingleClassIsContractError) {
  std::vector<double> s{0.9, 0.8};
  Labels y{1, 1};
  EXPECT_THROW(roc_auc(s, y), ContractError);
}

TEST(Metrics, MatchBruteForceOnRandomCases) {
  Rng rng(31);
  int checked = 0;
  while (checked < 100) {
    const std::size_t n = 2 + rng.index(19);
    std::vector<double> s(n);
    Labels y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = double(rng.index(6)) / 5.0;  // coarse grid forces ties
      y[i] = rng.bernoulli(0.4);
    }
    const std::size_t pos = std::count(y.begin(), y.end(), 1);
    if (pos == 0 || pos == n) continue;
    EXPECT_NEAR(average_precision(s, y), brute_ap(s, y), 1e-12);
    EXPECT_NEAR(roc_auc(s, y), brute_auc(s, y), 1e-12);
    ++checked;
  }
}

TEST(ScoreClasses, SkipsSingleValuedClassesWithWarning) {
  std::vector<std::vector<double>> scores{{0.9, 0.2}, {0.1, 0.3}, {0.8, 0.1}};
  std::vector<LabelVector> labels{{1, 0}, {0, 0}, {1, 0}};
  const MetricReport r = score_classes(scores, labels, {"a", "b"});
  EXPECT_EQ(r.per_class_ap.count("b"), 0u);
  EXPECT_EQ(r.per_class_auc.count("b"), 0u);
  EXPECT_EQ(r.map, 1.0);
  EXPECT_EQ(r.auc, 1.0);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("b"), std::string::npos);
}

TEST(ScoreClasses, MacroAveragesAreUnweighted) {
  std::vector<std::vector<double>> scores{{0.9, 0.9}, {0.8, 0.8}, {0.7, 0.7}};
  std::vector<LabelVector> labels{{1, 0}, {0, 1}, {0, 0}};
  const MetricReport r = score_classes(scores, labels, {"a", "b"});
  EXPECT_DOUBLE_EQ(r.per_class_ap.at("a"), 1.0);
  EXPECT_DOUBLE_EQ(r.per_class_ap.at("b"), 0.5);
  EXPECT_DOUBLE_EQ(r.map, 0.75);
}

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "addes/tensor.hpp"

namespace addes {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

/// Derive an independent stream seed from a root seed and a stream name
/// ("data", "init", "training", "generation", ...).
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  static Rng stream(std::uint64_t root, std::string_view name) {
    return Rng(derive_seed(root, name));
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  Tensor normal_tensor(std::size_t rows, std::size_t cols);
  /// n indices drawn from [0, pool): without replacement when pool >= n,
  /// with replacement otherwise.
  std::vector<std::size_t> sample_indices(std::size_t pool, std::size_t n);
  std::vector<std::size_t> permutation(std::size_t n);

  std::string save_state() const;
  void load_state(const std::string& state);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace addes

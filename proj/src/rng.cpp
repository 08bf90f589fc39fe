#include "addes/rng.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace addes {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) {
  // splitmix64 finalizer over the mixed root and stream hash
  std::uint64_t z = root ^ fnv1a64(stream);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw ContractError("Rng::index on empty range");
  std::uniform_int_distribution<std::size_t> d(0, n - 1);
  return d(engine_);
}

Tensor Rng::normal_tensor(std::size_t rows, std::size_t cols) {
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = normal();
  return t;
}

std::vector<std::size_t> Rng::sample_indices(std::size_t pool, std::size_t n) {
  if (pool == 0) throw ContractError("sample_indices: empty pool");
  std::vector<std::size_t> out;
  out.reserve(n);
  if (pool >= n) {
    // partial Fisher-Yates
    std::vector<std::size_t> idx(pool);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = i + index(pool - i);
      std::swap(idx[i], idx[j]);
      out.push_back(idx[i]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) out.push_back(index(pool));
  }
  return out;
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[index(i)]);
  return idx;
}

std::string Rng::save_state() const {
  std::ostringstream os;
  os << engine_ << ' ' << normal_;
  return os.str();
}

void Rng::load_state(const std::string& state) {
  std::istringstream is(state);
  is >> engine_ >> normal_;
  if (!is) throw ParseError("corrupt RNG state");
}

}  // namespace addes

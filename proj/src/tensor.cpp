#include "addes/tensor.hpp"

#include <functional>
#include <numeric>
#include <sstream>

namespace addes {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  std::size_t n = 1;
  for (auto d : shape_) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_string(shape_));
    n *= d;
  }
  if (shape_.empty()) throw DimensionError("tensor shape must be non-empty");
  if (n != values_.size()) {
    throw DimensionError("tensor shape " + shape_string(shape_) + " needs " + std::to_string(n) +
                         " values, got " + std::to_string(values_.size()));
  }
}

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : Tensor(Shape{rows, cols}, std::vector<double>(rows * cols, fill)) {}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty() || rows.front().empty()) throw DimensionError("from_rows: empty input");
  const std::size_t c = rows.front().size();
  std::vector<double> v;
  v.reserve(rows.size() * c);
  for (const auto& r : rows) {
    if (r.size() != c) throw DimensionError("from_rows: ragged rows");
    v.insert(v.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), c}, std::move(v));
}

Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::scalar(double v) { return Tensor({1, 1}, {v}); }

std::size_t Tensor::rows() const {
  if (shape_.empty()) return 0;
  if (shape_.size() == 1) return 1;
  std::size_t r = 1;
  for (std::size_t i = 0; i + 1 < shape_.size(); ++i) r *= shape_[i];
  return r;
}

std::size_t Tensor::cols() const { return shape_.empty() ? 0 : shape_.back(); }

double Tensor::item() const {
  if (values_.size() != 1) {
    throw ContractError("item() on non-scalar tensor " + shape_string(shape_));
  }
  return values_[0];
}

void Tensor::accumulate_grad(std::span<const double> g) {
  if (g.size() != values_.size()) throw DimensionError("gradient length mismatch");
  if (!grad) grad.emplace(values_.size(), 0.0);
  auto& dst = *grad;
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

std::size_t ParamStore::add(std::string name, Tensor value) {
  if (index_.count(name)) throw ContractError("duplicate parameter name: " + name);
  value.requires_grad = true;
  const std::size_t i = params_.size();
  index_.emplace(name, i);
  params_.push_back(Parameter{std::move(name), std::move(value)});
  return i;
}

std::size_t ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

std::vector<std::size_t> ParamStore::with_prefix(const std::string& prefix) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name.compare(0, prefix.size(), prefix) == 0) out.push_back(i);
  }
  return out;
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (size() != other.size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (params_[i].name != other.params_[i].name) return false;
    if (!params_[i].tensor.same_values(other.params_[i].tensor)) return false;
  }
  return true;
}

}  // namespace addes

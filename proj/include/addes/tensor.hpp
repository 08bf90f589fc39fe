#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace addes {

// Error taxonomy shared by every module. The CLI maps ConfigError to exit
// code 2 and everything else to 3.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. Rank-1 tensors behave as 1 x d rows in
/// matrix operations.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);

  static Tensor from_rows(const std::vector<std::vector<double>>& rows);
  static Tensor row(std::vector<double> values);
  static Tensor scalar(double v);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<const double> row_span(std::size_t r) const {
    return {values_.data() + r * cols(), cols()};
  }

  double item() const;

  bool requires_grad = false;
  std::optional<std::vector<double>> grad;

  void zero_grad() { grad.reset(); }
  void accumulate_grad(std::span<const double> g);

  bool same_values(const Tensor& other) const {
    return shape_ == other.shape_ && values_ == other.values_;
  }

 private:
  Shape shape_;
  std::vector<double> values_;
};

struct Parameter {
  std::string name;  // module/layer/slot
  Tensor tensor;
};

/// Ordered, name-unique collection of parameters. Index handles stay valid
/// for the lifetime of the store, so model descriptors hold indices rather
/// than pointers and remain cheap to copy.
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor value);
  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  Parameter& at(const std::string& name) { return params_[index_of(name)]; }
  const Parameter& at(const std::string& name) const { return params_[index_of(name)]; }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  std::vector<std::size_t> with_prefix(const std::string& prefix) const;
  bool same_values(const ParamStore& other) const;

 private:
  std::deque<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace addes

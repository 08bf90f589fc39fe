#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "addes/autograd.hpp"
#include "addes/rng.hpp"

namespace addes {

enum class Activation { kTanh, kLeakyRelu };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);
Var activate(Var x, Activation a);

inline constexpr double kLeakySlope = 0.2;

struct Dense {
  std::size_t weight = 0;  // in x out
  std::size_t bias = 0;    // 1 x out
  std::size_t in = 0, out = 0;
};

/// Glorot-uniform weight in x out registered under `name`.
std::size_t add_weight(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                       Rng& rng);

Dense add_dense(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                Rng& rng);

Var dense_forward(Tape& tape, ParamStore& store, const Dense& layer, Var x, bool track);

/// Multilayer perceptron: nonlinearity after every layer except the last.
struct Mlp {
  std::vector<Dense> layers;
  Activation activation = Activation::kTanh;

  static Mlp create(ParamStore& store, const std::string& prefix, std::size_t in,
                    const std::vector<std::size_t>& hidden, std::size_t out, Activation act,
                    Rng& rng);

  std::size_t in_dim() const { return layers.front().in; }
  std::size_t out_dim() const { return layers.back().out; }

  /// Output of the last hidden layer (or the input when there is none).
  Var trunk(Tape& tape, ParamStore& store, Var x, bool track) const;
  Var forward(Tape& tape, ParamStore& store, Var x, bool track) const;
};

enum class OptimizerKind { kSgd, kAdam };

OptimizerKind optimizer_from_string(const std::string& s);
std::string to_string(OptimizerKind k);

/// Per-parameter first-order optimizer. Only parameters whose gradient is
/// present are updated, so frozen groups stay byte-identical.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {}

  void step(ParamStore& store);

  struct Moments {
    std::vector<double> m, v;
    std::int64_t t = 0;
  };
  const std::map<std::string, Moments>& state() const { return state_; }
  std::map<std::string, Moments>& state() { return state_; }
  OptimizerKind kind() const { return kind_; }
  double lr() const { return lr_; }

 private:
  OptimizerKind kind_ = OptimizerKind::kAdam;
  double lr_ = 1e-3;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::map<std::string, Moments> state_;
};

}  // namespace addes

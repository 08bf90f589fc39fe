#include "addes/nn.hpp"

#include <cmath>

namespace addes {

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "leaky_relu") return Activation::kLeakyRelu;
  throw ConfigError("unknown activation: " + s);
}

std::string to_string(Activation a) { return a == Activation::kTanh ? "tanh" : "leaky_relu"; }

Var activate(Var x, Activation a) {
  return a == Activation::kTanh ? tanh(x) : leaky_relu(x, kLeakySlope);
}

std::size_t add_weight(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                       Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  Tensor w(in, out);
  for (auto& v : w.values()) v = (2.0 * rng.uniform() - 1.0) * limit;
  return store.add(name, std::move(w));
}

Dense add_dense(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                Rng& rng) {
  Dense d;
  d.in = in;
  d.out = out;
  d.weight = add_weight(store, prefix + "/weight", in, out, rng);
  d.bias = store.add(prefix + "/bias", Tensor(1, out));
  return d;
}

Var dense_forward(Tape& tape, ParamStore& store, const Dense& layer, Var x, bool track) {
  if (x.cols() != layer.in) {
    throw DimensionError("dense layer expects " + std::to_string(layer.in) + " inputs, got " +
                         shape_string(x.value().shape()));
  }
  Var w = tape.param(store[layer.weight], track);
  Var b = tape.param(store[layer.bias], track);
  return add_row(matmul(x, w), b);
}

Mlp Mlp::create(ParamStore& store, const std::string& prefix, std::size_t in,
                const std::vector<std::size_t>& hidden, std::size_t out, Activation act, Rng& rng) {
  Mlp m;
  m.activation = act;
  std::size_t prev = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    m.layers.push_back(add_dense(store, prefix + "/layer" + std::to_string(i), prev, hidden[i], rng));
    prev = hidden[i];
  }
  m.layers.push_back(add_dense(store, prefix + "/layer" + std::to_string(hidden.size()), prev, out, rng));
  return m;
}

Var Mlp::trunk(Tape& tape, ParamStore& store, Var x, bool track) const {
  Var h = x;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    h = activate(dense_forward(tape, store, layers[i], h, track), activation);
  }
  return h;
}

Var Mlp::forward(Tape& tape, ParamStore& store, Var x, bool track) const {
  return dense_forward(tape, store, layers.back(), trunk(tape, store, x, track), track);
}

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam" || s == "adaptive-moment") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer: " + s);
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

void Optimizer::step(ParamStore& store) {
  for (auto& p : store) {
    if (!p.tensor.grad) continue;
    auto& values = p.tensor.values();
    const auto& g = *p.tensor.grad;
    if (kind_ == OptimizerKind::kSgd) {
      for (std::size_t i = 0; i < values.size(); ++i) values[i] -= lr_ * g[i];
      continue;
    }
    auto& st = state_[p.name];
    if (st.m.empty()) {
      st.m.assign(values.size(), 0.0);
      st.v.assign(values.size(), 0.0);
    }
    ++st.t;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(st.t));
    for (std::size_t i = 0; i < values.size(); ++i) {
      st.m[i] = beta1_ * st.m[i] + (1 - beta1_) * g[i];
      st.v[i] = beta2_ * st.v[i] + (1 - beta2_) * g[i] * g[i];
      values[i] -= lr_ * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + eps_);
    }
  }
}

}  // namespace addes

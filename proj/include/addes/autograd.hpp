#pragma once

#include <functional>
#include <string>
#include <vector>

#include "addes/tensor.hpp"

namespace addes {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while its tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const { return tape != nullptr && id >= 0; }
};

struct Record {
  std::string op;
  std::vector<int> inputs;
  int output = -1;
};

/// Define-by-run computation record. Nodes are appended in evaluation order,
/// which is a topological order by construction. backward() never consumes the
/// tape: calling it twice accumulates twice into leaf gradients.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to an external tensor; gradients accumulate into `t.grad` when
  /// `t.requires_grad` is set.
  Var leaf(Tensor& t);
  /// Leaf bound to a parameter. With `track == false` the parameter enters the
  /// graph as a constant and receives no gradient.
  Var param(Parameter& p, bool track = true);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  /// Adjoint of a node from the most recent backward pass (empty if none).
  const std::vector<double>& adjoint(Var v) const { return nodes_[v.id].adj; }

  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  std::vector<Record> records() const;

  // Op construction API used by the op library.
  Var push(std::string op, std::vector<int> inputs, Tensor value, BackwardFn fn);
  std::vector<double>& adj(int id);
  const Tensor& val(int id) const { return nodes_[id].value; }

 private:
  struct Node {
    std::string op;
    std::vector<int> inputs;
    Tensor value;
    std::vector<double> adj;
    BackwardFn backward;
    Tensor* sink = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

// Elementwise and structural ops. Shapes are 2-D (rank-1 treated as a row).
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_row(Var a, Var row);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var sigmoid(Var a);
Var tanh(Var a);
Var leaky_relu(Var a, double slope);
Var exp(Var a);
Var log(Var a);
Var clamp(Var a, double lo, double hi);
Var concat_cols(const std::vector<Var>& parts);
/// Stack rows of `top` above rows of `bottom` (equal column counts).
Var concat_rows(Var top, Var bottom);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var select_rows(Var a, const std::vector<std::size_t>& rows);
Var detach(Var a);
/// Sum over all elements, 1x1.
Var sum(Var a);
/// Mean over all elements, 1x1.
Var mean(Var a);
/// Per-row sum, B x 1.
Var sum_cols(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

}  // namespace addes

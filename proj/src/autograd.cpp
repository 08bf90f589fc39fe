#include "addes/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace addes {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

ConstMatMap as_mat(const Tensor& t) {
  return ConstMatMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}

ConstMatMap as_mat(const std::vector<double>& v, std::size_t r, std::size_t c) {
  return ConstMatMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

MatMap as_mut(std::vector<double>& v, std::size_t r, std::size_t c) {
  return MatMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw ContractError("operation on an unbound Var");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw ContractError("operands live on different tapes");
  return tape_of(a);
}

Shape shape2(std::size_t r, std::size_t c) { return Shape{r, c}; }

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

// Unary elementwise op with derivative expressed through input x and output y.
template <class Fwd, class Deriv>
Var unary(const char* name, Var a, Fwd fwd, Deriv deriv) {
  Tape& t = tape_of(a);
  const Tensor& x = t.val(a.id);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
  const int ia = a.id;
  return t.push(name, {ia}, Tensor(shape2(x.rows(), x.cols()), std::move(out)),
                [ia, deriv](Tape& tp, int self) {
                  if (!tp.needs_grad(ia)) return;
                  const auto& g = tp.adj(self);
                  const Tensor& xv = tp.val(ia);
                  const Tensor& yv = tp.val(self);
                  auto& ga = tp.adj(ia);
                  for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(xv[i], yv[i]);
                });
}

}  // namespace

const Tensor& Var::value() const {
  if (!valid()) throw ContractError("value() on an unbound Var");
  return tape->value(*this);
}

Var Tape::push(std::string op, std::vector<int> inputs, Tensor value, BackwardFn fn) {
  Node n;
  n.op = std::move(op);
  n.value = std::move(value);
  for (int i : inputs) n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
  n.inputs = std::move(inputs);
  if (n.needs_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Tensor value) { return push("constant", {}, std::move(value), nullptr); }

Var Tape::leaf(Tensor& t) {
  Tensor copy(t.shape(), t.values());
  Var v = push("leaf", {}, std::move(copy), nullptr);
  Node& n = nodes_[v.id];
  if (t.requires_grad) {
    n.needs_grad = true;
    n.sink = &t;
  }
  return v;
}

Var Tape::param(Parameter& p, bool track) {
  if (!track) return push("param_const", {}, Tensor(p.tensor.shape(), p.tensor.values()), nullptr);
  Var v = leaf(p.tensor);
  nodes_[v.id].op = "param:" + p.name;
  return v;
}

std::vector<double>& Tape::adj(int id) {
  Node& n = nodes_[id];
  if (n.adj.size() != n.value.size()) n.adj.assign(n.value.size(), 0.0);
  return n.adj;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ContractError("backward: loss belongs to another tape");
  if (nodes_[loss.id].value.size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        shape_string(nodes_[loss.id].value.shape()));
  }
  for (auto& n : nodes_) n.adj.clear();
  adj(loss.id)[0] = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.adj.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.sink) n.sink->accumulate_grad(n.adj);
  }
}

std::vector<Record> Tape::records() const {
  std::vector<Record> out;
  out.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    out.push_back(Record{nodes_[i].op, nodes_[i].inputs, static_cast<int>(i)});
  }
  return out;
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& av = t.val(a.id);
  const Tensor& bv = t.val(b.id);
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_string(av.shape()) +
                         " x " + shape_string(bv.shape()));
  }
  const std::size_t p = av.rows(), r = bv.cols();
  std::vector<double> out(p * r);
  as_mut(out, p, r).noalias() = as_mat(av) * as_mat(bv);
  const int ia = a.id, ib = b.id;
  return t.push("matmul", {ia, ib}, Tensor(shape2(p, r), std::move(out)),
                [ia, ib, p, r](Tape& tp, int self) {
                  auto g = as_mat(tp.adj(self), p, r);
                  const Tensor& A = tp.val(ia);
                  const Tensor& B = tp.val(ib);
                  if (tp.needs_grad(ia)) {
                    as_mut(tp.adj(ia), A.rows(), A.cols()).noalias() += g * as_mat(B).transpose();
                  }
                  if (tp.needs_grad(ib)) {
                    as_mut(tp.adj(ib), B.rows(), B.cols()).noalias() += as_mat(A).transpose() * g;
                  }
                });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const Tensor& av = t.val(a.id);
  const std::size_t r = av.rows(), c = av.cols();
  std::vector<double> out(r * c);
  as_mut(out, c, r) = as_mat(av).transpose();
  const int ia = a.id;
  return t.push("transpose", {ia}, Tensor(shape2(c, r), std::move(out)),
                [ia, r, c](Tape& tp, int self) {
                  if (!tp.needs_grad(ia)) return;
                  as_mut(tp.adj(ia), r, c) += as_mat(tp.adj(self), c, r).transpose();
                });
}

namespace {

template <class Combine, class DA, class DB>
Var binary(const char* name, Var a, Var b, Combine f, DA da, DB db) {
  Tape& t = tape_of(a, b);
  const Tensor& av = t.val(a.id);
  const Tensor& bv = t.val(b.id);
  require_same_shape(name, av, bv);
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[i]);
  const int ia = a.id, ib = b.id;
  return t.push(name, {ia, ib}, Tensor(shape2(av.rows(), av.cols()), std::move(out)),
                [ia, ib, da, db](Tape& tp, int self) {
                  const auto& g = tp.adj(self);
                  const Tensor& x = tp.val(ia);
                  const Tensor& y = tp.val(ib);
                  if (tp.needs_grad(ia)) {
                    auto& gx = tp.adj(ia);
                    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * da(x[i], y[i]);
                  }
                  if (tp.needs_grad(ib)) {
                    auto& gy = tp.adj(ib);
                    for (std::size_t i = 0; i < g.size(); ++i) gy[i] += g[i] * db(x[i], y[i]);
                  }
                });
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var add_row(Var a, Var row) {
  Tape& t = tape_of(a, row);
  const Tensor& av = t.val(a.id);
  const Tensor& rv = t.val(row.id);
  if (rv.size() != av.cols()) {
    throw DimensionError("add_row: row " + shape_string(rv.shape()) + " does not broadcast over " +
                         shape_string(av.shape()));
  }
  const std::size_t r = av.rows(), c = av.cols();
  std::vector<double> out(av.values());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += rv[j];
  const int ia = a.id, ib = row.id;
  return t.push("add_row", {ia, ib}, Tensor(shape2(r, c), std::move(out)),
                [ia, ib, r, c](Tape& tp, int self) {
                  const auto& g = tp.adj(self);
                  if (tp.needs_grad(ia)) {
                    auto& ga = tp.adj(ia);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                  }
                  if (tp.needs_grad(ib)) {
                    auto& gb = tp.adj(ib);
                    for (std::size_t i = 0; i < r; ++i)
                      for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
                  }
                });
}

Var scale(Var a, double s) {
  return unary(
      "scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(
      "add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var sigmoid(Var a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var leaky_relu(Var a, double slope) {
  return unary(
      "leaky_relu", a, [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Var exp(Var a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  Tape& t = tape_of(a);
  for (double x : t.val(a.id).values()) {
    if (!(x > 0)) throw DomainError("log of non-positive value");
  }
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var clamp(Var a, double lo, double hi) {
  return unary(
      "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  Tape& t = tape_of(parts.front());
  const std::size_t r = t.val(parts.front().id).rows();
  std::vector<int> ids;
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Var p : parts) {
    tape_of(p, parts.front());
    const Tensor& v = t.val(p.id);
    if (v.rows() != r) {
      throw DimensionError("concat_cols: row mismatch " + shape_string(v.shape()) + " vs " +
                           std::to_string(r) + " rows");
    }
    ids.push_back(p.id);
    widths.push_back(v.cols());
    total += v.cols();
  }
  std::vector<double> out(r * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const Tensor& v = t.val(ids[k]);
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(v.data() + i * widths[k], widths[k], out.data() + i * total + off);
    off += widths[k];
  }
  return t.push("concat_cols", ids, Tensor(shape2(r, total), std::move(out)),
                [ids, widths, r, total](Tape& tp, int self) {
                  const auto& g = tp.adj(self);
                  std::size_t o = 0;
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    if (tp.needs_grad(ids[k])) {
                      auto& gk = tp.adj(ids[k]);
                      for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < widths[k]; ++j)
                          gk[i * widths[k] + j] += g[i * total + o + j];
                    }
                    o += widths[k];
                  }
                });
}

Var concat_rows(Var top, Var bottom) {
  Tape& t = tape_of(top, bottom);
  const Tensor& a = t.val(top.id);
  const Tensor& b = t.val(bottom.id);
  if (a.cols() != b.cols()) {
    throw DimensionError("concat_rows: column mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  std::vector<double> out(a.values());
  out.insert(out.end(), b.values().begin(), b.values().end());
  const std::size_t na = a.size();
  const int ia = top.id, ib = bottom.id;
  return t.push("concat_rows", {ia, ib}, Tensor(shape2(a.rows() + b.rows(), a.cols()), std::move(out)),
                [ia, ib, na](Tape& tp, int self) {
                  const auto& g = tp.adj(self);
                  if (tp.needs_grad(ia)) {
                    auto& ga = tp.adj(ia);
                    for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
                  }
                  if (tp.needs_grad(ib)) {
                    auto& gb = tp.adj(ib);
                    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
                  }
                });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  Tape& t = tape_of(a);
  const Tensor& av = t.val(a.id);
  if (count == 0 || begin + count > av.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " +
                         shape_string(av.shape()));
  }
  const std::size_t r = av.rows(), c = av.cols();
  std::vector<double> out(r * count);
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(av.data() + i * c + begin, count, out.data() + i * count);
  const int ia = a.id;
  return t.push("slice_cols", {ia}, Tensor(shape2(r, count), std::move(out)),
                [ia, r, c, begin, count](Tape& tp, int self) {
                  if (!tp.needs_grad(ia)) return;
                  const auto& g = tp.adj(self);
                  auto& ga = tp.adj(ia);
                  for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < count; ++j) ga[i * c + begin + j] += g[i * count + j];
                });
}

Var select_rows(Var a, const std::vector<std::size_t>& rows) {
  Tape& t = tape_of(a);
  const Tensor& av = t.val(a.id);
  if (rows.empty()) throw DimensionError("select_rows: empty selection");
  const std::size_t c = av.cols();
  std::vector<double> out(rows.size() * c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.rows()) throw DimensionError("select_rows: index out of range");
    std::copy_n(av.data() + rows[i] * c, c, out.data() + i * c);
  }
  const int ia = a.id;
  return t.push("select_rows", {ia}, Tensor(shape2(rows.size(), c), std::move(out)),
                [ia, rows, c](Tape& tp, int self) {
                  if (!tp.needs_grad(ia)) return;
                  const auto& g = tp.adj(self);
                  auto& ga = tp.adj(ia);
                  for (std::size_t i = 0; i < rows.size(); ++i)
                    for (std::size_t j = 0; j < c; ++j) ga[rows[i] * c + j] += g[i * c + j];
                });
}

Var detach(Var a) {
  Tape& t = tape_of(a);
  return t.constant(t.val(a.id));
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const Tensor& av = t.val(a.id);
  double s = 0;
  for (double x : av.values()) s += x;
  const int ia = a.id;
  return t.push("sum", {ia}, Tensor::scalar(s), [ia](Tape& tp, int self) {
    if (!tp.needs_grad(ia)) return;
    const double g = tp.adj(self)[0];
    for (double& x : tp.adj(ia)) x += g;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var sum_cols(Var a) {
  Tape& t = tape_of(a);
  const Tensor& av = t.val(a.id);
  const std::size_t r = av.rows(), c = av.cols();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i] += av[i * c + j];
  const int ia = a.id;
  return t.push("sum_cols", {ia}, Tensor(shape2(r, 1), std::move(out)),
                [ia, r, c](Tape& tp, int self) {
                  if (!tp.needs_grad(ia)) return;
                  const auto& g = tp.adj(self);
                  auto& ga = tp.adj(ia);
                  for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i];
                });
}

}  // namespace addes

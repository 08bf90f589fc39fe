#include "addes/probability.hpp"

#include <cmath>
#include <numbers>

namespace addes {

namespace {

void check_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

void check_positive(const char* op, const Tensor& sigma) {
  for (double s : sigma.values()) {
    if (!(s > 0)) throw DomainError(std::string(op) + ": sigma must be strictly positive");
  }
}

}  // namespace

Var reparam_sample(Var mu, Var sigma, const Tensor& eps) {
  check_same("reparam_sample", mu.value(), sigma.value());
  check_same("reparam_sample", mu.value(), eps);
  for (double s : sigma.value().values()) {
    if (s < 0) throw DomainError("reparam_sample: sigma must be non-negative");
  }
  Var e = mu.tape->constant(Tensor({mu.rows(), mu.cols()}, eps.values()));
  return add(mu, mul(sigma, e));
}

Var sigma_from_half_log_var(Var half_log_var) {
  return exp(clamp(half_log_var, kHalfLogVarMin, kHalfLogVarMax));
}

Var kl_diag_gaussian_vs_std_normal(Var mu, Var sigma) {
  Tape& t = *mu.tape;
  const Tensor& m = mu.value();
  const Tensor& s = sigma.value();
  check_same("kl_diag_gaussian_vs_std_normal", m, s);
  check_positive("kl_diag_gaussian_vs_std_normal", s);
  const std::size_t r = m.rows(), c = m.cols();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double acc = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const double mv = m[i * c + j], sv = s[i * c + j];
      acc += 1.0 + 2.0 * std::log(sv) - mv * mv - sv * sv;
    }
    out[i] = -0.5 * acc;
  }
  const int im = mu.id, is = sigma.id;
  return t.push("kl_gauss_std", {im, is}, Tensor({r, 1}, std::move(out)),
                [im, is, r, c](Tape& tp, int self) {
                  const auto& g = tp.adj(self);
                  if (tp.needs_grad(im)) {
                    const Tensor& mv = tp.val(im);
                    auto& gm = tp.adj(im);
                    for (std::size_t i = 0; i < r; ++i)
                      for (std::size_t j = 0; j < c; ++j) gm[i * c + j] += g[i] * mv[i * c + j];
                  }
                  if (tp.needs_grad(is)) {
                    const Tensor& sv = tp.val(is);
                    auto& gs = tp.adj(is);
                    for (std::size_t i = 0; i < r; ++i)
                      for (std::size_t j = 0; j < c; ++j) {
                        const double x = sv[i * c + j];
                        gs[i * c + j] += g[i] * (x - 1.0 / x);
                      }
                  }
                });
}

Var kl_bernoulli_vec(Var q, Var p) {
  Tape& t = *q.tape;
  const Tensor& qv = q.value();
  const Tensor& pv = p.value();
  check_same("kl_bernoulli_vec", qv, pv);
  for (std::size_t i = 0; i < qv.size(); ++i) {
    if (!(qv[i] > 0 && qv[i] < 1 && pv[i] > 0 && pv[i] < 1)) {
      throw DomainError(
          "kl_bernoulli_vec: probabilities must lie strictly inside (0,1); clamp before calling");
    }
  }
  const std::size_t r = qv.rows(), c = qv.cols();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double acc = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const double a = qv[i * c + j], b = pv[i * c + j];
      acc += a * std::log(a / b) + (1 - a) * std::log((1 - a) / (1 - b));
    }
    out[i] = acc;
  }
  const int iq = q.id, ip = p.id;
  return t.push("kl_bernoulli", {iq, ip}, Tensor({r, 1}, std::move(out)),
                [iq, ip, r, c](Tape& tp, int self) {
                  const auto& g = tp.adj(self);
                  const Tensor& qv2 = tp.val(iq);
                  const Tensor& pv2 = tp.val(ip);
                  if (tp.needs_grad(iq)) {
                    auto& gq = tp.adj(iq);
                    for (std::size_t i = 0; i < r; ++i)
                      for (std::size_t j = 0; j < c; ++j) {
                        const double a = qv2[i * c + j], b = pv2[i * c + j];
                        gq[i * c + j] += g[i] * (std::log(a / b) - std::log((1 - a) / (1 - b)));
                      }
                  }
                  if (tp.needs_grad(ip)) {
                    auto& gp = tp.adj(ip);
                    for (std::size_t i = 0; i < r; ++i)
                      for (std::size_t j = 0; j < c; ++j) {
                        const double a = qv2[i * c + j], b = pv2[i * c + j];
                        gp[i * c + j] += g[i] * (-a / b + (1 - a) / (1 - b));
                      }
                  }
                });
}

Var gaussian_log_likelihood(Var x, Var mu, Var sigma) {
  Tape& t = *x.tape;
  const Tensor& xv = x.value();
  const Tensor& mv = mu.value();
  const Tensor& sv = sigma.value();
  check_same("gaussian_log_likelihood", xv, mv);
  check_same("gaussian_log_likelihood", xv, sv);
  check_positive("gaussian_log_likelihood", sv);
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const std::size_t r = xv.rows(), c = xv.cols();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double acc = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const std::size_t k = i * c + j;
      const double d = xv[k] - mv[k];
      acc += -half_log_2pi - std::log(sv[k]) - d * d / (2.0 * sv[k] * sv[k]);
    }
    out[i] = acc;
  }
  const int ix = x.id, im = mu.id, is = sigma.id;
  return t.push("gauss_loglik", {ix, im, is}, Tensor({r, 1}, std::move(out)),
                [ix, im, is, r, c](Tape& tp, int self) {
                  const auto& g = tp.adj(self);
                  const Tensor& X = tp.val(ix);
                  const Tensor& M = tp.val(im);
                  const Tensor& S = tp.val(is);
                  const bool gx = tp.needs_grad(ix), gm = tp.needs_grad(im), gs = tp.needs_grad(is);
                  for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) {
                      const std::size_t k = i * c + j;
                      const double d = X[k] - M[k];
                      const double s2 = S[k] * S[k];
                      if (gx) tp.adj(ix)[k] += g[i] * (-d / s2);
                      if (gm) tp.adj(im)[k] += g[i] * (d / s2);
                      if (gs) tp.adj(is)[k] += g[i] * (-1.0 / S[k] + d * d / (s2 * S[k]));
                    }
                });
}

Var binary_cross_entropy(Var prob, Var target) {
  Tape& t = *prob.tape;
  check_same("binary_cross_entropy", prob.value(), target.value());
  Var p = clamp(prob, kProbClamp, 1.0 - kProbClamp);
  const Tensor& pv = p.value();
  const Tensor& yv = target.value();
  const std::size_t r = pv.rows(), c = pv.cols();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double acc = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const std::size_t k = i * c + j;
      acc -= yv[k] * std::log(pv[k]) + (1 - yv[k]) * std::log(1 - pv[k]);
    }
    out[i] = acc;
  }
  const int ip = p.id, iy = target.id;
  return t.push("bce", {ip, iy}, Tensor({r, 1}, std::move(out)), [ip, iy, r, c](Tape& tp, int self) {
    const auto& g = tp.adj(self);
    const Tensor& P = tp.val(ip);
    const Tensor& Y = tp.val(iy);
    if (tp.needs_grad(ip)) {
      auto& gp = tp.adj(ip);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
          const std::size_t k = i * c + j;
          gp[k] += g[i] * (-Y[k] / P[k] + (1 - Y[k]) / (1 - P[k]));
        }
    }
    if (tp.needs_grad(iy)) {
      auto& gy = tp.adj(iy);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
          const std::size_t k = i * c + j;
          gy[k] += g[i] * std::log((1 - P[k]) / P[k]);
        }
    }
  });
}

Var mean_binary_entropy(Var prob) {
  Var p = clamp(prob, kProbClamp, 1.0 - kProbClamp);
  Tape& t = *prob.tape;
  Tensor ones(p.rows(), p.cols(), 1.0);
  Var q = sub(t.constant(std::move(ones)), p);
  Var h = scale(add(mul(p, log(p)), mul(q, log(q))), -1.0);
  return mean(sum_cols(h));
}

}  // namespace addes

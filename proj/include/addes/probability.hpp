#pragma once

#include "addes/autograd.hpp"

namespace addes {

inline constexpr double kHalfLogVarMin = -6.0;
inline constexpr double kHalfLogVarMax = 6.0;
inline constexpr double kProbClamp = 1e-7;

/// z = mu + sigma * eps. `eps` is treated as a constant.
Var reparam_sample(Var mu, Var sigma, const Tensor& eps);

/// sigma = exp(clamp(h, -6, 6)) for a half-log-variance head h.
Var sigma_from_half_log_var(Var half_log_var);

/// Per-row KL[N(mu, diag sigma^2) || N(0, I)], returned as B x 1.
Var kl_diag_gaussian_vs_std_normal(Var mu, Var sigma);

/// Per-row sum of independent Bernoulli KLs KL[q || p], returned as B x 1.
/// Both arguments must lie strictly inside (0, 1).
Var kl_bernoulli_vec(Var q, Var p);

/// Per-row diagonal Gaussian log density of x, returned as B x 1.
Var gaussian_log_likelihood(Var x, Var mu, Var sigma);

/// Per-row multi-label cross-entropy -sum[y log p + (1-y) log(1-p)], B x 1.
/// `prob` is clamped to [1e-7, 1 - 1e-7] before the logarithms; `target` may
/// be soft and receives no gradient.
Var binary_cross_entropy(Var prob, Var target);

/// Mean over rows of binary entropy summed over columns, 1 x 1.
Var mean_binary_entropy(Var prob);

}  // namespace addes

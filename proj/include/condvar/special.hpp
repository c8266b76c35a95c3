#pragma once

#include <limits>

#include "condvar/rng.hpp"

namespace condvar {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

double normal_pdf(double x);
double normal_cdf(double x);

/// Upper tail 1 - Phi(x), accurate far into the right tail.
double normal_sf(double x);

/// log(1 - Phi(x)); finite for every finite x.
double log_normal_sf(double x);

/// log(Phi(b) - Phi(a)) for a < b, infinite limits allowed.
double log_normal_prob(double a, double b);

/// Inverse of Phi (Wichura AS241), p in (0, 1).
double normal_quantile(double p);

/// Standard normal truncated to [l, u] via Botev's mixture of Rayleigh
/// tail rejection, plain rejection and inverse transform.
double truncated_std_normal(double l, double u, Rng& rng);

/// Inverse-CDF draw from the standard normal truncated to [l, u] for the
/// uniform variate `v`, written in survival form on the tail side.
double truncated_std_normal_icdf(double l, double u, double v);

/// Inverse-CDF truncated draw with a Rayleigh fallback once the tail
/// probability underflows.
double truncated_std_normal_gibbs(double l, double u, Rng& rng);

}  // namespace condvar

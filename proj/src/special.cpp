#include "condvar/special.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace condvar {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// Mills ratio (1 - Phi(x)) / phi(x) by backward continued fraction, x >= 5.
double mills_ratio(double x) {
  double t = x;
  for (int k = 80; k >= 1; --k) t = x + k / t;
  return 1.0 / t;
}

double rayleigh_tail(double l, double u, Rng& rng) {
  const double c = 0.5 * l * l;
  const double f = std::expm1(c - 0.5 * u * u);
  for (;;) {
    const double x = c - std::log1p(rng.uniform() * f);
    const double v = rng.uniform();
    if (v * v * x <= c) return std::sqrt(2.0 * x);
  }
}

double central_region(double l, double u, Rng& rng) {
  if (u - l > 2.0) {
    for (;;) {
      const double x = rng.normal();
      if (x >= l && x <= u) return x;
    }
  }
  return truncated_std_normal_icdf(l, u, rng.uniform());
}

}  // namespace

double normal_pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

double log_normal_sf(double x) {
  if (x == kInf) return -kInf;
  if (x < 5.0) return std::log(normal_sf(x));
  return -0.5 * x * x - kLogSqrt2Pi + std::log(mills_ratio(x));
}

double log_normal_prob(double a, double b) {
  if (a > 0.0) {
    const double pa = log_normal_sf(a);
    const double pb = log_normal_sf(b);
    return pa + std::log1p(-std::exp(pb - pa));
  }
  if (b < 0.0) {
    const double pa = log_normal_sf(-a);
    const double pb = log_normal_sf(-b);
    return pb + std::log1p(-std::exp(pa - pb));
  }
  const double lower = normal_sf(-a);
  const double upper = normal_sf(b);
  return std::log1p(-lower - upper);
}

double normal_quantile(double p) {
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val = 0.0;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
              3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
            4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
            2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
            5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

double truncated_std_normal(double l, double u, Rng& rng) {
  constexpr double a = 0.66;
  if (l > a) return rayleigh_tail(l, u, rng);
  if (u < -a) return -rayleigh_tail(-u, -l, rng);
  return central_region(l, u, rng);
}

double truncated_std_normal_icdf(double l, double u, double v) {
  double x = 0.0;
  if (l >= 0.0) {
    const double ql = normal_sf(l);
    const double qu = normal_sf(u);
    x = -normal_quantile(ql - (ql - qu) * v);
  } else if (u <= 0.0) {
    const double pl = normal_sf(-l);  // Phi(l)
    const double pu = normal_sf(-u);  // Phi(u)
    x = normal_quantile(pl + (pu - pl) * v);
  } else {
    const double pl = normal_cdf(l);
    const double pu = normal_cdf(u);
    x = normal_quantile(pl + (pu - pl) * v);
  }
  return std::clamp(x, l, u);
}

double truncated_std_normal_gibbs(double l, double u, Rng& rng) {
  constexpr double kUnderflowGuard = 1e-280;
  if (l > 0.0 && normal_sf(l) < kUnderflowGuard) return std::clamp(rayleigh_tail(l, u, rng), l, u);
  if (u < 0.0 && normal_sf(-u) < kUnderflowGuard) return std::clamp(-rayleigh_tail(-u, -l, rng), l, u);
  return truncated_std_normal_icdf(l, u, rng.uniform());
}

}  // namespace condvar

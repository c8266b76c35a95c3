#pragma once

// Independent dense reference computations and Monte-Carlo comparison helpers
// shared by the unit and acceptance tests. Nothing here calls the banded code.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "condvar/special.hpp"
#include "condvar/var.hpp"

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd random_matrix(Index r, Index c, std::mt19937_64& gen, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  MatrixXd m(r, c);
  for (Index j = 0; j < c; ++j) {
    for (Index i = 0; i < r; ++i) m(i, j) = nd(gen);
  }
  return m;
}

inline VectorXd random_vector(Index n, std::mt19937_64& gen, double sd = 1.0) {
  return random_matrix(n, 1, gen, sd).col(0);
}

inline MatrixXd random_spd(Index n, std::mt19937_64& gen) {
  const MatrixXd a = random_matrix(n, n, gen);
  return a * a.transpose() / static_cast<double>(n) + 0.5 * MatrixXd::Identity(n, n);
}

/// Random structural VAR with modest lag coefficients and a well-conditioned A0.
inline condvar::SvarParams random_svar(Index n, Index p, std::mt19937_64& gen) {
  condvar::SvarParams s;
  std::uniform_real_distribution<double> off(-0.5, 0.5);
  std::uniform_real_distribution<double> diag(0.8, 1.5);
  s.a0 = MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) s.a0(i, j) = i == j ? diag(gen) : (j < i ? off(gen) : 0.2 * off(gen));
  }
  s.a = random_vector(n, gen, 0.5);
  for (Index l = 0; l < p; ++l) s.lags.push_back(random_matrix(n, n, gen, 0.3 / static_cast<double>(n * (l + 1))));
  return s;
}

/// Dense H and c straight from the definition of the stacked system.
struct DenseSystem {
  MatrixXd h;
  VectorXd c;
};

inline DenseSystem dense_system(const condvar::SvarParams& s, const MatrixXd& history, Index horizon) {
  const Index n = s.n();
  const Index p = s.p();
  VectorXd sd = VectorXd::Ones(n);
  if (s.shock_scale) sd = s.shock_scale->cwiseSqrt();
  const MatrixXd inv_sd = sd.cwiseInverse().asDiagonal();
  DenseSystem d{MatrixXd::Zero(n * horizon, n * horizon), VectorXd::Zero(n * horizon)};
  for (Index t = 0; t < horizon; ++t) {
    d.h.block(t * n, t * n, n, n) = inv_sd * s.a0;
    VectorXd ct = s.a;
    for (Index l = 1; l <= p; ++l) {
      if (t - l >= 0) {
        d.h.block(t * n, (t - l) * n, n, n) = -inv_sd * s.lags[static_cast<std::size_t>(l - 1)];
      } else {
        // history row p - (l - t) holds y_{T + 1 + t - l}
        ct += s.lags[static_cast<std::size_t>(l - 1)] * history.row(p - (l - t)).transpose();
      }
    }
    d.c.segment(t * n, n) = inv_sd * ct;
  }
  return d;
}

/// Deterministic forward iteration of A0 y_t = a + sum A_l y_{t-l} + shocks.
inline VectorXd iterate_var(const condvar::SvarParams& s, const MatrixXd& history, Index horizon,
                            const VectorXd& shocks = VectorXd()) {
  const Index n = s.n();
  const Index p = s.p();
  std::vector<VectorXd> path;
  for (Index r = 0; r < p; ++r) path.push_back(history.row(r).transpose());
  VectorXd out(n * horizon);
  VectorXd sd = VectorXd::Ones(n);
  if (s.shock_scale) sd = s.shock_scale->cwiseSqrt();
  for (Index t = 0; t < horizon; ++t) {
    VectorXd rhs = s.a;
    for (Index l = 1; l <= p; ++l) rhs += s.lags[static_cast<std::size_t>(l - 1)] * path[path.size() - static_cast<std::size_t>(l)];
    if (shocks.size() > 0) rhs += sd.cwiseProduct(shocks.segment(t * n, n));
    const VectorXd y = s.a0.lu().solve(rhs);
    path.push_back(y);
    out.segment(t * n, n) = y;
  }
  return out;
}

struct Gaussian {
  VectorXd mean;
  MatrixXd cov;
};

/// Textbook conditioning of N(mean, cov) on R y ~ N(r, omega).
inline Gaussian condition(const Gaussian& g, const MatrixXd& r_mat, const VectorXd& r, const MatrixXd& omega) {
  const MatrixXd rs = r_mat * g.cov;
  const MatrixXd s = rs * r_mat.transpose();
  const MatrixXd gain = s.completeOrthogonalDecomposition().pseudoInverse();
  Gaussian out;
  out.mean = g.mean + rs.transpose() * gain * (r - r_mat * g.mean);
  out.cov = g.cov - rs.transpose() * gain * (s - omega) * gain * rs;
  return out;
}

inline Gaussian unconditional(const DenseSystem& d) {
  const MatrixXd hinv = d.h.inverse();
  return {hinv * d.c, hinv * hinv.transpose()};
}

inline MatrixXd selection(Index cols, const std::vector<Index>& picks) {
  MatrixXd s = MatrixXd::Zero(static_cast<Index>(picks.size()), cols);
  for (std::size_t k = 0; k < picks.size(); ++k) s(static_cast<Index>(k), picks[k]) = 1.0;
  return s;
}

/// Plain accept-reject from N(mean, cov) restricted to a box.
inline MatrixXd naive_box_sample(const Gaussian& g, const VectorXd& lower, const VectorXd& upper, Index n_target,
                                 std::uint64_t seed, Index max_proposals = 50'000'000) {
  const MatrixXd l = g.cov.llt().matrixL();
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  MatrixXd out(n_target, g.mean.size());
  Index kept = 0;
  VectorXd z(g.mean.size());
  for (Index tries = 0; kept < n_target && tries < max_proposals; ++tries) {
    for (Index i = 0; i < z.size(); ++i) z(i) = nd(gen);
    const VectorXd x = g.mean + l * z;
    if ((x.array() > lower.array()).all() && (x.array() < upper.array()).all()) out.row(kept++) = x.transpose();
  }
  return out.topRows(kept);
}

// ---------------------------------------------------------------------------
// Monte-Carlo comparisons

inline VectorXd col_mean(const MatrixXd& x) { return x.colwise().mean().transpose(); }

inline MatrixXd sample_cov(const MatrixXd& x) {
  const MatrixXd centered = x.rowwise() - x.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

/// Two-sided normal critical value for a family of m comparisons at the
/// single-test level of three standard errors (Bonferroni).
inline double family_critical(Index m) {
  const double alpha = 2.0 * condvar::normal_sf(3.0);
  return -condvar::normal_quantile(0.5 * alpha / static_cast<double>(std::max<Index>(m, 1)));
}

/// Largest |z| of sample means against known means, using the exact variances.
inline double max_mean_z(const MatrixXd& draws, const VectorXd& mean, const VectorXd& var) {
  const VectorXd m = col_mean(draws);
  double worst = 0.0;
  for (Index i = 0; i < m.size(); ++i) {
    const double se = std::sqrt(std::max(var(i), 1e-300) / static_cast<double>(draws.rows()));
    if (var(i) <= 1e-24) {
      if (std::abs(m(i) - mean(i)) > 1e-8) return INFINITY;
      continue;
    }
    worst = std::max(worst, std::abs(m(i) - mean(i)) / se);
  }
  return worst;
}

/// Largest |z| of sample covariance entries against a known covariance,
/// with standard errors from the sample fourth moments.
inline double max_cov_z(const MatrixXd& draws, const MatrixXd& cov) {
  const MatrixXd centered = draws.rowwise() - draws.colwise().mean();
  const double n = static_cast<double>(draws.rows());
  double worst = 0.0;
  for (Index i = 0; i < cov.rows(); ++i) {
    for (Index j = 0; j <= i; ++j) {
      const Eigen::ArrayXd prod = centered.col(i).array() * centered.col(j).array();
      const double est = prod.mean();
      const double var = (prod - est).square().mean();
      if (var <= 1e-24) {
        if (std::abs(est - cov(i, j)) > 1e-8) return INFINITY;
        continue;
      }
      worst = std::max(worst, std::abs(est - cov(i, j)) / std::sqrt(var / n));
    }
  }
  return worst;
}

/// Largest |z| between two independent samples' means and covariance entries.
struct TwoSampleZ {
  double mean = 0.0;
  double cov = 0.0;
  Index comparisons = 0;
};

inline TwoSampleZ two_sample_z(const MatrixXd& a, const MatrixXd& b) {
  TwoSampleZ out;
  const double na = static_cast<double>(a.rows());
  const double nb = static_cast<double>(b.rows());
  const MatrixXd ca = a.rowwise() - a.colwise().mean();
  const MatrixXd cb = b.rowwise() - b.colwise().mean();
  for (Index i = 0; i < a.cols(); ++i) {
    const double va = ca.col(i).squaredNorm() / na;
    const double vb = cb.col(i).squaredNorm() / nb;
    const double se = std::sqrt(va / na + vb / nb);
    if (se > 0.0) out.mean = std::max(out.mean, std::abs(a.col(i).mean() - b.col(i).mean()) / se);
    ++out.comparisons;
    for (Index j = 0; j <= i; ++j) {
      const Eigen::ArrayXd pa = ca.col(i).array() * ca.col(j).array();
      const Eigen::ArrayXd pb = cb.col(i).array() * cb.col(j).array();
      const double sa = (pa - pa.mean()).square().mean() / na;
      const double sb = (pb - pb.mean()).square().mean() / nb;
      const double s = std::sqrt(sa + sb);
      if (s > 0.0) out.cov = std::max(out.cov, std::abs(pa.mean() - pb.mean()) / s);
      ++out.comparisons;
    }
  }
  return out;
}

/// Energy distance between two samples and its permutation p-value.
inline double energy_distance_pvalue(const MatrixXd& a, const MatrixXd& b, int permutations, std::uint64_t seed) {
  MatrixXd pooled(a.rows() + b.rows(), a.cols());
  pooled << a, b;
  const Index n = pooled.rows();
  MatrixXd dist(n, n);
  for (Index i = 0; i < n; ++i) {
    dist(i, i) = 0.0;
    for (Index j = 0; j < i; ++j) dist(i, j) = dist(j, i) = (pooled.row(i) - pooled.row(j)).norm();
  }
  auto statistic = [&](const std::vector<Index>& idx) {
    const Index na = a.rows();
    const Index nb = n - na;
    double ab = 0.0;
    double aa = 0.0;
    double bb = 0.0;
    for (Index i = 0; i < na; ++i) {
      for (Index j = na; j < n; ++j) ab += dist(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
      for (Index j = 0; j < na; ++j) aa += dist(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    for (Index i = na; i < n; ++i) {
      for (Index j = na; j < n; ++j) bb += dist(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    const double dna = static_cast<double>(na);
    const double dnb = static_cast<double>(nb);
    return 2.0 * ab / (dna * dnb) - aa / (dna * dna) - bb / (dnb * dnb);
  };
  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  const double observed = statistic(idx);
  std::mt19937_64 gen(seed);
  int at_least = 0;
  for (int k = 0; k < permutations; ++k) {
    std::shuffle(idx.begin(), idx.end(), gen);
    if (statistic(idx) >= observed) ++at_least;
  }
  return (1.0 + at_least) / (1.0 + permutations);
}

inline double max_abs(const MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace oracle

#include "condvar/tmvn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "condvar/special.hpp"

namespace condvar {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

bool in_box(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  return ((x.array() >= lo.array()) && (x.array() <= hi.array())).all();
}

void clamp_into(Eigen::Ref<Eigen::VectorXd> x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  x = x.cwiseMax(lo).cwiseMin(hi);
}

struct CholPerm {
  Eigen::MatrixXd chol;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<Index> perm;
};

// Cholesky with the Genz-Botev ordering: at every step pick the remaining
// coordinate with the smallest conditional box probability.
CholPerm cholesky_permuted(Eigen::MatrixXd sigma, Eigen::VectorXd lo, Eigen::VectorXd hi) {
  const Index d = sigma.rows();
  CholPerm out;
  out.chol = Eigen::MatrixXd::Zero(d, d);
  out.perm.resize(static_cast<std::size_t>(d));
  for (Index i = 0; i < d; ++i) out.perm[static_cast<std::size_t>(i)] = i;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
  auto& l = out.chol;
  const double eps = std::numeric_limits<double>::epsilon();

  for (Index j = 0; j < d; ++j) {
    Index best = j;
    double best_pr = kInf;
    for (Index i = j; i < d; ++i) {
      double s = sigma(i, i) - l.row(i).head(j).squaredNorm();
      s = std::sqrt(std::max(s, eps));
      const double shift = l.row(i).head(j).dot(z.head(j));
      const double pr = log_normal_prob((lo(i) - shift) / s, (hi(i) - shift) / s);
      if (pr < best_pr) {
        best_pr = pr;
        best = i;
      }
    }
    if (best != j) {
      sigma.row(j).swap(sigma.row(best));
      sigma.col(j).swap(sigma.col(best));
      l.row(j).swap(l.row(best));
      std::swap(lo(j), lo(best));
      std::swap(hi(j), hi(best));
      std::swap(out.perm[static_cast<std::size_t>(j)], out.perm[static_cast<std::size_t>(best)]);
    }
    double s = sigma(j, j) - l.row(j).head(j).squaredNorm();
    require(s >= -0.01, ErrorCode::NotPositiveDefinite, "truncated normal covariance is not positive semi-definite");
    l(j, j) = std::sqrt(std::max(s, eps));
    for (Index i = j + 1; i < d; ++i) {
      l(i, j) = (sigma(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
    const double shift = l.row(j).head(j).dot(z.head(j));
    const double tl = (lo(j) - shift) / l(j, j);
    const double tu = (hi(j) - shift) / l(j, j);
    const double w = log_normal_prob(tl, tu);
    z(j) = (std::exp(-0.5 * tl * tl - w) - std::exp(-0.5 * tu * tu - w)) * kInvSqrt2Pi;
  }
  out.lower = std::move(lo);
  out.upper = std::move(hi);
  return out;
}

struct Saddle {
  Eigen::VectorXd grad;
  Eigen::MatrixXd jac;
};

// Gradient (and Jacobian) of psi(x, mu) with x_d = mu_d = 0.
Saddle saddle_system(const Eigen::VectorXd& y, const Eigen::MatrixXd& l, const Eigen::VectorXd& lo,
                     const Eigen::VectorXd& hi, bool with_jacobian) {
  const Index d = lo.size();
  const Index m = d - 1;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
  x.head(m) = y.head(m);
  mu.head(m) = y.tail(m);
  const Eigen::VectorXd c = l * x;
  Eigen::VectorXd lt = lo - mu - c;
  Eigen::VectorXd ut = hi - mu - c;
  Eigen::VectorXd pl(d);
  Eigen::VectorXd pu(d);
  for (Index k = 0; k < d; ++k) {
    const double w = log_normal_prob(lt(k), ut(k));
    pl(k) = std::exp(-0.5 * lt(k) * lt(k) - w) * kInvSqrt2Pi;
    pu(k) = std::exp(-0.5 * ut(k) * ut(k) - w) * kInvSqrt2Pi;
  }
  const Eigen::VectorXd p = pl - pu;

  Saddle out;
  out.grad.resize(2 * m);
  out.grad.head(m) = -mu.head(m) + (l.transpose() * p).head(m);
  out.grad.tail(m) = (mu - x + p).head(m);
  if (!with_jacobian) return out;

  for (Index k = 0; k < d; ++k) {
    if (std::isinf(lt(k))) lt(k) = 0.0;
    if (std::isinf(ut(k))) ut(k) = 0.0;
  }
  const Eigen::VectorXd dp = (-p.array().square() + lt.array() * pl.array() - ut.array() * pu.array()).matrix();
  const Eigen::MatrixXd dl = dp.asDiagonal() * l;
  const Eigen::MatrixXd mx = (-Eigen::MatrixXd::Identity(d, d) + dl).topLeftCorner(m, m);
  const Eigen::MatrixXd xx = (l.transpose() * dl).topLeftCorner(m, m);
  out.jac.resize(2 * m, 2 * m);
  out.jac.topLeftCorner(m, m) = xx;
  out.jac.topRightCorner(m, m) = mx.transpose();
  out.jac.bottomLeftCorner(m, m) = mx;
  out.jac.bottomRightCorner(m, m) = (Eigen::VectorXd::Ones(m) + dp.head(m)).asDiagonal();
  return out;
}

double psi(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::MatrixXd& l, const Eigen::VectorXd& lo,
           const Eigen::VectorXd& hi) {
  const Eigen::VectorXd c = l * x;
  double total = 0.0;
  for (Index k = 0; k < lo.size(); ++k) {
    total += log_normal_prob(lo(k) - mu(k) - c(k), hi(k) - mu(k) - c(k)) + 0.5 * mu(k) * mu(k) - x(k) * mu(k);
  }
  return total;
}

}  // namespace

// ---------------------------------------------------------------------------

Eigen::MatrixXd TruncatedGaussianSpec::covariance() const {
  if (form == MatrixForm::Covariance) return matrix;
  return matrix.llt().solve(Eigen::MatrixXd::Identity(dim(), dim()));
}

Eigen::MatrixXd TruncatedGaussianSpec::precision() const {
  if (form == MatrixForm::Precision) return matrix;
  return matrix.llt().solve(Eigen::MatrixXd::Identity(dim(), dim()));
}

void TruncatedGaussianSpec::validate() const {
  const Index d = dim();
  require(d >= 1, ErrorCode::InvalidArgument, "truncated normal needs dimension >= 1");
  require(matrix.rows() == d && matrix.cols() == d && lower.size() == d && upper.size() == d,
          ErrorCode::DimensionMismatch, "truncated normal spec dimensions disagree");
  require((lower.array() < upper.array()).all(), ErrorCode::InvalidArgument, "need lower < upper componentwise");
  require(!lower.array().isNaN().any() && !upper.array().isNaN().any() && mean.allFinite(),
          ErrorCode::InvalidArgument, "NaN in truncated normal spec");
  const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
  require((matrix - matrix.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale, ErrorCode::InvalidArgument,
          "truncated normal matrix is not symmetric");
  const Eigen::LLT<Eigen::MatrixXd> llt(matrix);
  require(llt.info() == Eigen::Success, ErrorCode::NotPositiveDefinite,
          "truncated normal matrix is not positive definite");
}

MinimaxTilting::MinimaxTilting(const TruncatedGaussianSpec& spec) {
  spec.validate();
  const Index d = spec.dim();
  mean_ = spec.mean;
  box_lower_ = spec.lower;
  box_upper_ = spec.upper;
  CholPerm cp = cholesky_permuted(spec.covariance(), spec.lower - spec.mean, spec.upper - spec.mean);
  chol_ = std::move(cp.chol);
  perm_ = std::move(cp.perm);
  const Eigen::VectorXd diag = chol_.diagonal();
  scaled_ = diag.cwiseInverse().asDiagonal() * chol_;
  scaled_.diagonal().setZero();
  lower_ = cp.lower.cwiseQuotient(diag);
  upper_ = cp.upper.cwiseQuotient(diag);
  tilt_ = Eigen::VectorXd::Zero(d);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
  if (d > 1) {
    const Index m = d - 1;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(2 * m);
    Saddle s = saddle_system(y, scaled_, lower_, upper_, true);
    double norm = s.grad.norm();
    while (norm > kGradientTolerance) {
      if (iterations_ >= kMaxIterations) {
        throw Error(ErrorCode::TiltingDiverged,
                    "Newton iteration stopped at gradient norm " + std::to_string(norm));
      }
      ++iterations_;
      const Eigen::VectorXd step = s.jac.fullPivLu().solve(-s.grad);
      double t = 1.0;
      bool moved = false;
      for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
        const Eigen::VectorXd trial = y + t * step;
        if (!trial.allFinite()) continue;
        Saddle next = saddle_system(trial, scaled_, lower_, upper_, true);
        const double next_norm = next.grad.norm();
        if (std::isfinite(next_norm) && next_norm < norm) {
          y = trial;
          s = std::move(next);
          norm = next_norm;
          moved = true;
          break;
        }
      }
      if (!moved) {
        throw Error(ErrorCode::TiltingDiverged,
                    "line search stalled at gradient norm " + std::to_string(norm));
      }
    }
    x.head(m) = y.head(m);
    tilt_.head(m) = y.tail(m);
  }
  psi_star_ = psi(x, tilt_, scaled_, lower_, upper_);
  require(psi_star_ > std::log(1e-300), ErrorCode::RegionTooImprobable,
          "truncation region probability below 1e-300");
}

double MinimaxTilting::propose(Eigen::Ref<Eigen::VectorXd> z, Rng& rng) const {
  const Index d = z.size();
  double log_ratio = 0.0;
  for (Index k = 0; k < d; ++k) {
    const double shift = scaled_.row(k).head(k).dot(z.head(k));
    const double mu = tilt_(k);
    const double tl = lower_(k) - mu - shift;
    const double tu = upper_(k) - mu - shift;
    z(k) = mu + truncated_std_normal(tl, tu, rng);
    log_ratio += log_normal_prob(tl, tu) + 0.5 * mu * mu - mu * z(k);
  }
  return log_ratio;
}

TmvnDraws MinimaxTilting::sample(Index n, Rng& rng) const {
  const Index d = dim();
  TmvnDraws out;
  out.draws.resize(n, d);
  Eigen::VectorXd z(d);
  Eigen::VectorXd x(d);
  Index accepted = 0;
  while (accepted < n) {
    const double log_ratio = propose(z, rng);
    ++out.proposals;
    if (-std::log(rng.uniform()) > psi_star_ - log_ratio) {
      const Eigen::VectorXd permuted = chol_ * z;
      for (Index k = 0; k < d; ++k) x(perm_[static_cast<std::size_t>(k)]) = permuted(k);
      x += mean_;
      clamp_into(x, box_lower_, box_upper_);
      out.draws.row(accepted++) = x.transpose();
    }
  }
  out.acceptance_rate = n == 0 ? 1.0 : static_cast<double>(n) / static_cast<double>(out.proposals);
  return out;
}

TmvnDraws sample_tilted(const TruncatedGaussianSpec& spec, Index n_draws, Rng& rng) {
  return MinimaxTilting(spec).sample(n_draws, rng);
}

TmvnDraws sample_tilted(const TruncatedGaussianSpec& spec, Index n_draws, std::uint64_t seed) {
  Rng rng(seed);
  return sample_tilted(spec, n_draws, rng);
}

Eigen::MatrixXd sample_gibbs(const TruncatedGaussianSpec& spec, Index n_draws, Index burn_in, Rng& rng) {
  spec.validate();
  const Index d = spec.dim();
  const Eigen::MatrixXd q = spec.precision();
  const Eigen::VectorXd sd = q.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::VectorXd x = spec.mean.cwiseMax(spec.lower).cwiseMin(spec.upper);
  Eigen::VectorXd dev = x - spec.mean;
  Eigen::MatrixXd out(n_draws, d);
  for (Index it = 0; it < burn_in + n_draws; ++it) {
    for (Index i = 0; i < d; ++i) {
      const double partial = q.col(i).dot(dev) - q(i, i) * dev(i);
      const double m = spec.mean(i) - partial / q(i, i);
      const double t = truncated_std_normal_gibbs((spec.lower(i) - m) / sd(i), (spec.upper(i) - m) / sd(i), rng);
      x(i) = std::clamp(m + sd(i) * t, spec.lower(i), spec.upper(i));
      dev(i) = x(i) - spec.mean(i);
    }
    if (it >= burn_in) out.row(it - burn_in) = x.transpose();
  }
  return out;
}

Eigen::MatrixXd sample_gibbs(const TruncatedGaussianSpec& spec, Index n_draws, Index burn_in, std::uint64_t seed) {
  Rng rng(seed);
  return sample_gibbs(spec, n_draws, burn_in, rng);
}

TmvnDraws sample_naive_partial(const TruncatedGaussianSpec& spec, Index n_target, Index max_proposals, Rng& rng) {
  spec.validate();
  const Index d = spec.dim();
  const Eigen::MatrixXd l = spec.covariance().llt().matrixL();
  TmvnDraws out;
  out.draws.resize(n_target, d);
  Index accepted = 0;
  Eigen::VectorXd z(d);
  while (accepted < n_target && out.proposals < max_proposals) {
    for (Index k = 0; k < d; ++k) z(k) = rng.normal();
    const Eigen::VectorXd x = spec.mean + l * z;
    ++out.proposals;
    if (in_box(x, spec.lower, spec.upper)) out.draws.row(accepted++) = x.transpose();
  }
  out.draws.conservativeResize(accepted, d);
  out.acceptance_rate = out.proposals == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(out.proposals);
  return out;
}

TmvnDraws sample_naive(const TruncatedGaussianSpec& spec, Index n_target, Index max_proposals, Rng& rng) {
  TmvnDraws out = sample_naive_partial(spec, n_target, max_proposals, rng);
  if (out.draws.rows() < n_target) {
    throw Error(ErrorCode::BudgetExhausted, std::to_string(out.draws.rows()) + " of " + std::to_string(n_target) +
                                                " draws accepted within " + std::to_string(max_proposals) +
                                                " proposals");
  }
  return out;
}

TmvnDraws sample_naive(const TruncatedGaussianSpec& spec, Index n_target, Index max_proposals, std::uint64_t seed) {
  Rng rng(seed);
  return sample_naive(spec, n_target, max_proposals, rng);
}

}  // namespace condvar

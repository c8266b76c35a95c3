#include "condvar/var.hpp"

#include <cmath>
#include <string>

namespace condvar {

namespace {

void require_square(const Eigen::MatrixXd& m, Index n, const char* what) {
  require(m.rows() == n && m.cols() == n, ErrorCode::DimensionMismatch,
          std::string(what) + " must be " + std::to_string(n) + "x" + std::to_string(n));
}

Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd& sigma) {
  require((sigma - sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, sigma.cwiseAbs().maxCoeff()),
          ErrorCode::NotPositiveDefinite, "covariance is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  require(llt.info() == Eigen::Success, ErrorCode::NotPositiveDefinite, "covariance is not positive definite");
  return llt;
}

}  // namespace

void SvarParams::validate() const {
  const Index k = n();
  require(k >= 1, ErrorCode::InvalidArgument, "SVAR needs at least one variable");
  require_square(a0, k, "A0");
  require(a.size() == k, ErrorCode::DimensionMismatch, "intercept length");
  for (const auto& m : lags) require_square(m, k, "lag matrix");
  if (shock_scale) {
    require(shock_scale->size() == k, ErrorCode::DimensionMismatch, "shock_scale length");
    require((shock_scale->array() > 0.0).all(), ErrorCode::InvalidArgument, "shock variances must be positive");
  }
}

void ReducedParams::validate() const {
  const Index k = n();
  require(k >= 1, ErrorCode::InvalidArgument, "VAR needs at least one variable");
  require_square(sigma, k, "Sigma");
  for (const auto& m : lags) require_square(m, k, "lag matrix");
}

SvarParams reduced_to_structural(const ReducedParams& r) {
  r.validate();
  const auto llt = checked_llt(r.sigma);
  const Index n = r.n();
  const Eigen::MatrixXd lower = llt.matrixL();
  SvarParams s;
  s.a0 = lower.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
  s.a = s.a0 * r.b;
  s.lags.reserve(r.lags.size());
  for (const auto& b : r.lags) s.lags.push_back(s.a0 * b);
  return s;
}

ReducedParams structural_to_reduced(const SvarParams& s) {
  s.validate();
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(s.a0);
  require(lu.isInvertible(), ErrorCode::SingularA0, "A0 is singular");
  const Eigen::MatrixXd inv = lu.inverse();
  ReducedParams r;
  r.b = inv * s.a;
  for (const auto& a : s.lags) r.lags.push_back(inv * a);
  if (s.shock_scale) {
    r.sigma = inv * s.shock_scale->asDiagonal() * inv.transpose();
  } else {
    r.sigma = inv * inv.transpose();
  }
  r.sigma = 0.5 * (r.sigma + r.sigma.transpose());
  return r;
}

ForecastSystem build_forecast_system(const SvarParams& s, const Eigen::Ref<const Eigen::MatrixXd>& history,
                                     Index horizon) {
  s.validate();
  const Index n = s.n();
  const Index p = s.p();
  require(horizon >= 1, ErrorCode::InvalidArgument, "forecast horizon must be >= 1");
  require(history.rows() == p && history.cols() == n, ErrorCode::DimensionMismatch,
          "history must hold exactly p = " + std::to_string(p) + " rows of " + std::to_string(n) + " values");
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(s.a0);
  require(lu.isInvertible(), ErrorCode::SingularA0, "A0 is singular");

  ForecastSystem f;
  f.n = n;
  f.p = p;
  f.horizon = horizon;
  f.history = history;
  const Index nh = n * horizon;
  f.h = BandMatrixd(nh, n * (p + 1) - 1, n - 1);
  f.c = Eigen::VectorXd(nh);

  for (Index t = 0; t < horizon; ++t) {
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) f.h.at(t * n + i, t * n + j) = s.a0(i, j);
    }
    for (Index lag = 1; lag <= std::min(p, t); ++lag) {
      const auto& a = s.lags[static_cast<std::size_t>(lag - 1)];
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) f.h.at(t * n + i, (t - lag) * n + j) = -a(i, j);
      }
    }
    // c block t: a + sum over lags reaching back into the history
    Eigen::VectorXd block = s.a;
    for (Index lag = t + 1; lag <= p; ++lag) {
      block += s.lags[static_cast<std::size_t>(lag - 1)] * history.row(p - 1 + t + 1 - lag).transpose();
    }
    f.c.segment(t * n, n) = block;
  }

  if (s.shock_scale) {
    const Eigen::VectorXd inv_sd = s.shock_scale->array().sqrt().inverse();
    BandMatrixd scaled(nh, f.h.lower_bw(), f.h.upper_bw());
    for (Index j = 0; j < nh; ++j) {
      for (Index i = std::max<Index>(0, j - f.h.upper_bw()); i <= std::min(nh - 1, j + f.h.lower_bw()); ++i) {
        scaled.at(i, j) = f.h(i, j) * inv_sd(i % n);
      }
    }
    f.h = std::move(scaled);
    for (Index i = 0; i < nh; ++i) f.c(i) *= inv_sd(i % n);
  }
  return f;
}

SystemSolver::SystemSolver(const ForecastSystem& f) : system_(f) {
  BandMatrixd trimmed = f.h.trimmed();
  if (trimmed.upper_bw() == 0) h_lower_ = std::move(trimmed);
  precision_ = band_gram(f.h).trimmed();
  precision_chol_ = band_cholesky(precision_);
  mean_ = solve(f.c);
}

Eigen::VectorXd SystemSolver::solve(const Eigen::Ref<const Eigen::VectorXd>& b) const {
  if (h_lower_) return band_solve(*h_lower_, b, Trans::No);
  // H^{-1} b = (H'H)^{-1} H' b
  return band_cholesky_solve(precision_chol_, band_matvec_transposed(system_.h, b));
}

Eigen::VectorXd SystemSolver::solve_transposed(const Eigen::Ref<const Eigen::VectorXd>& b) const {
  if (h_lower_) return band_solve(*h_lower_, b, Trans::Yes);
  // H'^{-1} b = H (H'H)^{-1} b
  return band_matvec(system_.h, band_cholesky_solve(precision_chol_, b));
}

UnconditionalMoments unconditional_moments(const ForecastSystem& f) {
  const SystemSolver solver(f);
  return {solver.mean(), solver.precision()};
}

}  // namespace condvar

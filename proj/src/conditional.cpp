#include "condvar/conditional.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>

#include "condvar/error.hpp"
#include "condvar/tmvn.hpp"

namespace condvar {

namespace {

constexpr double kClipTolerance = 1e-10;
constexpr Index kGibbsBurnIn = 1000;

void require_symmetric(const Eigen::MatrixXd& m, const std::string& what) {
  if (m.size() == 0) return;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale, ErrorCode::InvalidArgument,
          what + " must be symmetric");
}

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const std::string& what) {
  require(m.allFinite(), ErrorCode::InvalidArgument, what + " must be finite");
}

ForecastDraws make_draws(const ForecastSystem& f, Index n_draws, std::uint64_t seed) {
  require(n_draws >= 0, ErrorCode::InvalidArgument, "number of draws must be >= 0");
  ForecastDraws d;
  d.draws.resize(n_draws, f.size());
  d.n = f.n;
  d.horizon = f.horizon;
  d.per_draw_seed.assign(static_cast<std::size_t>(n_draws), seed);
  d.param_index.assign(static_cast<std::size_t>(n_draws), 0);
  return d;
}

/// R H^{-1}, one row per restriction.
Eigen::MatrixXd restriction_times_inverse(const SystemSolver& solver, const Eigen::MatrixXd& r) {
  Eigen::MatrixXd g(r.rows(), r.cols());
  for (Index k = 0; k < r.rows(); ++k) g.row(k) = solver.solve_transposed(r.row(k).transpose()).transpose();
  return g;
}

Index numerical_rank(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return 0;
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  const double tol = static_cast<double>(std::max(m.rows(), m.cols())) * std::numeric_limits<double>::epsilon() *
                     sv(0);
  return static_cast<Index>((sv.array() > tol).count());
}

/// Dense (H'H)^{-1} restricted to the given coordinates, from its Cholesky factor.
Eigen::MatrixXd marginal_covariance(const BandMatrixd& chol, const std::vector<Index>& coords) {
  const Index m = static_cast<Index>(coords.size());
  Eigen::MatrixXd cov(m, m);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(chol.dim());
  for (Index a = 0; a < m; ++a) {
    e(coords[static_cast<std::size_t>(a)]) = 1.0;
    const Eigen::VectorXd col = band_cholesky_solve(chol, e);
    e(coords[static_cast<std::size_t>(a)]) = 0.0;
    for (Index b = 0; b < m; ++b) cov(b, a) = col(coords[static_cast<std::size_t>(b)]);
  }
  return 0.5 * (cov + cov.transpose());
}

/// Conditional law of the free coordinates of N(mean, precision^{-1}) given
/// values at the fixed ones. The free block of the precision is factored once.
class PrecisionConditioner {
 public:
  PrecisionConditioner(const BandMatrixd& precision, const Eigen::VectorXd& mean, std::vector<Index> fixed)
      : precision_(&precision), fixed_(std::move(fixed)) {
    const Index d = precision.dim();
    std::vector<char> taken(static_cast<std::size_t>(d), 0);
    for (Index c : fixed_) taken[static_cast<std::size_t>(c)] = 1;
    for (Index c = 0; c < d; ++c) {
      if (!taken[static_cast<std::size_t>(c)]) free_.push_back(c);
    }
    if (!free_.empty()) {
      free_precision_ = band_principal_submatrix(precision, std::span<const Index>(free_)).trimmed();
      free_chol_ = band_cholesky(free_precision_);
    }
    const Eigen::VectorXd pm = band_matvec(precision, mean);
    base_.resize(static_cast<Index>(free_.size()));
    for (std::size_t k = 0; k < free_.size(); ++k) base_(static_cast<Index>(k)) = pm(free_[k]);
  }

  [[nodiscard]] const std::vector<Index>& free() const { return free_; }
  [[nodiscard]] const BandMatrixd& free_precision() const { return free_precision_; }
  [[nodiscard]] const BandMatrixd& free_factor() const { return free_chol_; }

  /// Mean of the free block; `values` ordered like the fixed list.
  [[nodiscard]] Eigen::VectorXd free_mean(const Eigen::Ref<const Eigen::VectorXd>& values) const {
    if (free_.empty()) return {};
    Eigen::VectorXd full = Eigen::VectorXd::Zero(precision_->dim());
    for (std::size_t k = 0; k < fixed_.size(); ++k) full(fixed_[k]) = values(static_cast<Index>(k));
    const Eigen::VectorXd q = band_matvec(*precision_, full);
    Eigen::VectorXd rhs = base_;
    for (std::size_t k = 0; k < free_.size(); ++k) rhs(static_cast<Index>(k)) -= q(free_[k]);
    return band_cholesky_solve(free_chol_, rhs);
  }

  /// One draw of the full vector with the fixed coordinates set to `values`.
  void draw(const Eigen::Ref<const Eigen::VectorXd>& values, Rng& rng, Eigen::Ref<Eigen::VectorXd> out) const {
    for (std::size_t k = 0; k < fixed_.size(); ++k) out(fixed_[k]) = values(static_cast<Index>(k));
    if (free_.empty()) return;
    const Eigen::VectorXd z = rng.normal_vector(static_cast<Index>(free_.size()));
    const Eigen::VectorXd x = free_mean(values) + band_solve(free_chol_, z, Trans::Yes);
    for (std::size_t k = 0; k < free_.size(); ++k) out(free_[k]) = x(static_cast<Index>(k));
  }

 private:
  const BandMatrixd* precision_;
  std::vector<Index> fixed_;
  std::vector<Index> free_;
  BandMatrixd free_precision_;
  BandMatrixd free_chol_;
  Eigen::VectorXd base_;
};

/// Draws from N(mean, precision^{-1}) truncated to lower < x[boxed] < upper:
/// the boxed marginal goes through the tilted sampler (Gibbs if the tilt
/// fails), the rest is drawn from its Gaussian conditional.
Eigen::MatrixXd truncated_banded_draws(const BandMatrixd& precision, const BandMatrixd& chol,
                                       const Eigen::VectorXd& mean, const std::vector<Index>& boxed,
                                       const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, Index n_draws,
                                       Rng& rng) {
  TruncatedGaussianSpec spec;
  spec.mean.resize(static_cast<Index>(boxed.size()));
  for (std::size_t k = 0; k < boxed.size(); ++k) spec.mean(static_cast<Index>(k)) = mean(boxed[k]);
  spec.matrix = marginal_covariance(chol, boxed);
  spec.form = MatrixForm::Covariance;
  spec.lower = lower;
  spec.upper = upper;

  Eigen::MatrixXd boxed_draws;
  try {
    boxed_draws = sample_tilted(spec, n_draws, rng).draws;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TiltingDiverged) throw;
    boxed_draws = sample_gibbs(spec, n_draws, kGibbsBurnIn, rng);
  }

  const PrecisionConditioner cond(precision, mean, boxed);
  Eigen::MatrixXd out(n_draws, precision.dim());
  Eigen::VectorXd row(precision.dim());
  for (Index i = 0; i < n_draws; ++i) {
    cond.draw(boxed_draws.row(i).transpose(), rng, row);
    out.row(i) = row.transpose();
  }
  return out;
}

void check_inequality(const ForecastSystem& f, const InequalityConstraints& ineq) {
  require(ineq.select.cols() == f.size(), ErrorCode::DimensionMismatch, "inequality selection width");
  require(ineq.lower.size() == ineq.select.rows() && ineq.upper.size() == ineq.select.rows(),
          ErrorCode::DimensionMismatch, "inequality bounds length");
  for (Index k = 0; k < ineq.lower.size(); ++k) {
    require(!std::isnan(ineq.lower(k)) && !std::isnan(ineq.upper(k)), ErrorCode::InvalidArgument,
            "inequality bounds must not be NaN");
    require(ineq.lower(k) < ineq.upper(k), ErrorCode::InvalidArgument,
            "inequality lower bound must be below the upper bound");
  }
}

void check_equality(const ForecastSystem& f, const EqualityConstraints& eq) {
  require(eq.select.cols() == f.size(), ErrorCode::DimensionMismatch, "equality selection width");
  require(eq.values.size() == eq.select.rows(), ErrorCode::DimensionMismatch, "equality values length");
  require_finite(eq.values, "equality values");
}

GaussianRestrictions stack(const GaussianRestrictions& a, const GaussianRestrictions& b) {
  if (a.matrix.rows() == 0) return b;
  if (b.matrix.rows() == 0) return a;
  const Index ra = a.matrix.rows();
  const Index rb = b.matrix.rows();
  GaussianRestrictions out;
  out.matrix.resize(ra + rb, a.matrix.cols());
  out.matrix << a.matrix, b.matrix;
  out.mean.resize(ra + rb);
  out.mean << a.mean, b.mean;
  out.cov = Eigen::MatrixXd::Zero(ra + rb, ra + rb);
  out.cov.topLeftCorner(ra, ra) = a.cov;
  out.cov.bottomRightCorner(rb, rb) = b.cov;
  return out;
}

GaussianRestrictions equality_rows(const EqualityConstraints& eq) {
  return {eq.select.dense(), eq.values, Eigen::MatrixXd::Zero(eq.select.rows(), eq.select.rows())};
}

}  // namespace

// ---------------------------------------------------------------------------

void ConstraintSet::validate(Index nh) const {
  if (equality) {
    require(equality->select.cols() == nh, ErrorCode::DimensionMismatch, "equality selection width");
    require(equality->values.size() == equality->select.rows(), ErrorCode::DimensionMismatch,
            "equality values length");
    require_finite(equality->values, "equality values");
  }
  if (gaussian) {
    require(gaussian->matrix.cols() == nh, ErrorCode::DimensionMismatch, "restriction matrix width");
    require(gaussian->mean.size() == gaussian->matrix.rows(), ErrorCode::DimensionMismatch,
            "restriction mean length");
    if (!gaussian_variance_preserving) {
      require(gaussian->cov.rows() == gaussian->matrix.rows() && gaussian->cov.cols() == gaussian->matrix.rows(),
              ErrorCode::DimensionMismatch, "restriction covariance shape");
      require_symmetric(gaussian->cov, "restriction covariance");
    }
    require_finite(gaussian->matrix, "restriction matrix");
    require_finite(gaussian->mean, "restriction mean");
  }
  if (inequality) {
    require(inequality->select.cols() == nh, ErrorCode::DimensionMismatch, "inequality selection width");
    require(inequality->lower.size() == inequality->select.rows() &&
                inequality->upper.size() == inequality->select.rows(),
            ErrorCode::DimensionMismatch, "inequality bounds length");
    for (Index k = 0; k < inequality->lower.size(); ++k) {
      require(inequality->lower(k) < inequality->upper(k), ErrorCode::InvalidArgument,
              "inequality lower bound must be below the upper bound");
    }
  }
  if (shocks) {
    require(shocks->matrix.cols() == nh, ErrorCode::DimensionMismatch, "shock selection width");
    require(shocks->mean.size() == shocks->matrix.rows(), ErrorCode::DimensionMismatch, "shock mean length");
    require(shocks->cov.rows() == shocks->matrix.rows() && shocks->cov.cols() == shocks->matrix.rows(),
            ErrorCode::DimensionMismatch, "shock covariance shape");
    require_symmetric(shocks->cov, "shock covariance");
  }
  if (scenario_nondriving) {
    require(scenario_nondriving->cols() == nh, ErrorCode::DimensionMismatch, "non-driving shock selection width");
  }
  if (equality && inequality) {
    for (Index c : inequality->select.col_of_row()) {
      require(!equality->select.selects(c), ErrorCode::OverlapEqualityInequality,
              "coordinate " + std::to_string(c) + " carries both an equality and an inequality");
    }
  }
}

Eigen::MatrixXd ConditionalMoments::shock_cov_shift() const {
  const auto& b = cov_factor.basis;
  return b * cov_factor.eigenvalues.asDiagonal() * b.transpose();
}

ConditionalMoments conditional_moments_linear(const ForecastSystem& f, const GaussianRestrictions& g) {
  const Index nh = f.size();
  const Index rows = g.matrix.rows();
  require(g.matrix.cols() == nh, ErrorCode::DimensionMismatch, "restriction matrix must have nh columns");
  require(g.mean.size() == rows, ErrorCode::DimensionMismatch, "restriction mean length");
  require(g.cov.rows() == rows && g.cov.cols() == rows, ErrorCode::DimensionMismatch,
          "restriction covariance shape");
  require(rows <= nh, ErrorCode::InconsistentSystem, "more restrictions than forecast coordinates");
  require_symmetric(g.cov, "restriction covariance");

  const SystemSolver solver(f);
  ConditionalMoments m;
  m.shock_mean_shift = Eigen::VectorXd::Zero(nh);
  m.cov_factor.basis.resize(nh, 0);
  m.cov_factor.eigenvalues.resize(0);
  m.cov_factor.scale.resize(0);
  m.cov_factor.rank = nh;
  if (rows == 0) {
    m.mu_y = solver.mean();
    return m;
  }

  const Eigen::MatrixXd gmat = restriction_times_inverse(solver, g.matrix);
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(gmat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double tol = static_cast<double>(std::max(rows, nh)) * std::numeric_limits<double>::epsilon() * sv(0);
  require(sv(0) > 0.0 && (sv.array() > tol).count() == rows, ErrorCode::RankDeficientR,
          "restriction matrix does not have full row rank");
  const Eigen::MatrixXd& u = svd.matrixU();
  const Eigen::MatrixXd& v = svd.matrixV();
  const Eigen::VectorXd inv_sv = sv.cwiseInverse();

  // mu_e = G^+ (r - G c) = G^+ (r - R H^{-1} c)
  const Eigen::VectorXd gap = g.mean - g.matrix * solver.mean();
  m.shock_mean_shift = v * (inv_sv.asDiagonal() * (u.transpose() * gap));

  // Psi_e = V C V' with C = S^{-1} U' Omega U S^{-1} - I
  Eigen::MatrixXd core = inv_sv.asDiagonal() * (u.transpose() * g.cov * u) * inv_sv.asDiagonal();
  core -= Eigen::MatrixXd::Identity(rows, rows);
  core = 0.5 * (core + core.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(core);
  Eigen::VectorXd lambda = eig.eigenvalues();
  Eigen::VectorXd scale(rows);
  Index zero_modes = 0;
  for (Index k = 0; k < rows; ++k) {
    double one_plus = 1.0 + lambda(k);
    if (one_plus < -kClipTolerance) {
      throw Error(ErrorCode::IndefiniteShockCov,
                  "conditional shock covariance has eigenvalue " + std::to_string(one_plus));
    }
    if (one_plus <= kClipTolerance) {
      one_plus = 0.0;
      lambda(k) = -1.0;
      ++zero_modes;
    }
    scale(k) = std::sqrt(one_plus) - 1.0;
  }
  m.cov_factor.basis = v * eig.eigenvectors();
  m.cov_factor.eigenvalues = lambda;
  m.cov_factor.scale = scale;
  m.cov_factor.rank = nh - zero_modes;
  m.mu_y = solver.solve(f.c + m.shock_mean_shift);
  return m;
}

Eigen::MatrixXd conditional_covariance(const ForecastSystem& f, const ConditionalMoments& m) {
  const Index nh = f.size();
  const SystemSolver solver(f);
  Eigen::MatrixXd hinv(nh, nh);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(nh);
  for (Index j = 0; j < nh; ++j) {
    e(j) = 1.0;
    hinv.col(j) = solver.solve(e);
    e(j) = 0.0;
  }
  const Eigen::MatrixXd shocks = Eigen::MatrixXd::Identity(nh, nh) + m.shock_cov_shift();
  Eigen::MatrixXd cov = hinv * shocks * hinv.transpose();
  return 0.5 * (cov + cov.transpose());
}

Eigen::MatrixXd variance_preserving_cov(const ForecastSystem& f, const Eigen::MatrixXd& r_matrix) {
  require(r_matrix.cols() == f.size(), ErrorCode::DimensionMismatch, "restriction matrix must have nh columns");
  const SystemSolver solver(f);
  const Eigen::MatrixXd g = restriction_times_inverse(solver, r_matrix);
  Eigen::MatrixXd cov = g * g.transpose();
  return 0.5 * (cov + cov.transpose());
}

GaussianRestrictions shocks_to_observable_restrictions(const ForecastSystem& f, const ShockRestrictions& s) {
  const Index nh = f.size();
  const Index rows = s.matrix.rows();
  require(s.matrix.cols() == nh, ErrorCode::DimensionMismatch, "shock restriction matrix must have nh columns");
  require(s.mean.size() == rows, ErrorCode::DimensionMismatch, "shock restriction mean length");
  require(s.cov.rows() == rows && s.cov.cols() == rows, ErrorCode::DimensionMismatch,
          "shock restriction covariance shape");
  require(numerical_rank(s.matrix) == rows, ErrorCode::RankDeficientW,
          "shock restriction matrix does not have full row rank");
  GaussianRestrictions g;
  g.matrix.resize(rows, nh);
  for (Index k = 0; k < rows; ++k) {
    g.matrix.row(k) = band_matvec_transposed(f.h, s.matrix.row(k).transpose()).transpose();
  }
  g.mean = s.matrix * f.c + s.mean;
  g.cov = s.cov;
  return g;
}

GaussianRestrictions build_structural_scenario(const ForecastSystem& f,
                                               const std::optional<GaussianRestrictions>& observables,
                                               const SelectionMatrix& nondriving) {
  const Index nh = f.size();
  require(nondriving.cols() == nh, ErrorCode::DimensionMismatch, "non-driving shock selection width");
  GaussianRestrictions shocks;
  const Index w = nondriving.rows();
  shocks.matrix.resize(w, nh);
  shocks.mean.resize(w);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(nh);
  for (Index k = 0; k < w; ++k) {
    e(nondriving[k]) = 1.0;
    shocks.matrix.row(k) = band_matvec_transposed(f.h, e).transpose();
    e(nondriving[k]) = 0.0;
    shocks.mean(k) = f.c(nondriving[k]);
  }
  shocks.cov = Eigen::MatrixXd::Identity(w, w);

  GaussianRestrictions out = observables ? stack(*observables, shocks) : shocks;
  require(out.matrix.rows() >= 1, ErrorCode::InvalidArgument, "structural scenario has no restrictions");
  require(out.matrix.rows() <= nh, ErrorCode::InconsistentSystem, "more restrictions than forecast coordinates");
  require(numerical_rank(out.matrix) == out.matrix.rows(), ErrorCode::RankDeficientStack,
          "stacked scenario restrictions do not have full row rank");
  return out;
}

// ---------------------------------------------------------------------------

ForecastDraws draw_unconditional(const ForecastSystem& f, Index n_draws, std::uint64_t seed) {
  ForecastDraws d = make_draws(f, n_draws, seed);
  const SystemSolver solver(f);
  Rng rng(seed);
  for (Index i = 0; i < n_draws; ++i) {
    d.draws.row(i) = solver.solve(f.c + rng.normal_vector(f.size())).transpose();
  }
  return d;
}

ForecastDraws draw_conditional_linear(const ForecastSystem& f, const ConditionalMoments& m, Index n_draws,
                                      std::uint64_t seed) {
  const Index nh = f.size();
  require(m.mu_y.size() == nh && m.shock_mean_shift.size() == nh, ErrorCode::DimensionMismatch,
          "conditional moments do not match the system");
  ForecastDraws d = make_draws(f, n_draws, seed);
  const SystemSolver solver(f);
  const Eigen::VectorXd centre = f.c + m.shock_mean_shift;
  const auto& basis = m.cov_factor.basis;
  Rng rng(seed);
  for (Index i = 0; i < n_draws; ++i) {
    Eigen::VectorXd e = rng.normal_vector(nh);
    if (basis.cols() > 0) e += basis * m.cov_factor.scale.cwiseProduct(basis.transpose() * e);
    d.draws.row(i) = solver.solve(centre + e).transpose();
  }
  return d;
}

ForecastDraws draw_conditional_equality(const ForecastSystem& f, const EqualityConstraints& eq, Index n_draws,
                                        std::uint64_t seed) {
  check_equality(f, eq);
  if (eq.select.empty()) return draw_unconditional(f, n_draws, seed);
  ForecastDraws d = make_draws(f, n_draws, seed);
  const SystemSolver solver(f);
  const PrecisionConditioner cond(solver.precision(), solver.mean(), eq.select.col_of_row());
  Rng rng(seed);
  Eigen::VectorXd row(f.size());
  for (Index i = 0; i < n_draws; ++i) {
    cond.draw(eq.values, rng, row);
    d.draws.row(i) = row.transpose();
  }
  return d;
}

EqualityMoments equality_moments(const ForecastSystem& f, const EqualityConstraints& eq) {
  check_equality(f, eq);
  const SystemSolver solver(f);
  EqualityMoments out;
  out.mean = solver.mean();
  if (eq.select.empty()) {
    for (Index c = 0; c < f.size(); ++c) out.free.push_back(c);
    out.free_precision = solver.precision();
    return out;
  }
  const PrecisionConditioner cond(solver.precision(), solver.mean(), eq.select.col_of_row());
  for (Index k = 0; k < eq.select.rows(); ++k) out.mean(eq.select[k]) = eq.values(k);
  const Eigen::VectorXd free_mean = cond.free_mean(eq.values);
  for (std::size_t k = 0; k < cond.free().size(); ++k) out.mean(cond.free()[k]) = free_mean(static_cast<Index>(k));
  out.free = cond.free();
  out.free_precision = cond.free_precision();
  return out;
}

ForecastDraws draw_conditional_inequality(const ForecastSystem& f, const InequalityConstraints& ineq,
                                          Index n_draws, std::uint64_t seed) {
  check_inequality(f, ineq);
  if (ineq.select.empty()) return draw_unconditional(f, n_draws, seed);
  ForecastDraws d = make_draws(f, n_draws, seed);
  const SystemSolver solver(f);
  Rng rng(seed);
  d.draws = truncated_banded_draws(solver.precision(), solver.precision_factor(), solver.mean(),
                                   ineq.select.col_of_row(), ineq.lower, ineq.upper, n_draws, rng);
  return d;
}

ForecastDraws draw_conditional_equality_inequality(const ForecastSystem& f, const EqualityConstraints& eq,
                                                   const InequalityConstraints& ineq, Index n_draws,
                                                   std::uint64_t seed) {
  check_equality(f, eq);
  check_inequality(f, ineq);
  if (eq.select.empty()) return draw_conditional_inequality(f, ineq, n_draws, seed);
  if (ineq.select.empty()) return draw_conditional_equality(f, eq, n_draws, seed);

  const SystemSolver solver(f);
  const PrecisionConditioner outer(solver.precision(), solver.mean(), eq.select.col_of_row());
  const auto& free = outer.free();
  // position of every boxed coordinate inside the free block
  std::vector<Index> where(static_cast<std::size_t>(f.size()), -1);
  for (std::size_t k = 0; k < free.size(); ++k) where[static_cast<std::size_t>(free[k])] = static_cast<Index>(k);
  std::vector<Index> boxed;
  boxed.reserve(static_cast<std::size_t>(ineq.select.rows()));
  for (Index c : ineq.select.col_of_row()) {
    const Index pos = where[static_cast<std::size_t>(c)];
    require(pos >= 0, ErrorCode::OverlapEqualityInequality,
            "coordinate " + std::to_string(c) + " carries both an equality and an inequality");
    boxed.push_back(pos);
  }

  ForecastDraws d = make_draws(f, n_draws, seed);
  Rng rng(seed);
  const Eigen::VectorXd free_mean = outer.free_mean(eq.values);
  const Eigen::MatrixXd inner = truncated_banded_draws(outer.free_precision(), outer.free_factor(), free_mean,
                                                       boxed, ineq.lower, ineq.upper, n_draws, rng);
  for (Index i = 0; i < n_draws; ++i) {
    for (Index k = 0; k < eq.select.rows(); ++k) d.draws(i, eq.select[k]) = eq.values(k);
    for (std::size_t k = 0; k < free.size(); ++k) d.draws(i, free[k]) = inner(i, static_cast<Index>(k));
  }
  return d;
}

ForecastDraws draw_conditional_combined(const ForecastSystem& f, const Eigen::MatrixXd& r_matrix,
                                        const Eigen::VectorXd& r_mean, const InequalityConstraints& ineq,
                                        Index n_draws, std::uint64_t seed) {
  check_inequality(f, ineq);
  require(r_matrix.cols() == f.size(), ErrorCode::DimensionMismatch, "restriction matrix must have nh columns");
  for (Index c : ineq.select.col_of_row()) {
    require((r_matrix.col(c).array() == 0.0).all(), ErrorCode::OverlappingConstraints,
            "restriction rows touch inequality-constrained coordinate " + std::to_string(c));
  }
  const GaussianRestrictions g{r_matrix, r_mean, variance_preserving_cov(f, r_matrix)};
  const ConditionalMoments m = conditional_moments_linear(f, g);
  if (ineq.select.empty()) return draw_conditional_linear(f, m, n_draws, seed);

  ForecastDraws d = make_draws(f, n_draws, seed);
  const SystemSolver solver(f);
  Rng rng(seed);
  d.draws = truncated_banded_draws(solver.precision(), solver.precision_factor(), m.mu_y,
                                   ineq.select.col_of_row(), ineq.lower, ineq.upper, n_draws, rng);
  return d;
}

ForecastDraws draw_constrained(const ForecastSystem& f, const ConstraintSet& cs, Index n_draws,
                               std::uint64_t seed) {
  cs.validate(f.size());
  const bool linear = cs.gaussian || cs.shocks || cs.scenario_nondriving;
  if (!linear) {
    if (cs.equality && cs.inequality) {
      return draw_conditional_equality_inequality(f, *cs.equality, *cs.inequality, n_draws, seed);
    }
    if (cs.equality) return draw_conditional_equality(f, *cs.equality, n_draws, seed);
    if (cs.inequality) return draw_conditional_inequality(f, *cs.inequality, n_draws, seed);
    return draw_unconditional(f, n_draws, seed);
  }

  if (cs.inequality && cs.gaussian && cs.gaussian_variance_preserving && !cs.equality && !cs.shocks &&
      !cs.scenario_nondriving) {
    return draw_conditional_combined(f, cs.gaussian->matrix, cs.gaussian->mean, *cs.inequality, n_draws, seed);
  }

  std::optional<GaussianRestrictions> observables;
  if (cs.equality) observables = equality_rows(*cs.equality);
  if (cs.gaussian) {
    GaussianRestrictions g = *cs.gaussian;
    if (cs.gaussian_variance_preserving) g.cov = variance_preserving_cov(f, g.matrix);
    observables = observables ? stack(*observables, g) : g;
  }
  GaussianRestrictions all;
  if (cs.scenario_nondriving) {
    all = build_structural_scenario(f, observables, *cs.scenario_nondriving);
  } else if (observables) {
    all = *observables;
  }
  if (cs.shocks) all = stack(all, shocks_to_observable_restrictions(f, *cs.shocks));
  const ConditionalMoments m = conditional_moments_linear(f, all);
  if (!cs.inequality) return draw_conditional_linear(f, m, n_draws, seed);

  // Scenario (or shock) restrictions with a box: the box truncates
  // N(mu_y, (H'H)^{-1}) around the restricted mean.
  require(cs.scenario_nondriving.has_value() || cs.shocks.has_value(), ErrorCode::InvalidArgument,
          "Gaussian restrictions combined with inequalities must be variance preserving");
  check_inequality(f, *cs.inequality);
  ForecastDraws d = make_draws(f, n_draws, seed);
  const SystemSolver solver(f);
  Rng rng(seed);
  d.draws = truncated_banded_draws(solver.precision(), solver.precision_factor(), m.mu_y,
                                   cs.inequality->select.col_of_row(), cs.inequality->lower, cs.inequality->upper,
                                   n_draws, rng);
  return d;
}

ForecastDraws forecast_over_draws(const std::vector<SvarParams>& params,
                                  const Eigen::Ref<const Eigen::MatrixXd>& history, const ConstraintSet& cs,
                                  Index horizon, Index n_per_param, std::uint64_t seed, int threads) {
  require(!params.empty(), ErrorCode::InvalidArgument, "no parameter draws");
  require(n_per_param >= 1, ErrorCode::InvalidArgument, "forecast draws per parameter draw must be >= 1");
  const std::size_t count = params.size();
  std::vector<ForecastDraws> parts(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  const Eigen::MatrixXd hist = history;

  auto work = [&]() {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        const std::uint64_t s = derive_seed(seed, i);
        const ForecastSystem f = build_forecast_system(params[i], hist, horizon);
        parts[i] = draw_constrained(f, cs, n_per_param, s);
        std::fill(parts[i].param_index.begin(), parts[i].param_index.end(), static_cast<Index>(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.code(), "parameter draw " + std::to_string(i) + ": " + e.detail());
    }
  }

  ForecastDraws out;
  out.n = parts.front().n;
  out.horizon = horizon;
  out.draws.resize(static_cast<Index>(count) * n_per_param, parts.front().draws.cols());
  for (std::size_t i = 0; i < count; ++i) {
    out.draws.middleRows(static_cast<Index>(i) * n_per_param, n_per_param) = parts[i].draws;
    out.per_draw_seed.insert(out.per_draw_seed.end(), parts[i].per_draw_seed.begin(), parts[i].per_draw_seed.end());
    out.param_index.insert(out.param_index.end(), parts[i].param_index.begin(), parts[i].param_index.end());
  }
  return out;
}

Index count_violations(const ForecastDraws& d, const ConstraintSet& cs, double tol) {
  Index bad = 0;
  for (Index i = 0; i < d.draws.rows(); ++i) {
    bool ok = true;
    if (cs.equality) {
      for (Index k = 0; k < cs.equality->select.rows() && ok; ++k) {
        const double v = cs.equality->values(k);
        ok = std::abs(d.draws(i, cs.equality->select[k]) - v) <= tol * std::max(1.0, std::abs(v));
      }
    }
    if (cs.inequality) {
      for (Index k = 0; k < cs.inequality->select.rows() && ok; ++k) {
        const double x = d.draws(i, cs.inequality->select[k]);
        ok = x >= cs.inequality->lower(k) && x <= cs.inequality->upper(k);
      }
    }
    if (!ok) ++bad;
  }
  return bad;
}

}  // namespace condvar

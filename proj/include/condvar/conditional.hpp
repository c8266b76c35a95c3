#pragma once

// Conditional forecasting on the stacked system H y = c + e.
//
// Coordinates of y are variable-major within a step, steps ascending:
// coordinate t*n + i is variable i at T+1+t.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "condvar/band.hpp"
#include "condvar/rng.hpp"
#include "condvar/var.hpp"

namespace condvar {

// ---------------------------------------------------------------------------
// Restrictions

/// Hard conditions y[select] = values.
struct EqualityConstraints {
  SelectionMatrix select;
  Eigen::VectorXd values;
};

/// R y ~ N(r, Omega).
struct GaussianRestrictions {
  Eigen::MatrixXd matrix;  // R, full row rank
  Eigen::VectorXd mean;    // r
  Eigen::MatrixXd cov;     // Omega, PSD
};

/// lower < y[select] < upper.
struct InequalityConstraints {
  SelectionMatrix select;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

/// W e ~ N(w, Psi) on the structural shocks.
struct ShockRestrictions {
  Eigen::MatrixXd matrix;  // W
  Eigen::VectorXd mean;    // w
  Eigen::MatrixXd cov;     // Psi
};

struct ConstraintSet {
  std::optional<EqualityConstraints> equality;
  std::optional<GaussianRestrictions> gaussian;
  /// Gaussian rows use Omega = R (H'H)^{-1} R', filled in per parameter draw.
  bool gaussian_variance_preserving = false;
  std::optional<InequalityConstraints> inequality;
  std::optional<ShockRestrictions> shocks;
  /// Non-driving shocks of a structural scenario keep their N(0, 1) law.
  std::optional<SelectionMatrix> scenario_nondriving;

  [[nodiscard]] bool empty() const {
    return !equality && !gaussian && !inequality && !shocks && !scenario_nondriving;
  }

  /// Checks shapes against a stacked dimension nh and the invariants of each block.
  void validate(Index nh) const;
};

// ---------------------------------------------------------------------------
// Conditional moments of the general linear case

/// Factor F of I + Psi_e in the form F = I + basis * diag(scale) * basis',
/// so F F' = I + Psi_e. Only the row space of R H^{-1} is touched.
struct ShockCovFactor {
  Eigen::MatrixXd basis;        // nh x r, orthonormal columns
  Eigen::VectorXd eigenvalues;  // Psi_e = basis * diag(eigenvalues) * basis'
  Eigen::VectorXd scale;        // sqrt(max(1 + eigenvalue, 0)) - 1
  Index rank = 0;               // rank of I + Psi_e
};

struct ConditionalMoments {
  Eigen::VectorXd mu_y;
  Eigen::VectorXd shock_mean_shift;  // mu_e
  ShockCovFactor cov_factor;

  /// Dense Psi_e.
  [[nodiscard]] Eigen::MatrixXd shock_cov_shift() const;
};

ConditionalMoments conditional_moments_linear(const ForecastSystem& f, const GaussianRestrictions& g);

/// Dense Sigma_y = H^{-1} (I + Psi_e) H^{-T}.
Eigen::MatrixXd conditional_covariance(const ForecastSystem& f, const ConditionalMoments& m);

/// R (H'H)^{-1} R', the restriction covariance that leaves Sigma_y unchanged.
Eigen::MatrixXd variance_preserving_cov(const ForecastSystem& f, const Eigen::MatrixXd& r_matrix);

/// R = W H, r = W c + w, Omega = Psi.
GaussianRestrictions shocks_to_observable_restrictions(const ForecastSystem& f, const ShockRestrictions& s);

/// Stacks observable rows with W H y ~ N(W c, I) for the non-driving shocks.
GaussianRestrictions build_structural_scenario(const ForecastSystem& f,
                                               const std::optional<GaussianRestrictions>& observables,
                                               const SelectionMatrix& nondriving);

// ---------------------------------------------------------------------------
// Samplers

struct ForecastDraws {
  Eigen::MatrixXd draws;                   // one draw per row, nh columns
  Index n = 0;
  Index horizon = 0;
  std::vector<std::uint64_t> per_draw_seed;  // seed of the stream that produced each row
  std::vector<Index> param_index;            // parameter draw behind each row

  [[nodiscard]] Index size() const { return draws.rows(); }
};

ForecastDraws draw_unconditional(const ForecastSystem& f, Index n_draws, std::uint64_t seed);

ForecastDraws draw_conditional_linear(const ForecastSystem& f, const ConditionalMoments& m, Index n_draws,
                                      std::uint64_t seed);

ForecastDraws draw_conditional_equality(const ForecastSystem& f, const EqualityConstraints& eq, Index n_draws,
                                        std::uint64_t seed);

/// Exact law of the streamlined equality path: fixed coordinates at their
/// values, the free block N(mean, free_precision^{-1}).
struct EqualityMoments {
  Eigen::VectorXd mean;          // nh, fixed coordinates included
  std::vector<Index> free;       // free coordinates, ascending
  BandMatrixd free_precision;    // precision of the free block
};

EqualityMoments equality_moments(const ForecastSystem& f, const EqualityConstraints& eq);

ForecastDraws draw_conditional_inequality(const ForecastSystem& f, const InequalityConstraints& ineq,
                                          Index n_draws, std::uint64_t seed);

/// Hard conditions and a box on disjoint coordinates: condition on the
/// equalities, then truncate the resulting banded Gaussian.
ForecastDraws draw_conditional_equality_inequality(const ForecastSystem& f, const EqualityConstraints& eq,
                                                   const InequalityConstraints& ineq, Index n_draws,
                                                   std::uint64_t seed);

/// Mean-shifting Gaussian rows (Omega = R (H'H)^{-1} R') combined with a box:
/// N(mu_y, (H'H)^{-1}) truncated to the box. R must not touch boxed coordinates.
ForecastDraws draw_conditional_combined(const ForecastSystem& f, const Eigen::MatrixXd& r_matrix,
                                        const Eigen::VectorXd& r_mean, const InequalityConstraints& ineq,
                                        Index n_draws, std::uint64_t seed);

/// Routes a constraint set to the matching sampler.
ForecastDraws draw_constrained(const ForecastSystem& f, const ConstraintSet& cs, Index n_draws,
                               std::uint64_t seed);

/// Two-step forecasting: one system per parameter draw, n_per_param forecast
/// draws each, concatenated in parameter order. Parameter draw i uses seed
/// derive_seed(seed, i) regardless of the thread count.
ForecastDraws forecast_over_draws(const std::vector<SvarParams>& params,
                                  const Eigen::Ref<const Eigen::MatrixXd>& history, const ConstraintSet& cs,
                                  Index horizon, Index n_per_param, std::uint64_t seed, int threads = 1);

/// Rows breaking any equality (beyond tol) or leaving the closed box.
Index count_violations(const ForecastDraws& d, const ConstraintSet& cs, double tol = 1e-8);

}  // namespace condvar

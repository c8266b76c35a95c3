#pragma once

// Structural VAR containers and the stacked forecast system
//
//   H y_{T+1..T+h} = c + e,   e ~ N(0, I_{nh})
//
// with A0 on the block diagonal of H, -A_j on block sub-diagonal j, and the
// lagged history folded into the first p blocks of c.

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "condvar/band.hpp"

namespace condvar {

struct SvarParams {
  Eigen::MatrixXd a0;                 // n x n, full rank
  Eigen::VectorXd a;                  // intercepts
  std::vector<Eigen::MatrixXd> lags;  // A_1 .. A_p
  std::optional<Eigen::VectorXd> shock_scale;  // shock variances; identity if absent

  [[nodiscard]] Index n() const { return a0.rows(); }
  [[nodiscard]] Index p() const { return static_cast<Index>(lags.size()); }

  void validate() const;
};

struct ReducedParams {
  Eigen::VectorXd b;
  std::vector<Eigen::MatrixXd> lags;  // B_1 .. B_p
  Eigen::MatrixXd sigma;

  [[nodiscard]] Index n() const { return b.size(); }
  [[nodiscard]] Index p() const { return static_cast<Index>(lags.size()); }

  void validate() const;
};

/// A0 = chol(Sigma)^{-1}, a = A0 b, A_j = A0 B_j, unit shocks.
SvarParams reduced_to_structural(const ReducedParams& r);

/// Inverse map; Sigma = A0^{-1} D A0^{-T} with D the shock variances.
ReducedParams structural_to_reduced(const SvarParams& s);

struct ForecastSystem {
  BandMatrixd h;             // nh x nh
  Eigen::VectorXd c;         // nh
  Index n = 0;
  Index p = 0;
  Index horizon = 0;
  Eigen::MatrixXd history;   // p x n, oldest row first, last row is y_T

  [[nodiscard]] Index size() const { return n * horizon; }

  /// Stacked coordinate of variable `var` at step `step` (both 0-based).
  [[nodiscard]] Index coord(Index var, Index step) const { return step * n + var; }
};

/// Builds (H, c). With shock_scale present, equation rows are divided by the
/// shock standard deviations so the system always has unit shocks.
ForecastSystem build_forecast_system(const SvarParams& s, const Eigen::Ref<const Eigen::MatrixXd>& history,
                                     Index horizon);

/// Shared factorizations of one forecast system: H^{-1}, H'H and its Cholesky
/// factor, and the unconditional mean H^{-1} c.
class SystemSolver {
 public:
  explicit SystemSolver(const ForecastSystem& f);

  /// H^{-1} b
  [[nodiscard]] Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& b) const;
  /// H'^{-1} b
  [[nodiscard]] Eigen::VectorXd solve_transposed(const Eigen::Ref<const Eigen::VectorXd>& b) const;

  [[nodiscard]] const BandMatrixd& precision() const { return precision_; }
  [[nodiscard]] const BandMatrixd& precision_factor() const { return precision_chol_; }
  [[nodiscard]] const Eigen::VectorXd& mean() const { return mean_; }
  [[nodiscard]] bool triangular() const { return h_lower_.has_value(); }
  [[nodiscard]] const ForecastSystem& system() const { return system_; }

 private:
  ForecastSystem system_;
  std::optional<BandMatrixd> h_lower_;
  BandMatrixd precision_;
  BandMatrixd precision_chol_;
  Eigen::VectorXd mean_;
};

struct UnconditionalMoments {
  Eigen::VectorXd mean;    // H^{-1} c
  BandMatrixd precision;   // H'H
};

UnconditionalMoments unconditional_moments(const ForecastSystem& f);

}  // namespace condvar

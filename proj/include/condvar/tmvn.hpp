#pragma once

// Multivariate normal restricted to a box  lower <= x <= upper.

#include <Eigen/Dense>

#include <cstdint>

#include "condvar/band.hpp"
#include "condvar/rng.hpp"

namespace condvar {

enum class MatrixForm { Covariance, Precision };

struct TruncatedGaussianSpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd matrix;  // covariance or precision, see form
  MatrixForm form = MatrixForm::Covariance;
  Eigen::VectorXd lower;   // -inf allowed
  Eigen::VectorXd upper;   // +inf allowed

  [[nodiscard]] Index dim() const { return mean.size(); }
  [[nodiscard]] Eigen::MatrixXd covariance() const;
  [[nodiscard]] Eigen::MatrixXd precision() const;
  void validate() const;
};

struct TmvnDraws {
  Eigen::MatrixXd draws;  // one draw per row
  double acceptance_rate = 1.0;
  Index proposals = 0;
};

/// Exponentially tilted proposal for accept-reject sampling. The tilt solves
/// the minimax saddle-point system by damped Newton iteration; the setup is
/// immutable afterwards and can be shared between threads.
class MinimaxTilting {
 public:
  static constexpr int kMaxIterations = 200;
  static constexpr double kGradientTolerance = 1e-8;

  explicit MinimaxTilting(const TruncatedGaussianSpec& spec);

  /// Draws exactly n accepted samples.
  TmvnDraws sample(Index n, Rng& rng) const;

  /// Upper bound on the log acceptance ratio; also bounds log P(box).
  [[nodiscard]] double log_bound() const { return psi_star_; }
  [[nodiscard]] int newton_iterations() const { return iterations_; }
  [[nodiscard]] Index dim() const { return mean_.size(); }

 private:
  // proposal draw in the permuted, whitened coordinates; returns its log ratio
  double propose(Eigen::Ref<Eigen::VectorXd> z, Rng& rng) const;

  Eigen::VectorXd mean_;
  Eigen::MatrixXd chol_;       // permuted lower Cholesky factor
  Eigen::MatrixXd scaled_;     // chol_ with unit-scaled rows, diagonal removed
  Eigen::VectorXd lower_;      // scaled, permuted limits
  Eigen::VectorXd upper_;
  Eigen::VectorXd box_lower_;  // original limits
  Eigen::VectorXd box_upper_;
  std::vector<Index> perm_;
  Eigen::VectorXd tilt_;       // mu, last entry zero
  double psi_star_ = 0.0;
  int iterations_ = 0;
};

TmvnDraws sample_tilted(const TruncatedGaussianSpec& spec, Index n_draws, Rng& rng);
TmvnDraws sample_tilted(const TruncatedGaussianSpec& spec, Index n_draws, std::uint64_t seed);

/// Coordinate-wise Gibbs sampler with inverse-CDF univariate updates.
Eigen::MatrixXd sample_gibbs(const TruncatedGaussianSpec& spec, Index n_draws, Index burn_in, Rng& rng);
Eigen::MatrixXd sample_gibbs(const TruncatedGaussianSpec& spec, Index n_draws, Index burn_in, std::uint64_t seed);

/// Unrestricted proposals filtered by the box; may return fewer than n_target
/// rows when the proposal budget runs out.
TmvnDraws sample_naive_partial(const TruncatedGaussianSpec& spec, Index n_target, Index max_proposals, Rng& rng);

/// As above but throws BudgetExhausted on a short sample.
TmvnDraws sample_naive(const TruncatedGaussianSpec& spec, Index n_target, Index max_proposals, Rng& rng);
TmvnDraws sample_naive(const TruncatedGaussianSpec& spec, Index n_target, Index max_proposals, std::uint64_t seed);

}  // namespace condvar

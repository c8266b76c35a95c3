#pragma once

// Bayesian VAR estimation: an independent normal / inverse-Wishart Gibbs
// sampler and an equation-by-equation conjugate Minnesota prior with a
// closed-form marginal likelihood.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "condvar/rng.hpp"
#include "condvar/var.hpp"

namespace condvar {

struct PosteriorDraws {
  std::vector<SvarParams> draws;
  std::vector<ReducedParams> reduced;  // same draws in reduced form
  std::vector<std::uint64_t> seeds;    // per-draw seed (the chain seed for Gibbs)
  Index burn_in = 0;
  Index thin = 1;

  [[nodiscard]] Index size() const { return static_cast<Index>(draws.size()); }
};

/// Rows t = p..T-1 of the data as the regressand, [1, y_{t-1}', ..., y_{t-p}'] as regressors.
struct VarRegression {
  Eigen::MatrixXd y;  // (T - p) x n
  Eigen::MatrixXd x;  // (T - p) x (1 + n p)
};

VarRegression var_regression(const Eigen::Ref<const Eigen::MatrixXd>& data, Index p);

// ---------------------------------------------------------------------------
// Normal / inverse-Wishart, independent priors

struct NiwPrior {
  Eigen::VectorXd beta_mean;  // k = n (n p + 1), stacked by equation
  Eigen::MatrixXd beta_cov;
  double iw_dof = 0.0;
  Eigen::MatrixXd iw_scale;

  /// beta ~ N(0, I_k), Sigma ~ IW(n + 3, I_n).
  static NiwPrior uninformative(Index n, Index p);

  void validate(Index n, Index p) const;
};

PosteriorDraws gibbs_niw(const Eigen::Ref<const Eigen::MatrixXd>& data, Index p, const NiwPrior& prior,
                         Index n_draws, Index burn_in, std::uint64_t seed, Index thin = 1);

/// Inverse-Wishart draw with the given degrees of freedom and scale.
Eigen::MatrixXd draw_inverse_wishart(double dof, const Eigen::MatrixXd& scale, Rng& rng);

// ---------------------------------------------------------------------------
// Asymmetric conjugate prior, one equation at a time

struct AcpPrior {
  double kappa1 = 0.083;      // own lags
  double kappa2 = 0.0024;     // other variables' lags
  double v0 = 0.0;            // IG shape input; n + 2 by default
  Eigen::VectorXd s_sq;       // AR(p) residual variances
  double intercept_var = 100.0;

  /// v0 = n + 2 and s_sq from AR(p) fits on the data.
  static AcpPrior from_data(const Eigen::Ref<const Eigen::MatrixXd>& data, Index p, double kappa1, double kappa2);

  [[nodiscard]] Index n() const { return s_sq.size(); }
  void validate() const;
};

/// Normal-inverse-gamma: theta | s2 ~ N(mean, s2 V), s2 ~ IG(shape, rate).
struct NigPrior {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;  // diagonal of V
  double shape = 0.0;
  double rate = 0.0;
};

struct NigPosterior {
  NigPrior prior;
  Eigen::VectorXd mean;       // posterior mean of theta
  Eigen::MatrixXd precision;  // K, so theta | s2 ~ N(mean, s2 K^{-1})
  double shape = 0.0;
  double rate = 0.0;
  Index observations = 0;
  double log_ml = 0.0;        // log marginal density of the equation's data
};

/// Conjugate update; with zero rows it returns the prior unchanged.
NigPosterior nig_update(const NigPrior& prior, const Eigen::Ref<const Eigen::MatrixXd>& x,
                        const Eigen::Ref<const Eigen::VectorXd>& y);

/// Regressors of equation i (0-based): [-y_0..-y_{i-1} at t, 1, lags], then its regressand.
struct EquationData {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

EquationData equation_data(const VarRegression& reg, Index equation);

/// Prior variance of coefficient k of the lag block of equation i (0-based):
/// k = 0 is the intercept, k = 1 + (l - 1) n + j is lag l of variable j.
double minnesota_variance(const AcpPrior& prior, Index p, Index equation, Index k);

/// Full NIG prior of equation i: alpha block first, then the lag block.
NigPrior acp_equation_prior(const AcpPrior& prior, Index p, Index equation);

struct AcpPosterior {
  Index n = 0;
  Index p = 0;
  std::vector<NigPosterior> equations;

  [[nodiscard]] double log_ml() const;
};

AcpPosterior acp_posterior(const Eigen::Ref<const Eigen::MatrixXd>& data, Index p, const AcpPrior& prior);

double acp_log_marginal_likelihood(const Eigen::Ref<const Eigen::MatrixXd>& data, Index p, const AcpPrior& prior);

/// Posterior parameter means assembled into structural form.
SvarParams acp_posterior_mean(const AcpPosterior& post);

PosteriorDraws acp_draw_params(const AcpPosterior& post, Index n_draws, std::uint64_t seed);

struct ShrinkageSearch {
  double lower = 1e-6;
  double upper = 10.0;
  int grid_points = 15;       // per axis, log-spaced
  double min_step = 1e-3;     // in log10 units
};

struct ShrinkageOptimum {
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double log_ml = 0.0;
};

ShrinkageOptimum optimize_shrinkage(const Eigen::Ref<const Eigen::MatrixXd>& data, Index p,
                                    const AcpPrior& prior_template, const ShrinkageSearch& search = {});

/// Same search restricted to kappa1 = kappa2.
ShrinkageOptimum optimize_shrinkage_symmetric(const Eigen::Ref<const Eigen::MatrixXd>& data, Index p,
                                              const AcpPrior& prior_template, const ShrinkageSearch& search = {});

/// Residual variance of an AR(p) with intercept fitted by OLS, per column.
Eigen::VectorXd ar_residual_variances(const Eigen::Ref<const Eigen::MatrixXd>& data, Index p);

}  // namespace condvar

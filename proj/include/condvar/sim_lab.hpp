#pragma once

// Simulation study: a random stable VAR, dense-covariance reference
// implementations, and a timing harness for the conditional samplers.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "condvar/conditional.hpp"
#include "condvar/var.hpp"

namespace condvar {

struct DgpSpec {
  Index n = 8;
  Index p = 2;
  Index t = 300;
  Index holdout = 0;  // extra periods simulated after the sample
  std::uint64_t seed = 1;

  double intercept = 0.01;
  double own_lag_lo = 0.0;  // first-lag diagonal ~ U(lo, hi)
  double own_lag_hi = 0.5;
  double cross_lag_lo = -0.2;  // first-lag off-diagonal ~ U(lo, hi)
  double cross_lag_hi = 0.2;
  double higher_lag_sd = 0.05;  // higher lags ~ N(0, (sd / p)^2)
  double iw_extra_dof = 10.0;   // Sigma ~ IW(n + extra, a I + b 11')
  double iw_identity_weight = 0.07;
  double iw_ones_weight = 0.03;

  Index warmup = 100;
  int max_redraws = 10;
  double explosive_bound = 1e8;

  void validate() const;
};

struct DgpDraw {
  ReducedParams params;
  Eigen::MatrixXd data;     // t x n
  Eigen::MatrixXd holdout;  // holdout x n, the periods right after the sample
  int redraws = 0;
};

DgpDraw generate_dgp(const DgpSpec& spec);

struct DenseMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline constexpr Index kDenseGuard = 2000;

/// Dense (H^{-1}c, (H'H)^{-1}) conditioned on R y = r by textbook Gaussian
/// conditioning. An empty R returns the unconditional moments.
DenseMoments dense_oracle_equality(const SvarParams& params, const Eigen::Ref<const Eigen::MatrixXd>& history,
                                   Index horizon, const Eigen::MatrixXd& r_matrix, const Eigen::VectorXd& r_values);

DenseMoments dense_oracle_equality(const SvarParams& params, const Eigen::Ref<const Eigen::MatrixXd>& history,
                                   Index horizon, const SelectionMatrix& select, const Eigen::VectorXd& values);

/// Draws from N(mean, cov) with a possibly singular cov (pivoted LDL').
Eigen::MatrixXd sample_dense_gaussian(const DenseMoments& m, Index n_draws, Rng& rng);

// ---------------------------------------------------------------------------
// Benchmark harness

enum class BenchKind { Equality, Inequality };

struct BenchConfig {
  BenchKind kind = BenchKind::Equality;
  Index n = 8;
  Index p = 2;
  Index h = 5;
  Index n_o = 1;
};

struct BenchResult {
  std::string method;
  BenchConfig config;
  double seconds = 0.0;        // wall time for n_draws draws (projected if budgeted)
  double draws_per_sec = 0.0;
  Index draws = 0;             // draws actually made
  Index violations = 0;
};

struct BenchOptions {
  Index n_draws = 1000;
  std::uint64_t seed = 2024;
  bool baselines = true;
  double baseline_budget_seconds = 5.0;  // dense / Gibbs comparators stop early past this
  int repeats = 1;                       // median over repeats of the precision path
  Index gibbs_sweeps = 20;               // sweeps per parameter draw for the Gibbs comparator
};

/// Equality grid: (n, h) in {(8, 5), (15, 20), (40, 30)}, n_o in {1, 3, 5}, p in {2, 4}.
std::vector<BenchConfig> equality_suite();
/// Inequality grid: n in {8, 15}, h = 20, n_o in {1, 3, 5}, p in {2, 4}.
std::vector<BenchConfig> inequality_suite();

/// The constraints of one benchmark cell: the whole path of the first n_o
/// variables, fixed at the held-out data (equality) or boxed at the mean of
/// the last h observations +- 0.1 (inequality).
struct BenchCell {
  SvarParams params;
  Eigen::MatrixXd history;
  ConstraintSet constraints;
};

BenchCell make_bench_cell(const BenchConfig& config, std::uint64_t seed);

std::vector<BenchResult> run_benchmark(const std::vector<BenchConfig>& suite, const BenchOptions& options);

/// Header: method,n,p,h,n_o,seconds,draws_per_sec,violations
void write_bench_table(std::ostream& out, const std::vector<BenchResult>& results);

}  // namespace condvar

#include "condvar/sim_lab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "condvar/error.hpp"
#include "condvar/estimation.hpp"
#include "condvar/tmvn.hpp"

namespace condvar {

void DgpSpec::validate() const {
  require(n >= 1 && p >= 1, ErrorCode::InvalidArgument, "DGP needs n >= 1 and p >= 1");
  require(t > n * p + 1, ErrorCode::InvalidArgument, "DGP needs T > n p + 1");
  require(holdout >= 0 && warmup >= 0, ErrorCode::InvalidArgument, "negative period count");
  require(own_lag_hi > own_lag_lo && cross_lag_hi > cross_lag_lo, ErrorCode::InvalidArgument, "empty uniform range");
  require(higher_lag_sd > 0.0 && iw_extra_dof > 1.0 && iw_identity_weight > 0.0 && iw_ones_weight >= 0.0,
          ErrorCode::InvalidArgument, "DGP scale parameters must be positive");
  require(max_redraws >= 0 && explosive_bound > 0.0, ErrorCode::InvalidArgument, "invalid redraw policy");
}

namespace {

ReducedParams draw_dgp_params(const DgpSpec& spec, Rng& rng) {
  const Index n = spec.n;
  std::uniform_real_distribution<double> own(spec.own_lag_lo, spec.own_lag_hi);
  std::uniform_real_distribution<double> cross(spec.cross_lag_lo, spec.cross_lag_hi);
  ReducedParams r;
  r.b = Eigen::VectorXd::Constant(n, spec.intercept);
  Eigen::MatrixXd b1(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) b1(i, j) = i == j ? own(rng.engine()) : cross(rng.engine());
  }
  r.lags.push_back(b1);
  const double sd = spec.higher_lag_sd / static_cast<double>(spec.p);
  for (Index lag = 2; lag <= spec.p; ++lag) {
    Eigen::MatrixXd b(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) b(i, j) = sd * rng.normal();
    }
    r.lags.push_back(b);
  }
  const Eigen::MatrixXd scale = spec.iw_identity_weight * Eigen::MatrixXd::Identity(n, n) +
                                spec.iw_ones_weight * Eigen::MatrixXd::Ones(n, n);
  r.sigma = draw_inverse_wishart(static_cast<double>(n) + spec.iw_extra_dof, scale, rng);
  return r;
}

// Returns false once any value leaves the explosive bound.
bool simulate(const DgpSpec& spec, const ReducedParams& r, Rng& rng, Eigen::MatrixXd& path) {
  const Index n = spec.n;
  const Index p = spec.p;
  const Index total = spec.warmup + spec.t + spec.holdout;
  const Eigen::MatrixXd chol = r.sigma.llt().matrixL();
  // p zero rows of initial conditions in front
  path = Eigen::MatrixXd::Zero(p + total, n);
  for (Index t = p; t < p + total; ++t) {
    Eigen::VectorXd y = r.b + chol * rng.normal_vector(n);
    for (Index lag = 1; lag <= p; ++lag) y += r.lags[static_cast<std::size_t>(lag - 1)] * path.row(t - lag).transpose();
    if (!y.allFinite() || y.cwiseAbs().maxCoeff() > spec.explosive_bound) return false;
    path.row(t) = y.transpose();
  }
  return true;
}

}  // namespace

DgpDraw generate_dgp(const DgpSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  for (int attempt = 0; attempt <= spec.max_redraws; ++attempt) {
    DgpDraw out;
    out.params = draw_dgp_params(spec, rng);
    Eigen::MatrixXd path;
    if (!simulate(spec, out.params, rng, path)) continue;
    const Index start = spec.p + spec.warmup;
    out.data = path.middleRows(start, spec.t);
    out.holdout = path.middleRows(start + spec.t, spec.holdout);
    out.redraws = attempt;
    return out;
  }
  throw Error(ErrorCode::ExplosiveDraw,
              "simulated series exceeded the explosive bound after " + std::to_string(spec.max_redraws) + " redraws");
}

// ---------------------------------------------------------------------------

DenseMoments dense_oracle_equality(const SvarParams& params, const Eigen::Ref<const Eigen::MatrixXd>& history,
                                   Index horizon, const Eigen::MatrixXd& r_matrix, const Eigen::VectorXd& r_values) {
  const Index nh = params.n() * horizon;
  require(nh <= kDenseGuard, ErrorCode::DimensionGuard,
          "dense oracle limited to nh <= " + std::to_string(kDenseGuard));
  const ForecastSystem f = build_forecast_system(params, history, horizon);
  require(r_matrix.rows() == r_values.size() && (r_matrix.rows() == 0 || r_matrix.cols() == nh),
          ErrorCode::DimensionMismatch, "restriction shape");

  const Eigen::MatrixXd h = f.h.dense();
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(h);
  const Eigen::MatrixXd h_inv = lu.inverse();
  DenseMoments m;
  m.mean = h_inv * f.c;
  m.cov = h_inv * h_inv.transpose();
  if (r_matrix.rows() == 0) return m;

  // mean + S R' (R S R')^{-1} (r - R mean), cov - S R' (R S R')^{-1} R S
  const Eigen::MatrixXd sr = m.cov * r_matrix.transpose();
  const Eigen::MatrixXd rsr = r_matrix * sr;
  const Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (rsr + rsr.transpose()));
  require(llt.info() == Eigen::Success, ErrorCode::RankDeficientR, "restriction covariance is singular");
  m.mean += sr * llt.solve(r_values - r_matrix * m.mean);
  m.cov -= sr * llt.solve(sr.transpose());
  m.cov = 0.5 * (m.cov + m.cov.transpose());
  return m;
}

DenseMoments dense_oracle_equality(const SvarParams& params, const Eigen::Ref<const Eigen::MatrixXd>& history,
                                   Index horizon, const SelectionMatrix& select, const Eigen::VectorXd& values) {
  if (select.empty()) return dense_oracle_equality(params, history, horizon, Eigen::MatrixXd(0, 0), values);
  return dense_oracle_equality(params, history, horizon, select.dense(), values);
}

Eigen::MatrixXd sample_dense_gaussian(const DenseMoments& m, Index n_draws, Rng& rng) {
  const Index d = m.mean.size();
  require(m.cov.rows() == d && m.cov.cols() == d, ErrorCode::DimensionMismatch, "covariance shape");
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(m.cov);
  const Eigen::VectorXd sd = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd l = ldlt.matrixL();
  Eigen::MatrixXd out(n_draws, d);
  for (Index i = 0; i < n_draws; ++i) {
    const Eigen::VectorXd z = l * sd.cwiseProduct(rng.normal_vector(d));
    // P' L D^{1/2} z
    out.row(i) = (m.mean + ldlt.transpositionsP().transpose() * z).transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<BenchConfig> equality_suite() {
  std::vector<BenchConfig> out;
  for (Index p : {2, 4}) {
    for (auto [n, h] : {std::pair<Index, Index>{8, 5}, {15, 20}, {40, 30}}) {
      for (Index n_o : {1, 3, 5}) out.push_back({BenchKind::Equality, n, p, h, n_o});
    }
  }
  return out;
}

std::vector<BenchConfig> inequality_suite() {
  std::vector<BenchConfig> out;
  for (Index p : {2, 4}) {
    for (Index n : {8, 15}) {
      for (Index n_o : {1, 3, 5}) out.push_back({BenchKind::Inequality, n, p, 20, n_o});
    }
  }
  return out;
}

BenchCell make_bench_cell(const BenchConfig& config, std::uint64_t seed) {
  require(config.n_o >= 1 && config.n_o <= config.n, ErrorCode::InvalidArgument, "n_o must lie in [1, n]");
  DgpSpec spec;
  spec.n = config.n;
  spec.p = config.p;
  spec.holdout = config.h;
  spec.seed = seed;
  const DgpDraw dgp = generate_dgp(spec);

  BenchCell cell;
  cell.params = reduced_to_structural(dgp.params);
  cell.history = dgp.data.bottomRows(config.p);
  const Index nh = config.n * config.h;
  std::vector<Index> coords;
  for (Index step = 0; step < config.h; ++step) {
    for (Index var = 0; var < config.n_o; ++var) coords.push_back(step * config.n + var);
  }
  const Index m = static_cast<Index>(coords.size());
  if (config.kind == BenchKind::Equality) {
    Eigen::VectorXd values(m);
    for (Index k = 0; k < m; ++k) values(k) = dgp.holdout(coords[k] / config.n, coords[k] % config.n);
    cell.constraints.equality = EqualityConstraints{SelectionMatrix(nh, coords), values};
  } else {
    const Eigen::RowVectorXd avg = dgp.data.bottomRows(config.h).colwise().mean();
    Eigen::VectorXd lo(m);
    Eigen::VectorXd hi(m);
    for (Index k = 0; k < m; ++k) {
      lo(k) = avg(coords[k] % config.n) - 0.1;
      hi(k) = avg(coords[k] % config.n) + 0.1;
    }
    cell.constraints.inequality = InequalityConstraints{SelectionMatrix(nh, coords), lo, hi};
  }
  return cell;
}

namespace {

using Clock = std::chrono::steady_clock;

struct Timed {
  Eigen::MatrixXd draws;
  double seconds = 0.0;
};

/// One forecast draw per (re)built system, as under a fresh parameter draw
/// each time; stops early once the budget is spent.
template <typename DrawOne>
Timed time_per_system(const BenchCell& cell, Index horizon, Index n_draws, double budget, DrawOne&& draw_one) {
  Timed out;
  out.draws.resize(n_draws, cell.params.n() * horizon);
  const auto start = Clock::now();
  Index made = 0;
  for (; made < n_draws; ++made) {
    out.draws.row(made) = draw_one(static_cast<std::uint64_t>(made));
    if (budget > 0.0 && std::chrono::duration<double>(Clock::now() - start).count() > budget) {
      ++made;
      break;
    }
  }
  out.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  out.draws.conservativeResize(made, Eigen::NoChange);
  return out;
}

BenchResult summarize(const std::string& method, const BenchConfig& config, const Timed& t, Index n_draws,
                      const ConstraintSet& cs) {
  BenchResult r;
  r.method = method;
  r.config = config;
  r.draws = t.draws.rows();
  r.draws_per_sec = t.seconds > 0.0 ? static_cast<double>(r.draws) / t.seconds : 0.0;
  r.seconds = r.draws_per_sec > 0.0 ? static_cast<double>(n_draws) / r.draws_per_sec
                                    : std::numeric_limits<double>::infinity();
  ForecastDraws d;
  d.draws = t.draws;
  r.violations = count_violations(d, cs, 1e-6);
  return r;
}

}  // namespace

std::vector<BenchResult> run_benchmark(const std::vector<BenchConfig>& suite, const BenchOptions& options) {
  require(options.n_draws >= 1 && options.repeats >= 1, ErrorCode::InvalidArgument, "invalid benchmark options");
  std::vector<BenchResult> results;
  for (std::size_t c = 0; c < suite.size(); ++c) {
    const BenchConfig& config = suite[c];
    const BenchCell cell = make_bench_cell(config, derive_seed(options.seed, c));
    const ConstraintSet& cs = cell.constraints;
    const std::uint64_t base = derive_seed(options.seed ^ 0x5bd1e995ULL, c);
    const Index h = config.h;

    auto precision_draw = [&](std::uint64_t i) -> Eigen::RowVectorXd {
      const ForecastSystem f = build_forecast_system(cell.params, cell.history, h);
      return draw_constrained(f, cs, 1, derive_seed(base, i)).draws.row(0);
    };
    // warm-up call, then the median over repeats
    precision_draw(0);
    std::vector<Timed> runs;
    for (int rep = 0; rep < options.repeats; ++rep) {
      runs.push_back(time_per_system(cell, h, options.n_draws, 0.0, precision_draw));
    }
    std::sort(runs.begin(), runs.end(), [](const Timed& a, const Timed& b) { return a.seconds < b.seconds; });
    results.push_back(summarize("precision", config, runs[runs.size() / 2], options.n_draws, cs));

    if (!options.baselines) continue;
    if (config.kind == BenchKind::Equality) {
      if (config.n * h > kDenseGuard) continue;
      auto dense_draw = [&](std::uint64_t i) -> Eigen::RowVectorXd {
        const DenseMoments m =
            dense_oracle_equality(cell.params, cell.history, h, cs.equality->select, cs.equality->values);
        Rng rng(derive_seed(base, i));
        return sample_dense_gaussian(m, 1, rng).row(0);
      };
      dense_draw(0);
      results.push_back(summarize("dense", config,
                                  time_per_system(cell, h, options.n_draws, options.baseline_budget_seconds, dense_draw),
                                  options.n_draws, cs));
    } else {
      const auto& ineq = *cs.inequality;
      auto gibbs_draw = [&](std::uint64_t i) -> Eigen::RowVectorXd {
        const ForecastSystem f = build_forecast_system(cell.params, cell.history, h);
        const SystemSolver solver(f);
        TruncatedGaussianSpec spec;
        spec.mean = solver.mean();
        spec.matrix = solver.precision().dense();
        spec.form = MatrixForm::Precision;
        const Index nh = f.size();
        spec.lower = Eigen::VectorXd::Constant(nh, -std::numeric_limits<double>::infinity());
        spec.upper = Eigen::VectorXd::Constant(nh, std::numeric_limits<double>::infinity());
        for (Index k = 0; k < ineq.select.rows(); ++k) {
          spec.lower(ineq.select[k]) = ineq.lower(k);
          spec.upper(ineq.select[k]) = ineq.upper(k);
        }
        Rng rng(derive_seed(base, i));
        return sample_gibbs(spec, 1, options.gibbs_sweeps, rng).row(0);
      };
      gibbs_draw(0);
      results.push_back(summarize("gibbs", config,
                                  time_per_system(cell, h, options.n_draws, options.baseline_budget_seconds, gibbs_draw),
                                  options.n_draws, cs));
    }
  }
  return results;
}

void write_bench_table(std::ostream& out, const std::vector<BenchResult>& results) {
  out << "method,n,p,h,n_o,seconds,draws_per_sec,violations\n";
  for (const auto& r : results) {
    out << r.method << ',' << r.config.n << ',' << r.config.p << ',' << r.config.h << ',' << r.config.n_o << ','
        << r.seconds << ',' << r.draws_per_sec << ',' << r.violations << '\n';
  }
}

}  // namespace condvar

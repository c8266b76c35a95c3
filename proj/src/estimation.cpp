#include "condvar/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "condvar/error.hpp"

namespace condvar {

namespace {

Eigen::LLT<Eigen::MatrixXd> spd_factor(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  require(llt.info() == Eigen::Success, ErrorCode::NotPositiveDefinite, std::string(what) + " is not positive definite");
  return llt;
}

void require_data(const Eigen::Ref<const Eigen::MatrixXd>& data, Index p) {
  require(p >= 1, ErrorCode::InvalidArgument, "lag length must be >= 1");
  require(data.cols() >= 1, ErrorCode::InvalidArgument, "data has no columns");
  require(data.allFinite(), ErrorCode::InvalidArgument, "data must be finite");
}

/// Sufficient statistics of one equation, reused across prior settings.
struct EquationStats {
  Eigen::MatrixXd xtx;
  Eigen::VectorXd xty;
  double yty = 0.0;
  Index rows = 0;
};

EquationStats equation_stats(const VarRegression& reg, Index equation) {
  const EquationData d = equation_data(reg, equation);
  EquationStats s;
  s.xtx = d.x.transpose() * d.x;
  s.xty = d.x.transpose() * d.y;
  s.yty = d.y.squaredNorm();
  s.rows = d.x.rows();
  return s;
}

NigPosterior nig_update_stats(const NigPrior& prior, const EquationStats& s) {
  require(prior.shape > 0.0 && prior.rate > 0.0, ErrorCode::InvalidArgument, "inverse-gamma shape and rate must be positive");
  require((prior.var.array() > 0.0).all(), ErrorCode::InvalidArgument, "prior variances must be positive");
  NigPosterior post;
  post.prior = prior;
  post.observations = s.rows;
  const Eigen::VectorXd v_inv = prior.var.cwiseInverse();
  if (s.rows == 0) {
    post.mean = prior.mean;
    post.precision = v_inv.asDiagonal();
    post.shape = prior.shape;
    post.rate = prior.rate;
    post.log_ml = 0.0;
    return post;
  }
  post.precision = s.xtx;
  post.precision.diagonal() += v_inv;
  const auto llt = spd_factor(post.precision, "posterior precision");
  post.mean = llt.solve(v_inv.cwiseProduct(prior.mean) + s.xty);
  const double quad = s.yty + prior.mean.dot(v_inv.cwiseProduct(prior.mean)) - post.mean.dot(post.precision * post.mean);
  post.shape = prior.shape + 0.5 * static_cast<double>(s.rows);
  post.rate = prior.rate + 0.5 * quad;
  require(post.rate > 0.0, ErrorCode::NotPositiveDefinite, "posterior inverse-gamma rate is not positive");

  const Eigen::MatrixXd l = llt.matrixL();
  const double logdet_k = 2.0 * l.diagonal().array().log().sum();
  const double logdet_v = prior.var.array().log().sum();
  const double t = static_cast<double>(s.rows);
  post.log_ml = -0.5 * t * std::log(2.0 * std::numbers::pi) - 0.5 * logdet_v - 0.5 * logdet_k +
                prior.shape * std::log(prior.rate) - post.shape * std::log(post.rate) + std::lgamma(post.shape) -
                std::lgamma(prior.shape);
  return post;
}

void require_enough_rows(const Eigen::Ref<const Eigen::MatrixXd>& data, Index p) {
  const Index n = data.cols();
  require(data.rows() > n * p + n, ErrorCode::InsufficientData,
          "need more than n p + n = " + std::to_string(n * p + n) + " observations, got " +
              std::to_string(data.rows()));
}

/// Cached per-equation statistics; evaluates log-ML for any (kappa1, kappa2).
class LogMlSurface {
 public:
  LogMlSurface(const Eigen::Ref<const Eigen::MatrixXd>& data, Index p, AcpPrior prior)
      : p_(p), prior_(std::move(prior)) {
    require_data(data, p);
    require_enough_rows(data, p);
    const VarRegression reg = var_regression(data, p);
    for (Index i = 0; i < data.cols(); ++i) stats_.push_back(equation_stats(reg, i));
  }

  double operator()(double kappa1, double kappa2) const {
    AcpPrior prior = prior_;
    prior.kappa1 = kappa1;
    prior.kappa2 = kappa2;
    double total = 0.0;
    for (Index i = 0; i < static_cast<Index>(stats_.size()); ++i) {
      total += nig_update_stats(acp_equation_prior(prior, p_, i), stats_[static_cast<std::size_t>(i)]).log_ml;
    }
    return total;
  }

 private:
  Index p_;
  AcpPrior prior_;
  std::vector<EquationStats> stats_;
};

}  // namespace

VarRegression var_regression(const Eigen::Ref<const Eigen::MatrixXd>& data, Index p) {
  require_data(data, p);
  const Index t_total = data.rows();
  const Index n = data.cols();
  require(t_total > p, ErrorCode::InsufficientData, "fewer observations than lags");
  const Index rows = t_total - p;
  VarRegression reg;
  reg.y = data.bottomRows(rows);
  reg.x.resize(rows, 1 + n * p);
  reg.x.col(0).setOnes();
  for (Index lag = 1; lag <= p; ++lag) reg.x.middleCols(1 + (lag - 1) * n, n) = data.middleRows(p - lag, rows);
  return reg;
}

// ---------------------------------------------------------------------------

NiwPrior NiwPrior::uninformative(Index n, Index p) {
  const Index k = n * (n * p + 1);
  NiwPrior prior;
  prior.beta_mean = Eigen::VectorXd::Zero(k);
  prior.beta_cov = Eigen::MatrixXd::Identity(k, k);
  prior.iw_dof = static_cast<double>(n + 3);
  prior.iw_scale = Eigen::MatrixXd::Identity(n, n);
  return prior;
}

void NiwPrior::validate(Index n, Index p) const {
  const Index k = n * (n * p + 1);
  require(beta_mean.size() == k, ErrorCode::DimensionMismatch, "beta prior mean must have n (n p + 1) entries");
  require(beta_cov.rows() == k && beta_cov.cols() == k, ErrorCode::DimensionMismatch, "beta prior covariance shape");
  require(iw_scale.rows() == n && iw_scale.cols() == n, ErrorCode::DimensionMismatch, "inverse-Wishart scale shape");
  require(iw_dof > static_cast<double>(n + 1), ErrorCode::InvalidArgument, "inverse-Wishart dof must exceed n + 1");
  spd_factor(beta_cov, "beta prior covariance");
  spd_factor(iw_scale, "inverse-Wishart scale");
}

Eigen::MatrixXd draw_inverse_wishart(double dof, const Eigen::MatrixXd& scale, Rng& rng) {
  const Index n = scale.rows();
  // Sigma^{-1} ~ Wishart(dof, scale^{-1}) by the Bartlett decomposition
  const Eigen::MatrixXd scale_inv = spd_factor(scale, "inverse-Wishart scale").solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd l = spd_factor(0.5 * (scale_inv + scale_inv.transpose()), "inverse scale").matrixL();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    a(i, i) = std::sqrt(rng.chi_squared(dof - static_cast<double>(i)));
    for (Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const Eigen::MatrixXd la = l * a;
  const Eigen::MatrixXd w = la * la.transpose();
  Eigen::MatrixXd sigma = spd_factor(w, "Wishart draw").solve(Eigen::MatrixXd::Identity(n, n));
  return 0.5 * (sigma + sigma.transpose());
}

PosteriorDraws gibbs_niw(const Eigen::Ref<const Eigen::MatrixXd>& data, Index p, const NiwPrior& prior,
                         Index n_draws, Index burn_in, std::uint64_t seed, Index thin) {
  require_data(data, p);
  const Index n = data.cols();
  prior.validate(n, p);
  require(data.rows() > n * p + 1, ErrorCode::InsufficientData, "need more than n p + 1 observations");
  require(n_draws >= 1 && burn_in >= 0 && thin >= 1, ErrorCode::InvalidArgument, "invalid draw counts");

  const VarRegression reg = var_regression(data, p);
  const Index kx = reg.x.cols();
  const Index k = kx * n;
  const Index t_eff = reg.y.rows();
  const Eigen::MatrixXd xtx = reg.x.transpose() * reg.x;
  const Eigen::MatrixXd xty = reg.x.transpose() * reg.y;
  const auto prior_llt = spd_factor(prior.beta_cov, "beta prior covariance");
  const Eigen::MatrixXd v0_inv = prior_llt.solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::VectorXd v0_inv_mean = v0_inv * prior.beta_mean;

  Rng rng(seed);
  // start from the OLS residual covariance when it exists
  Eigen::MatrixXd sigma = prior.iw_scale / std::max(1.0, prior.iw_dof - static_cast<double>(n) - 1.0);
  {
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(reg.x);
    if (qr.rank() == kx && t_eff > kx) {
      const Eigen::MatrixXd resid = reg.y - reg.x * qr.solve(reg.y);
      const Eigen::MatrixXd s = resid.transpose() * resid / static_cast<double>(t_eff - kx);
      if (Eigen::LLT<Eigen::MatrixXd>(s).info() == Eigen::Success) sigma = s;
    }
  }

  PosteriorDraws out;
  out.burn_in = burn_in;
  out.thin = thin;
  const Index total = burn_in + n_draws * thin;
  Eigen::MatrixXd precision(k, k);
  for (Index it = 0; it < total; ++it) {
    const Eigen::MatrixXd sigma_inv = spd_factor(sigma, "Sigma").solve(Eigen::MatrixXd::Identity(n, n));
    // beta | Sigma
    for (Index a = 0; a < n; ++a) {
      for (Index b = 0; b < n; ++b) precision.block(a * kx, b * kx, kx, kx) = sigma_inv(a, b) * xtx;
    }
    precision += v0_inv;
    const Eigen::MatrixXd rhs_mat = xty * sigma_inv;
    const Eigen::VectorXd rhs = v0_inv_mean + Eigen::Map<const Eigen::VectorXd>(rhs_mat.data(), k);
    const auto llt = spd_factor(precision, "coefficient posterior precision");
    const Eigen::VectorXd beta =
        llt.solve(rhs) + llt.matrixU().solve(rng.normal_vector(k));
    const Eigen::MatrixXd coef = Eigen::Map<const Eigen::MatrixXd>(beta.data(), kx, n);

    // Sigma | beta
    const Eigen::MatrixXd resid = reg.y - reg.x * coef;
    sigma = draw_inverse_wishart(prior.iw_dof + static_cast<double>(t_eff),
                                 prior.iw_scale + resid.transpose() * resid, rng);

    if (it < burn_in || (it - burn_in) % thin != 0) continue;
    ReducedParams r;
    r.b = coef.row(0).transpose();
    for (Index lag = 1; lag <= p; ++lag) r.lags.push_back(coef.middleRows(1 + (lag - 1) * n, n).transpose());
    r.sigma = sigma;
    out.draws.push_back(reduced_to_structural(r));
    out.reduced.push_back(std::move(r));
    out.seeds.push_back(seed);
  }
  return out;
}

// ---------------------------------------------------------------------------

AcpPrior AcpPrior::from_data(const Eigen::Ref<const Eigen::MatrixXd>& data, Index p, double kappa1, double kappa2) {
  AcpPrior prior;
  prior.kappa1 = kappa1;
  prior.kappa2 = kappa2;
  prior.v0 = static_cast<double>(data.cols() + 2);
  prior.s_sq = ar_residual_variances(data, p);
  return prior;
}

void AcpPrior::validate() const {
  require(kappa1 > 0.0 && kappa2 > 0.0, ErrorCode::InvalidArgument, "shrinkage parameters must be positive");
  require(s_sq.size() >= 1, ErrorCode::InvalidArgument, "s_sq is empty");
  require((s_sq.array() > 0.0).all() && s_sq.allFinite(), ErrorCode::InvalidArgument,
          "AR residual variances must be positive");
  require(intercept_var > 0.0, ErrorCode::InvalidArgument, "intercept prior variance must be positive");
  // smallest shape belongs to the first equation
  require(v0 + 1.0 - static_cast<double>(n()) > 0.0, ErrorCode::InvalidArgument,
          "v0 gives a non-positive inverse-gamma shape");
}

NigPosterior nig_update(const NigPrior& prior, const Eigen::Ref<const Eigen::MatrixXd>& x,
                        const Eigen::Ref<const Eigen::VectorXd>& y) {
  const Index k = prior.mean.size();
  require(prior.var.size() == k, ErrorCode::DimensionMismatch, "prior variance length");
  require(x.cols() == k && x.rows() == y.size(), ErrorCode::DimensionMismatch, "regression data shape");
  EquationStats s;
  s.rows = x.rows();
  if (s.rows > 0) {
    s.xtx = x.transpose() * x;
    s.xty = x.transpose() * y;
    s.yty = y.squaredNorm();
  }
  return nig_update_stats(prior, s);
}

EquationData equation_data(const VarRegression& reg, Index equation) {
  const Index n = reg.y.cols();
  require(equation >= 0 && equation < n, ErrorCode::IndexOutOfRange, "equation index out of range");
  EquationData d;
  d.x.resize(reg.x.rows(), equation + reg.x.cols());
  d.x.leftCols(equation) = -reg.y.leftCols(equation);
  d.x.rightCols(reg.x.cols()) = reg.x;
  d.y = reg.y.col(equation);
  return d;
}

double minnesota_variance(const AcpPrior& prior, Index p, Index equation, Index k) {
  const Index n = prior.n();
  require(equation >= 0 && equation < n, ErrorCode::IndexOutOfRange, "equation index out of range");
  require(k >= 0 && k < 1 + n * p, ErrorCode::IndexOutOfRange, "coefficient index out of range");
  if (k == 0) return prior.intercept_var;
  const Index lag = (k - 1) / n + 1;
  const Index var = (k - 1) % n;
  const double l2 = static_cast<double>(lag * lag);
  if (var == equation) return prior.kappa1 / (l2 * prior.s_sq(equation));
  return prior.kappa2 / (l2 * prior.s_sq(var));
}

NigPrior acp_equation_prior(const AcpPrior& prior, Index p, Index equation) {
  prior.validate();
  const Index n = prior.n();
  require(equation >= 0 && equation < n, ErrorCode::IndexOutOfRange, "equation index out of range");
  const Index lag_block = 1 + n * p;
  NigPrior out;
  out.mean = Eigen::VectorXd::Zero(equation + lag_block);
  out.var.resize(equation + lag_block);
  for (Index j = 0; j < equation; ++j) out.var(j) = 1.0 / prior.s_sq(j);
  for (Index k = 0; k < lag_block; ++k) out.var(equation + k) = minnesota_variance(prior, p, equation, k);
  out.mean(equation + 1 + equation) = 1.0;  // first own lag
  out.shape = 0.5 * (prior.v0 + static_cast<double>(equation + 1) - static_cast<double>(n));
  out.rate = 0.5 * prior.s_sq(equation);
  require(out.shape > 0.0, ErrorCode::InvalidArgument, "inverse-gamma shape must be positive");
  return out;
}

double AcpPosterior::log_ml() const {
  double total = 0.0;
  for (const auto& e : equations) total += e.log_ml;
  return total;
}

AcpPosterior acp_posterior(const Eigen::Ref<const Eigen::MatrixXd>& data, Index p, const AcpPrior& prior) {
  require_data(data, p);
  prior.validate();
  require(prior.n() == data.cols(), ErrorCode::DimensionMismatch, "prior and data disagree on n");
  require_enough_rows(data, p);
  const VarRegression reg = var_regression(data, p);
  AcpPosterior post;
  post.n = data.cols();
  post.p = p;
  for (Index i = 0; i < post.n; ++i) {
    post.equations.push_back(nig_update_stats(acp_equation_prior(prior, p, i), equation_stats(reg, i)));
  }
  return post;
}

double acp_log_marginal_likelihood(const Eigen::Ref<const Eigen::MatrixXd>& data, Index p, const AcpPrior& prior) {
  return acp_posterior(data, p, prior).log_ml();
}

namespace {

SvarParams assemble(Index n, Index p, const std::vector<Eigen::VectorXd>& coef, const Eigen::VectorXd& variances) {
  SvarParams s;
  s.a0 = Eigen::MatrixXd::Identity(n, n);
  s.a.resize(n);
  s.lags.assign(static_cast<std::size_t>(p), Eigen::MatrixXd::Zero(n, n));
  for (Index i = 0; i < n; ++i) {
    const Eigen::VectorXd& c = coef[static_cast<std::size_t>(i)];
    for (Index j = 0; j < i; ++j) s.a0(i, j) = c(j);
    s.a(i) = c(i);
    for (Index lag = 1; lag <= p; ++lag) {
      for (Index j = 0; j < n; ++j) s.lags[static_cast<std::size_t>(lag - 1)](i, j) = c(i + 1 + (lag - 1) * n + j);
    }
  }
  s.shock_scale = variances;
  return s;
}

}  // namespace

SvarParams acp_posterior_mean(const AcpPosterior& post) {
  std::vector<Eigen::VectorXd> coef;
  Eigen::VectorXd var(post.n);
  for (Index i = 0; i < post.n; ++i) {
    const auto& e = post.equations[static_cast<std::size_t>(i)];
    coef.push_back(e.mean);
    var(i) = e.shape > 1.0 ? e.rate / (e.shape - 1.0) : e.rate / e.shape;
  }
  return assemble(post.n, post.p, coef, var);
}

PosteriorDraws acp_draw_params(const AcpPosterior& post, Index n_draws, std::uint64_t seed) {
  require(n_draws >= 1, ErrorCode::InvalidArgument, "number of draws must be >= 1");
  require(static_cast<Index>(post.equations.size()) == post.n && post.n >= 1, ErrorCode::InvalidArgument,
          "posterior is empty");
  std::vector<Eigen::MatrixXd> upper;  // L' with K = L L'
  for (const auto& e : post.equations) upper.push_back(spd_factor(e.precision, "posterior precision").matrixU());

  PosteriorDraws out;
  std::vector<Eigen::VectorXd> coef(static_cast<std::size_t>(post.n));
  Eigen::VectorXd var(post.n);
  for (Index d = 0; d < n_draws; ++d) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(d));
    Rng rng(s);
    for (Index i = 0; i < post.n; ++i) {
      const auto& e = post.equations[static_cast<std::size_t>(i)];
      const double sigma2 = 1.0 / rng.gamma(e.shape, e.rate);
      const auto& u = upper[static_cast<std::size_t>(i)];
      coef[static_cast<std::size_t>(i)] =
          e.mean + std::sqrt(sigma2) * u.triangularView<Eigen::Upper>().solve(rng.normal_vector(e.mean.size()));
      var(i) = sigma2;
    }
    SvarParams params = assemble(post.n, post.p, coef, var);
    out.reduced.push_back(structural_to_reduced(params));
    out.draws.push_back(std::move(params));
    out.seeds.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct SearchAxis {
  double lo;
  double hi;
  double clamp(double x) const { return std::clamp(x, lo, hi); }
};

}  // namespace

ShrinkageOptimum optimize_shrinkage(const Eigen::Ref<const Eigen::MatrixXd>& data, Index p,
                                    const AcpPrior& prior_template, const ShrinkageSearch& search) {
  require(search.lower > 0.0 && search.upper > search.lower && search.grid_points >= 2 && search.min_step > 0.0,
          ErrorCode::InvalidArgument, "invalid shrinkage search settings");
  const LogMlSurface surface(data, p, prior_template);
  const SearchAxis axis{std::log10(search.lower), std::log10(search.upper)};
  const double spacing = (axis.hi - axis.lo) / (search.grid_points - 1);
  auto eval = [&](double u1, double u2) { return surface(std::pow(10.0, u1), std::pow(10.0, u2)); };

  double best_u1 = axis.lo;
  double best_u2 = axis.lo;
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < search.grid_points; ++a) {
    for (int b = 0; b < search.grid_points; ++b) {
      const double u1 = axis.lo + a * spacing;
      const double u2 = axis.lo + b * spacing;
      const double v = eval(u1, u2);
      if (v > best) {
        best = v;
        best_u1 = u1;
        best_u2 = u2;
      }
    }
  }
  // compass search in log10 space
  for (double step = 0.5 * spacing; step >= search.min_step;) {
    double cand_u1 = best_u1;
    double cand_u2 = best_u2;
    double cand = best;
    const double moves[4][2] = {{step, 0.0}, {-step, 0.0}, {0.0, step}, {0.0, -step}};
    for (const auto& m : moves) {
      const double u1 = axis.clamp(best_u1 + m[0]);
      const double u2 = axis.clamp(best_u2 + m[1]);
      const double v = eval(u1, u2);
      if (v > cand) {
        cand = v;
        cand_u1 = u1;
        cand_u2 = u2;
      }
    }
    if (cand > best) {
      best = cand;
      best_u1 = cand_u1;
      best_u2 = cand_u2;
    } else {
      step *= 0.5;
    }
  }
  return {std::pow(10.0, best_u1), std::pow(10.0, best_u2), best};
}

ShrinkageOptimum optimize_shrinkage_symmetric(const Eigen::Ref<const Eigen::MatrixXd>& data, Index p,
                                              const AcpPrior& prior_template, const ShrinkageSearch& search) {
  require(search.lower > 0.0 && search.upper > search.lower && search.grid_points >= 2 && search.min_step > 0.0,
          ErrorCode::InvalidArgument, "invalid shrinkage search settings");
  const LogMlSurface surface(data, p, prior_template);
  const SearchAxis axis{std::log10(search.lower), std::log10(search.upper)};
  const double spacing = (axis.hi - axis.lo) / (search.grid_points - 1);
  auto eval = [&](double u) {
    const double k = std::pow(10.0, u);
    return surface(k, k);
  };
  double best_u = axis.lo;
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < search.grid_points; ++a) {
    const double u = axis.lo + a * spacing;
    const double v = eval(u);
    if (v > best) {
      best = v;
      best_u = u;
    }
  }
  for (double step = 0.5 * spacing; step >= search.min_step;) {
    const double up = axis.clamp(best_u + step);
    const double down = axis.clamp(best_u - step);
    const double vu = eval(up);
    const double vd = eval(down);
    if (vu > best && vu >= vd) {
      best = vu;
      best_u = up;
    } else if (vd > best) {
      best = vd;
      best_u = down;
    } else {
      step *= 0.5;
    }
  }
  const double k = std::pow(10.0, best_u);
  return {k, k, best};
}

Eigen::VectorXd ar_residual_variances(const Eigen::Ref<const Eigen::MatrixXd>& data, Index p) {
  require_data(data, p);
  const Index rows = data.rows() - p;
  require(rows > p + 1, ErrorCode::InsufficientData, "too few observations for the AR fits");
  Eigen::VectorXd out(data.cols());
  Eigen::MatrixXd x(rows, p + 1);
  for (Index j = 0; j < data.cols(); ++j) {
    x.col(0).setOnes();
    for (Index lag = 1; lag <= p; ++lag) x.col(lag) = data.col(j).segment(p - lag, rows);
    const Eigen::VectorXd y = data.col(j).tail(rows);
    const Eigen::VectorXd coef = x.colPivHouseholderQr().solve(y);
    out(j) = (y - x * coef).squaredNorm() / static_cast<double>(rows - p - 1);
  }
  return out;
}

}  // namespace condvar

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "condvar/estimation.hpp"
#include "condvar/sim_lab.hpp"
#include "estimation_oracles.hpp"
#include "oracles.hpp"

using condvar::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

using oracle::ar_variances;
using oracle::build_equation;
using oracle::Eq;
using oracle::equation_prior;
using oracle::log_ig;
using oracle::log_mvn;
using oracle::Nig;
using oracle::simulate_var;

TEST_CASE("minnesota variance schedule") {
  condvar::AcpPrior prior;
  prior.kappa1 = 0.083;
  prior.kappa2 = 0.0024;
  prior.v0 = 4.0;
  prior.s_sq = (VectorXd(2) << 1.0, 4.0).finished();
  CHECK(condvar::minnesota_variance(prior, 2, 0, 0) == 100.0);
  CHECK(condvar::minnesota_variance(prior, 2, 0, 1) == doctest::Approx(0.083));
  // lag 2 of variable 1 in equation 0
  CHECK(condvar::minnesota_variance(prior, 2, 0, 1 + 2 + 1) == doctest::Approx(0.00015));
  CHECK_THROWS_AS(condvar::minnesota_variance(prior, 2, 0, 5), condvar::Error);
  CHECK_THROWS_AS(condvar::minnesota_variance(prior, 2, 2, 1), condvar::Error);
}

TEST_CASE("AR residual variances match an OLS oracle") {
  const MatrixXd data = simulate_var(3, 2, 120, 31);
  CHECK(oracle::max_abs(condvar::ar_residual_variances(data, 2) - ar_variances(data, 2)) < 1e-10);
}

TEST_CASE("reference shrinkage configuration is valid") {
  const MatrixXd data = simulate_var(3, 2, 100, 32);
  const condvar::AcpPrior prior = condvar::AcpPrior::from_data(data, 2, 0.083, 0.0024);
  CHECK(prior.v0 == 5.0);
  CHECK_NOTHROW(prior.validate());
  CHECK_NOTHROW(condvar::acp_posterior(data, 2, prior));
  condvar::AcpPrior bad = prior;
  bad.v0 = 1.0;  // first equation shape (v0 + 1 - n) / 2 <= 0
  CHECK_THROWS_AS(bad.validate(), condvar::Error);
}

TEST_CASE("conjugate posterior mean matches a dense closed form") {
  const MatrixXd data = simulate_var(2, 1, 30, 33);
  const condvar::AcpPrior prior = condvar::AcpPrior::from_data(data, 1, 0.2, 0.05);
  const condvar::AcpPosterior post = condvar::acp_posterior(data, 1, prior);
  const VectorXd s_sq = ar_variances(data, 1);
  for (Index i = 0; i < 2; ++i) {
    const Eq e = build_equation(data, 1, i);
    const Nig pr = equation_prior(s_sq, 1, i, 0.2, 0.05, 4.0);
    const MatrixXd v_inv = pr.var.cwiseInverse().asDiagonal();
    const MatrixXd k = v_inv + e.x.transpose() * e.x;
    const VectorXd mean = k.ldlt().solve(v_inv * pr.mean + e.x.transpose() * e.y);
    CHECK(oracle::max_abs(post.equations[static_cast<std::size_t>(i)].mean - mean) < 1e-8);
    CHECK(oracle::max_abs(post.equations[static_cast<std::size_t>(i)].precision - k) < 1e-8 * k.norm());
  }
}

TEST_CASE("flat prior on a single equation approaches OLS") {
  const MatrixXd data = simulate_var(1, 2, 200, 34);
  const Eq e = build_equation(data, 2, 0);
  const VectorXd ols = (e.x.transpose() * e.x).ldlt().solve(e.x.transpose() * e.y);
  double previous = INFINITY;
  for (double k1 : {1.0, 100.0, 1e4, 1e6}) {
    condvar::AcpPrior prior = condvar::AcpPrior::from_data(data, 2, k1, k1);
    prior.intercept_var = k1 * 100.0;
    const double gap = oracle::max_abs(condvar::acp_posterior(data, 2, prior).equations[0].mean - ols);
    CHECK(gap <= previous);
    previous = gap;
  }
  CHECK(previous < 1e-4);
}

TEST_CASE("log marginal likelihood satisfies the conjugate identity") {
  const MatrixXd data = simulate_var(2, 1, 30, 35);
  const condvar::AcpPrior prior = condvar::AcpPrior::from_data(data, 1, 0.083, 0.0024);
  const double log_ml = condvar::acp_log_marginal_likelihood(data, 1, prior);
  const VectorXd s_sq = ar_variances(data, 1);
  std::mt19937_64 gen(36);
  std::uniform_real_distribution<double> u(0.3, 3.0);
  for (int point = 0; point < 10; ++point) {
    double total = 0.0;
    for (Index i = 0; i < 2; ++i) {
      const Eq e = build_equation(data, 1, i);
      const Nig pr = equation_prior(s_sq, 1, i, 0.083, 0.0024, 4.0);
      const MatrixXd v_inv = pr.var.cwiseInverse().asDiagonal();
      const MatrixXd k = v_inv + e.x.transpose() * e.x;
      const VectorXd m = k.ldlt().solve(v_inv * pr.mean + e.x.transpose() * e.y);
      const double shape = pr.shape + 0.5 * static_cast<double>(e.y.size());
      const double rate = pr.rate + 0.5 * (e.y.squaredNorm() + pr.mean.dot(v_inv * pr.mean) - m.dot(k * m));
      const double s2 = u(gen) * s_sq(i);
      const VectorXd theta = m + oracle::random_vector(m.size(), gen, 0.1);
      const double log_prior = log_ig(s2, pr.shape, pr.rate) + log_mvn(theta, pr.mean, s2 * MatrixXd(pr.var.asDiagonal()));
      const double log_lik = log_mvn(e.y, e.x * theta, s2 * MatrixXd::Identity(e.y.size(), e.y.size()));
      const double log_post = log_ig(s2, shape, rate) + log_mvn(theta, m, s2 * MatrixXd(k.inverse()));
      total += log_prior + log_lik - log_post;
    }
    CHECK(std::abs(total - log_ml) < 1e-6);
  }
}

TEST_CASE("log marginal likelihood is the sum over equations") {
  const MatrixXd data = simulate_var(3, 2, 80, 37);
  const condvar::AcpPrior prior = condvar::AcpPrior::from_data(data, 2, 0.1, 0.01);
  const condvar::VarRegression reg = condvar::var_regression(data, 2);
  double sum = 0.0;
  for (Index i = 0; i < 3; ++i) {
    const condvar::EquationData d = condvar::equation_data(reg, i);
    sum += condvar::nig_update(condvar::acp_equation_prior(prior, 2, i), d.x, d.y).log_ml;
  }
  CHECK(condvar::acp_log_marginal_likelihood(data, 2, prior) == sum);
}

TEST_CASE("scaling the data shifts the log marginal likelihood by the Jacobian") {
  const MatrixXd data = simulate_var(3, 2, 80, 38);
  const double scale = 3.7;
  const auto lml = [](const MatrixXd& d) {
    return condvar::acp_log_marginal_likelihood(d, 2, condvar::AcpPrior::from_data(d, 2, 0.083, 0.0024));
  };
  const double t_eff = static_cast<double>(data.rows() - 2);
  CHECK(lml(scale * data) - lml(data) == doctest::Approx(-t_eff * 3.0 * std::log(scale)).epsilon(1e-9));
}

TEST_CASE("zero data rows return the prior") {
  condvar::NigPrior prior;
  prior.mean = (VectorXd(3) << 0.5, 1.0, -2.0).finished();
  prior.var = (VectorXd(3) << 1.0, 2.0, 0.5).finished();
  prior.shape = 2.5;
  prior.rate = 0.7;
  const condvar::NigPosterior post = condvar::nig_update(prior, MatrixXd(0, 3), VectorXd(0));
  CHECK(post.mean == prior.mean);
  CHECK(post.shape == prior.shape);
  CHECK(post.rate == prior.rate);
  CHECK(oracle::max_abs(post.precision - MatrixXd(prior.var.cwiseInverse().asDiagonal())) == 0.0);
}

TEST_CASE("acp posterior needs enough observations") {
  const MatrixXd data = simulate_var(3, 2, 9, 39);
  try {
    (void)condvar::acp_posterior(data, 2, condvar::AcpPrior::from_data(simulate_var(3, 2, 50, 40), 2, 0.1, 0.1));
    FAIL("expected InsufficientData");
  } catch (const condvar::Error& e) {
    CHECK(e.code() == condvar::ErrorCode::InsufficientData);
  }
}

TEST_CASE("asymmetric shrinkage beats the symmetric optimum on weak cross lags") {
  const MatrixXd data = simulate_var(4, 2, 200, 41, 0.0);
  const condvar::AcpPrior tmpl = condvar::AcpPrior::from_data(data, 2, 0.1, 0.1);
  const condvar::ShrinkageOptimum asym = condvar::optimize_shrinkage(data, 2, tmpl);
  const condvar::ShrinkageOptimum sym = condvar::optimize_shrinkage_symmetric(data, 2, tmpl);
  CHECK(asym.log_ml > sym.log_ml);
  CHECK(sym.log_ml <= asym.log_ml);
  CHECK(asym.kappa2 < asym.kappa1);
  // reported value is the surface at the reported point
  condvar::AcpPrior at = tmpl;
  at.kappa1 = asym.kappa1;
  at.kappa2 = asym.kappa2;
  CHECK(condvar::acp_log_marginal_likelihood(data, 2, at) == doctest::Approx(asym.log_ml).epsilon(1e-12));
}

TEST_CASE("shrinkage optimum is stable under grid refinement") {
  const MatrixXd data = simulate_var(5, 2, 200, 42, 0.05);
  const condvar::AcpPrior tmpl = condvar::AcpPrior::from_data(data, 2, 0.1, 0.1);
  condvar::ShrinkageSearch coarse;
  condvar::ShrinkageSearch fine;
  fine.grid_points = 2 * coarse.grid_points - 1;
  fine.min_step = 0.5 * coarse.min_step;
  const double a = condvar::optimize_shrinkage(data, 2, tmpl, coarse).log_ml;
  const double b = condvar::optimize_shrinkage(data, 2, tmpl, fine).log_ml;
  CHECK(std::abs(a - b) < 0.1);
}

TEST_CASE("acp parameter draws match posterior moments") {
  const MatrixXd data = simulate_var(2, 1, 60, 43);
  const condvar::AcpPrior prior = condvar::AcpPrior::from_data(data, 1, 0.2, 0.05);
  const condvar::AcpPosterior post = condvar::acp_posterior(data, 1, prior);
  const Index n_draws = 50000;
  const condvar::PosteriorDraws draws = condvar::acp_draw_params(post, n_draws, 44);
  // equation 1 coefficients: alpha, intercept, lag block; then its shock variance
  const auto& e = post.equations[1];
  MatrixXd sample(n_draws, e.mean.size() + 1);
  for (Index d = 0; d < n_draws; ++d) {
    const auto& s = draws.draws[static_cast<std::size_t>(d)];
    sample(d, 0) = s.a0(1, 0);
    sample(d, 1) = s.a(1);
    sample(d, 2) = s.lags[0](1, 0);
    sample(d, 3) = s.lags[0](1, 1);
    sample(d, 4) = (*s.shock_scale)(1);
  }
  const double ig_mean = e.rate / (e.shape - 1.0);
  VectorXd mean(5);
  mean << e.mean, ig_mean;
  VectorXd var(5);
  var << ig_mean * e.precision.inverse().diagonal(), ig_mean * ig_mean / (e.shape - 2.0);
  CHECK(oracle::max_mean_z(sample, mean, var) < oracle::family_critical(5));
  CHECK(oracle::max_abs(condvar::acp_posterior_mean(post).a - (VectorXd(2) << post.equations[0].mean(0), e.mean(1)).finished()) < 1e-14);
}

TEST_CASE("acp draws are reproducible and collapse under a dogmatic posterior") {
  const MatrixXd data = simulate_var(2, 1, 60, 45);
  const condvar::AcpPosterior post = condvar::acp_posterior(data, 1, condvar::AcpPrior::from_data(data, 1, 0.2, 0.05));
  const condvar::PosteriorDraws a = condvar::acp_draw_params(post, 20, 46);
  const condvar::PosteriorDraws b = condvar::acp_draw_params(post, 20, 46);
  for (std::size_t d = 0; d < 20; ++d) {
    CHECK(a.draws[d].a == b.draws[d].a);
    CHECK(a.draws[d].lags[0] == b.draws[d].lags[0]);
    CHECK(*a.draws[d].shock_scale == *b.draws[d].shock_scale);
  }
  condvar::AcpPosterior dogmatic = post;
  for (auto& e : dogmatic.equations) e.precision *= 1e16;
  const condvar::PosteriorDraws c = condvar::acp_draw_params(dogmatic, 50, 47);
  double worst = 0.0;
  for (const auto& s : c.draws) worst = std::max(worst, std::abs(s.lags[0](0, 0) - post.equations[0].mean(1)));
  CHECK(worst < 1e-6);
}

TEST_CASE("gibbs posterior covers the true first-lag matrix") {
  condvar::DgpSpec spec;
  spec.n = 2;
  spec.p = 2;
  spec.t = 300;
  spec.seed = 48;
  const condvar::DgpDraw dgp = condvar::generate_dgp(spec);
  const condvar::PosteriorDraws post =
      condvar::gibbs_niw(dgp.data, 2, condvar::NiwPrior::uninformative(2, 2), 2000, 500, 49);
  MatrixXd b1(2000, 4);
  for (Index d = 0; d < 2000; ++d) {
    const MatrixXd& l = post.reduced[static_cast<std::size_t>(d)].lags[0];
    b1.row(d) << l(0, 0), l(0, 1), l(1, 0), l(1, 1);
  }
  const VectorXd mean = oracle::col_mean(b1);
  const VectorXd sd = oracle::sample_cov(b1).diagonal().cwiseSqrt();
  const MatrixXd& truth = dgp.params.lags[0];
  const VectorXd t = (VectorXd(4) << truth(0, 0), truth(0, 1), truth(1, 0), truth(1, 1)).finished();
  for (Index k = 0; k < 4; ++k) CHECK(std::abs(mean(k) - t(k)) < 3.0 * sd(k));

  // split halves agree within 4 MC standard errors (batch means)
  const MatrixXd first = b1.topRows(1000);
  const MatrixXd second = b1.bottomRows(1000);
  for (Index k = 0; k < 4; ++k) {
    auto batch_var = [&](const MatrixXd& x) {
      VectorXd means(20);
      for (Index b = 0; b < 20; ++b) means(b) = x.col(k).segment(b * 50, 50).mean();
      return (means.array() - means.mean()).square().sum() / 19.0 / 20.0;
    };
    const double se = std::sqrt(batch_var(first) + batch_var(second));
    CHECK(std::abs(first.col(k).mean() - second.col(k).mean()) < 4.0 * se);
  }
}

TEST_CASE("gibbs draws collapse under a dogmatic coefficient prior and are reproducible") {
  const MatrixXd data = simulate_var(2, 1, 100, 50);
  condvar::NiwPrior prior = condvar::NiwPrior::uninformative(2, 1);
  prior.beta_mean = VectorXd::LinSpaced(6, -0.2, 0.3);
  const condvar::PosteriorDraws loose = condvar::gibbs_niw(data, 1, prior, 50, 10, 51);
  const condvar::PosteriorDraws again = condvar::gibbs_niw(data, 1, prior, 50, 10, 51);
  for (std::size_t d = 0; d < 50; ++d) {
    CHECK(loose.reduced[d].b == again.reduced[d].b);
    CHECK(loose.reduced[d].sigma == again.reduced[d].sigma);
  }
  double previous = INFINITY;
  for (double v : {1e-2, 1e-6, 1e-10}) {
    prior.beta_cov = v * MatrixXd::Identity(6, 6);
    const condvar::PosteriorDraws d = condvar::gibbs_niw(data, 1, prior, 50, 10, 52);
    double worst = 0.0;
    for (const auto& r : d.reduced) {
      // stacked by equation: intercept then lag coefficients
      worst = std::max(worst, std::abs(r.b(0) - prior.beta_mean(0)));
      worst = std::max(worst, std::abs(r.lags[0](1, 1) - prior.beta_mean(5)));
    }
    CHECK(worst < previous);
    previous = worst;
  }
  CHECK(previous < 1e-3);
}

TEST_CASE("inverse-Wishart draws have the right mean") {
  condvar::Rng rng(53);
  MatrixXd scale(2, 2);
  scale << 2.0, 0.5, 0.5, 1.0;
  const double dof = 8.0;
  const Index n_draws = 40000;
  MatrixXd sample(n_draws, 3);
  for (Index d = 0; d < n_draws; ++d) {
    const MatrixXd w = condvar::draw_inverse_wishart(dof, scale, rng);
    sample.row(d) << w(0, 0), w(0, 1), w(1, 1);
  }
  const MatrixXd mean = scale / (dof - 3.0);
  const VectorXd target = (VectorXd(3) << mean(0, 0), mean(0, 1), mean(1, 1)).finished();
  CHECK(oracle::max_mean_z(sample, target, oracle::sample_cov(sample).diagonal()) < oracle::family_critical(3));
}

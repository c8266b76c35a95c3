#include <doctest.h>

#include <cmath>
#include <numbers>

#include "condvar/special.hpp"
#include "condvar/tmvn.hpp"
#include "oracles.hpp"

using condvar::Index;
using condvar::kInf;
using condvar::MatrixForm;
using condvar::TruncatedGaussianSpec;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

TruncatedGaussianSpec make_spec(const VectorXd& mean, const MatrixXd& cov, const VectorXd& lo, const VectorXd& hi) {
  return TruncatedGaussianSpec{mean, cov, MatrixForm::Covariance, lo, hi};
}

MatrixXd correlated_cov(Index d, double rho) {
  MatrixXd c(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) c(i, j) = std::pow(rho, std::abs(i - j)) * (1.0 + 0.2 * static_cast<double>(i == j ? i : 0));
  }
  return 0.5 * (c + c.transpose());
}

bool inside(const MatrixXd& x, const VectorXd& lo, const VectorXd& hi) {
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index c = 0; c < x.cols(); ++c) {
      if (!(x(r, c) >= lo(c) && x(r, c) <= hi(c))) return false;
    }
  }
  return true;
}

// Standard error of a chain mean from 50 batch means.
double batch_se(const VectorXd& chain) {
  const Index batches = 50;
  const Index size = chain.size() / batches;
  VectorXd means(batches);
  for (Index b = 0; b < batches; ++b) means(b) = chain.segment(b * size, size).mean();
  return std::sqrt((means.array() - means.mean()).square().sum() / static_cast<double>(batches - 1) /
                   static_cast<double>(batches));
}

}  // namespace

TEST_CASE("half-line truncation has the analytic mean") {
  const auto spec = make_spec(VectorXd::Zero(1), MatrixXd::Ones(1, 1), VectorXd::Zero(1), VectorXd::Constant(1, kInf));
  const condvar::TmvnDraws d = condvar::sample_tilted(spec, 20000, 61);
  const double analytic = condvar::normal_pdf(0.0) / (1.0 - condvar::normal_cdf(0.0));
  CHECK(analytic == doctest::Approx(0.79788).epsilon(1e-5));
  const double se = std::sqrt((1.0 - 2.0 / std::numbers::pi) / 20000.0);
  CHECK(std::abs(d.draws.col(0).mean() - analytic) < 3.0 * se);
  CHECK((d.draws.array() >= 0.0).all());
}

TEST_CASE("untruncated box reproduces the Gaussian") {
  const MatrixXd cov = correlated_cov(3, 0.5);
  const VectorXd mean = (VectorXd(3) << 1.0, -1.0, 0.5).finished();
  const auto spec = make_spec(mean, cov, VectorXd::Constant(3, -kInf), VectorXd::Constant(3, kInf));
  const condvar::TmvnDraws d = condvar::sample_tilted(spec, 20000, 62);
  CHECK(d.acceptance_rate == 1.0);
  CHECK(oracle::max_mean_z(d.draws, mean, cov.diagonal()) < oracle::family_critical(3));
  CHECK(oracle::max_cov_z(d.draws, cov) < oracle::family_critical(6));
}

TEST_CASE("correlated box matches naive accept-reject") {
  const MatrixXd cov = correlated_cov(3, 0.6);
  const VectorXd mean = (VectorXd(3) << 0.3, 0.0, -0.4).finished();
  const VectorXd lo = VectorXd::Constant(3, -1.0);
  const VectorXd hi = VectorXd::Constant(3, 1.0);
  const condvar::TmvnDraws tilted = condvar::sample_tilted(make_spec(mean, cov, lo, hi), 20000, 63);
  const MatrixXd naive = oracle::naive_box_sample({mean, cov}, lo, hi, 20000, 64);
  REQUIRE(naive.rows() == 20000);
  const oracle::TwoSampleZ z = oracle::two_sample_z(tilted.draws, naive);
  CHECK(std::max(z.mean, z.cov) < oracle::family_critical(z.comparisons));
  CHECK(inside(tilted.draws, lo, hi));
}

TEST_CASE("precision form gives the same law as covariance form") {
  const MatrixXd cov = correlated_cov(2, 0.4);
  const VectorXd mean = VectorXd::Zero(2);
  const VectorXd lo = (VectorXd(2) << 0.5, -kInf).finished();
  const VectorXd hi = (VectorXd(2) << kInf, 0.0).finished();
  TruncatedGaussianSpec prec{mean, cov.inverse(), MatrixForm::Precision, lo, hi};
  const condvar::TmvnDraws a = condvar::sample_tilted(prec, 20000, 65);
  const condvar::TmvnDraws b = condvar::sample_tilted(make_spec(mean, cov, lo, hi), 20000, 66);
  const oracle::TwoSampleZ z = oracle::two_sample_z(a.draws, b.draws);
  CHECK(std::max(z.mean, z.cov) < oracle::family_critical(z.comparisons));
}

TEST_CASE("tilted sampler agrees with naive sampling in energy distance") {
  struct Case {
    Index d;
    double rho;
    double lo;
    double hi;
  };
  for (const Case c : {Case{2, 0.5, -0.5, 1.5}, Case{4, 0.3, -1.0, 0.8}, Case{5, -0.2, -1.2, 1.2}}) {
    const MatrixXd cov = correlated_cov(c.d, c.rho);
    const VectorXd mean = VectorXd::Constant(c.d, 0.1);
    const VectorXd lo = VectorXd::Constant(c.d, c.lo);
    const VectorXd hi = VectorXd::Constant(c.d, c.hi);
    const condvar::TmvnDraws t = condvar::sample_tilted(make_spec(mean, cov, lo, hi), 800, 67 + c.d);
    const MatrixXd naive = oracle::naive_box_sample({mean, cov}, lo, hi, 800, 77 + c.d);
    CHECK(oracle::energy_distance_pvalue(t.draws, naive, 200, 5) > 0.01);
  }
}

TEST_CASE("tilted acceptance is at least the naive acceptance") {
  const MatrixXd cov = correlated_cov(4, 0.5);
  const VectorXd mean = VectorXd::Zero(4);
  const VectorXd lo = VectorXd::Constant(4, 0.2);
  const VectorXd hi = VectorXd::Constant(4, 2.0);
  const auto spec = make_spec(mean, cov, lo, hi);
  const condvar::TmvnDraws t = condvar::sample_tilted(spec, 5000, 81);
  condvar::Rng rng(82);
  const condvar::TmvnDraws naive = condvar::sample_naive_partial(spec, 5000, 200000, rng);
  CHECK(naive.acceptance_rate < 0.5);
  CHECK(t.acceptance_rate >= naive.acceptance_rate);
}

TEST_CASE("samplers are deterministic for a fixed seed") {
  const auto spec = make_spec(VectorXd::Zero(3), correlated_cov(3, 0.3), VectorXd::Constant(3, -0.5),
                              VectorXd::Constant(3, 1.0));
  CHECK(condvar::sample_tilted(spec, 500, 83).draws == condvar::sample_tilted(spec, 500, 83).draws);
  CHECK(condvar::sample_gibbs(spec, 500, 100, 84) == condvar::sample_gibbs(spec, 500, 100, 84));
  CHECK(condvar::sample_naive(spec, 100, 100000, 85).draws == condvar::sample_naive(spec, 100, 100000, 85).draws);
}

TEST_CASE("gibbs on a symmetric box recovers the mean") {
  const MatrixXd cov = correlated_cov(3, 0.5);
  const VectorXd mean = (VectorXd(3) << 1.0, 2.0, -1.0).finished();
  const auto spec = make_spec(mean, cov, mean.array() - 0.7, mean.array() + 0.7);
  const MatrixXd chain = condvar::sample_gibbs(spec, 20000, 1000, 86);
  for (Index k = 0; k < 3; ++k) CHECK(std::abs(chain.col(k).mean() - mean(k)) < 3.0 * batch_se(chain.col(k)));
  CHECK(inside(chain, spec.lower, spec.upper));
}

TEST_CASE("gibbs agrees with the tilted sampler in four dimensions") {
  const MatrixXd cov = correlated_cov(4, 0.4);
  const VectorXd mean = (VectorXd(4) << 0.0, 0.5, -0.3, 0.2).finished();
  const VectorXd lo = (VectorXd(4) << -0.5, -kInf, -1.0, 0.0).finished();
  const VectorXd hi = (VectorXd(4) << 1.0, 0.8, kInf, 1.5).finished();
  const auto spec = make_spec(mean, cov, lo, hi);
  const MatrixXd chain = condvar::sample_gibbs(spec, 50000, 1000, 87);
  const condvar::TmvnDraws t = condvar::sample_tilted(spec, 50000, 88);
  const double crit = oracle::family_critical(4);
  for (Index k = 0; k < 4; ++k) {
    const double se = std::sqrt(batch_se(chain.col(k)) * batch_se(chain.col(k)) + oracle::sample_cov(t.draws)(k, k) / 50000.0);
    CHECK(std::abs(chain.col(k).mean() - t.draws.col(k).mean()) < crit * se);
  }
}

TEST_CASE("near-point box keeps every draw inside") {
  const VectorXd mean = VectorXd::Zero(2);
  const VectorXd lo = (VectorXd(2) << 0.3, -0.2).finished();
  const VectorXd hi = lo.array() + 1e-6;
  const auto spec = make_spec(mean, correlated_cov(2, 0.5), lo, hi);
  CHECK(inside(condvar::sample_gibbs(spec, 2000, 100, 89), lo, hi));
  CHECK(inside(condvar::sample_tilted(spec, 2000, 90).draws, lo, hi));
}

TEST_CASE("naive sampler acceptance rates and budget") {
  const auto full = make_spec(VectorXd::Zero(2), correlated_cov(2, 0.3), VectorXd::Constant(2, -kInf), VectorXd::Constant(2, kInf));
  CHECK(condvar::sample_naive(full, 1000, 1000, 91).acceptance_rate == 1.0);

  const auto half = make_spec(VectorXd::Zero(1), MatrixXd::Ones(1, 1), VectorXd::Zero(1), VectorXd::Constant(1, kInf));
  const condvar::TmvnDraws d = condvar::sample_naive(half, 20000, 1000000, 92);
  const double se = std::sqrt(0.25 / static_cast<double>(d.proposals));
  CHECK(std::abs(d.acceptance_rate - 0.5) < 3.0 * se);

  const auto far = make_spec(VectorXd::Zero(1), MatrixXd::Ones(1, 1), VectorXd::Constant(1, 6.0), VectorXd::Constant(1, kInf));
  try {
    (void)condvar::sample_naive(far, 10, 1000, 93);
    FAIL("expected BudgetExhausted");
  } catch (const condvar::Error& e) {
    CHECK(e.code() == condvar::ErrorCode::BudgetExhausted);
  }
  condvar::Rng rng(94);
  CHECK(condvar::sample_naive_partial(far, 10, 1000, rng).draws.rows() == 0);
}

TEST_CASE("far-tail boxes still sample inside") {
  const auto spec = make_spec(VectorXd::Zero(2), correlated_cov(2, 0.5), VectorXd::Constant(2, 5.0), VectorXd::Constant(2, 6.0));
  const condvar::TmvnDraws t = condvar::sample_tilted(spec, 1000, 95);
  CHECK(inside(t.draws, spec.lower, spec.upper));
  CHECK(t.acceptance_rate > 0.1);
}

TEST_CASE("spec validation") {
  auto spec = make_spec(VectorXd::Zero(2), MatrixXd::Identity(2, 2), VectorXd::Ones(2), VectorXd::Zero(2));
  CHECK_THROWS_AS(spec.validate(), condvar::Error);
  spec = make_spec(VectorXd::Zero(2), (MatrixXd(2, 2) << 1, 2, 2, 1).finished(), VectorXd::Zero(2), VectorXd::Ones(2));
  CHECK_THROWS_AS(spec.validate(), condvar::Error);
}

TEST_CASE("univariate truncated normal helpers") {
  condvar::Rng rng(96);
  for (const auto& [l, u] : std::vector<std::pair<double, double>>{{-1.0, 1.0}, {8.0, 9.0}, {-kInf, -30.0}, {2.0, 2.0 + 1e-9}}) {
    for (int k = 0; k < 200; ++k) {
      const double x = condvar::truncated_std_normal(l, u, rng);
      CHECK(x >= l);
      CHECK(x <= u);
      const double g = condvar::truncated_std_normal_gibbs(l, u, rng);
      CHECK(g >= l);
      CHECK(g <= u);
    }
  }
  CHECK(condvar::normal_quantile(condvar::normal_cdf(1.3)) == doctest::Approx(1.3).epsilon(1e-12));
  CHECK(condvar::log_normal_prob(-kInf, kInf) == doctest::Approx(0.0));
  CHECK(std::isfinite(condvar::log_normal_sf(40.0)));
}

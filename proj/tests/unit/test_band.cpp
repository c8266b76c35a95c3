#include <doctest.h>

#include <random>

#include "condvar/band.hpp"
#include "oracles.hpp"

using condvar::BandMatrix;
using condvar::BandMatrixd;
using condvar::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

BandMatrixd random_band_spd(Index dim, Index bw, std::mt19937_64& gen) {
  // B B' with B lower-banded keeps bandwidth bw; shift for conditioning
  MatrixXd b = oracle::random_matrix(dim, dim, gen);
  for (Index i = 0; i < dim; ++i) {
    for (Index j = 0; j < dim; ++j) {
      if (j > i || i - j > bw / 2) b(i, j) = 0.0;
    }
  }
  MatrixXd a = b * b.transpose() + MatrixXd::Identity(dim, dim);
  for (Index i = 0; i < dim; ++i) {
    for (Index j = 0; j < dim; ++j) {
      if (std::abs(i - j) > bw) a(i, j) = 0.0;
    }
  }
  return BandMatrixd::from_dense(a, bw, bw);
}

BandMatrixd random_lower_band(Index dim, Index bw, std::mt19937_64& gen) {
  MatrixXd l = oracle::random_matrix(dim, dim, gen, 0.3);
  for (Index i = 0; i < dim; ++i) {
    for (Index j = 0; j < dim; ++j) {
      if (j > i || i - j > bw) l(i, j) = 0.0;
    }
    l(i, i) = 1.0 + std::abs(l(i, i));
  }
  return BandMatrixd::from_dense(l, bw, 0);
}

}  // namespace

TEST_CASE("cholesky of a 2x2 matrix") {
  MatrixXd a(2, 2);
  a << 4, 2, 2, 3;
  const BandMatrixd l = condvar::band_cholesky(BandMatrixd::from_dense(a, 1, 1));
  CHECK(l(0, 0) == doctest::Approx(2.0));
  CHECK(l(1, 0) == doctest::Approx(1.0));
  CHECK(l(1, 1) == doctest::Approx(std::sqrt(2.0)));
  CHECK(l(0, 1) == 0.0);
  const MatrixXd ld = l.dense();
  CHECK(oracle::max_abs(ld * ld.transpose() - a) < 1e-14);
}

TEST_CASE("cholesky of the identity is the identity") {
  for (Index dim : {1, 5, 17}) {
    const BandMatrixd l = condvar::band_cholesky(BandMatrixd::identity(dim));
    CHECK(oracle::max_abs(l.dense() - MatrixXd::Identity(dim, dim)) == 0.0);
  }
}

TEST_CASE("banded cholesky matches dense cholesky") {
  std::mt19937_64 gen(11);
  const BandMatrixd a = random_band_spd(50, 4, gen);
  const BandMatrixd l = condvar::band_cholesky(a);
  const MatrixXd dense_l = a.dense().llt().matrixL();
  CHECK(oracle::max_abs(l.dense() - dense_l) < 1e-9);
  CHECK(l.lower_bw() <= a.lower_bw());
  CHECK(l.upper_bw() == 0);
}

TEST_CASE("cholesky reconstruction and band preservation on random systems") {
  std::mt19937_64 gen(12);
  for (int rep = 0; rep < 10; ++rep) {
    const Index dim = 10 + rep * 9;
    const Index bw = 1 + rep % 6;
    const BandMatrixd a = random_band_spd(dim, bw, gen);
    const BandMatrixd l = condvar::band_cholesky(a);
    const MatrixXd ld = l.dense();
    const MatrixXd ad = a.dense();
    CHECK((ld * ld.transpose() - ad).norm() <= 1e-9 * ad.norm());
    // nothing outside the original band
    for (Index i = 0; i < dim; ++i) {
      for (Index j = 0; j < i - bw; ++j) CHECK(ld(i, j) == 0.0);
    }
  }
}

TEST_CASE("cholesky rejects indefinite and asymmetric input") {
  MatrixXd a(2, 2);
  a << 1, 2, 2, 1;
  CHECK_THROWS_AS(condvar::band_cholesky(BandMatrixd::from_dense(a, 1, 1)), condvar::Error);
  try {
    (void)condvar::band_cholesky(BandMatrixd::from_dense(a, 1, 1));
  } catch (const condvar::Error& e) {
    CHECK(e.code() == condvar::ErrorCode::NotPositiveDefinite);
  }
  MatrixXd zero = MatrixXd::Zero(3, 3);
  CHECK_THROWS_AS(condvar::band_cholesky(BandMatrixd::from_dense(zero, 0, 0)), condvar::Error);
  MatrixXd asym(2, 2);
  asym << 2, 1, 0, 2;
  CHECK_THROWS_AS(condvar::band_cholesky(BandMatrixd::from_dense(asym, 1, 1)), condvar::Error);
}

TEST_CASE("triangular solve examples") {
  MatrixXd ld(2, 2);
  ld << 2, 0, 1, std::sqrt(2.0);
  const BandMatrixd l = BandMatrixd::from_dense(ld, 1, 0);
  VectorXd b(2);
  b << 2, 1 + std::sqrt(2.0);
  const VectorXd x = condvar::band_solve(l, b);
  CHECK(x(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(x(1) == doctest::Approx(1.0).epsilon(1e-14));

  const VectorXd any = VectorXd::LinSpaced(6, -2.0, 3.0);
  CHECK(oracle::max_abs(condvar::band_solve(BandMatrixd::identity(6), any) - any) == 0.0);
  CHECK(oracle::max_abs(condvar::band_solve(BandMatrixd::identity(6), any, condvar::Trans::Yes) - any) == 0.0);
}

TEST_CASE("banded triangular solve matches dense solve") {
  std::mt19937_64 gen(13);
  const BandMatrixd l = random_lower_band(100, 5, gen);
  const VectorXd b = oracle::random_vector(100, gen);
  const MatrixXd ld = l.dense();
  const VectorXd x = condvar::band_solve(l, b);
  const VectorXd xt = condvar::band_solve(l, b, condvar::Trans::Yes);
  CHECK(oracle::max_abs(x - ld.triangularView<Eigen::Lower>().solve(b)) < 1e-8);
  CHECK(oracle::max_abs(xt - ld.transpose().triangularView<Eigen::Upper>().solve(b)) < 1e-8);
}

TEST_CASE("solve rejects a zero diagonal") {
  MatrixXd ld(2, 2);
  ld << 1, 0, 1, 0;
  try {
    (void)condvar::band_solve(BandMatrixd::from_dense(ld, 1, 0), VectorXd::Ones(2));
    FAIL("expected SingularDiagonal");
  } catch (const condvar::Error& e) {
    CHECK(e.code() == condvar::ErrorCode::SingularDiagonal);
  }
}

TEST_CASE("cholesky solve residual on dim-200 bandwidth-8 systems") {
  std::mt19937_64 gen(14);
  for (int rep = 0; rep < 5; ++rep) {
    const BandMatrixd a = random_band_spd(200, 8, gen);
    const VectorXd b = oracle::random_vector(200, gen);
    const BandMatrixd l = condvar::band_cholesky(a);
    const VectorXd x = condvar::band_solve(l, condvar::band_solve(l, b), condvar::Trans::Yes);
    const VectorXd resid = condvar::band_matvec(a, x) - b;
    CHECK(resid.lpNorm<Eigen::Infinity>() <= 1e-7 * b.lpNorm<Eigen::Infinity>());
  }
}

TEST_CASE("matvec and selection") {
  const VectorXd x = (VectorXd(3) << 5, 7, 9).finished();
  CHECK(oracle::max_abs(condvar::band_matvec(BandMatrixd::identity(3), x) - x) == 0.0);
  const condvar::SelectionMatrix s(3, {1});
  const VectorXd picked = condvar::select_rows(s, x);
  REQUIRE(picked.size() == 1);
  CHECK(picked(0) == 7.0);
  const VectorXd embedded = condvar::select_cols_embed(s, picked);
  CHECK(oracle::max_abs(embedded - (VectorXd(3) << 0, 7, 0).finished()) == 0.0);
  CHECK_THROWS_AS(condvar::select_rows(s, VectorXd::Ones(4)), condvar::Error);
  CHECK_THROWS_AS(condvar::band_matvec(BandMatrixd::identity(3), VectorXd::Ones(4)), condvar::Error);

  std::mt19937_64 gen(15);
  MatrixXd ad = oracle::random_matrix(60, 60, gen);
  for (Index i = 0; i < 60; ++i) {
    for (Index j = 0; j < 60; ++j) {
      if (i - j > 3 || j - i > 2) ad(i, j) = 0.0;
    }
  }
  const BandMatrixd a = BandMatrixd::from_dense(ad, 3, 2);
  const VectorXd v = oracle::random_vector(60, gen);
  CHECK(oracle::max_abs(condvar::band_matvec(a, v) - ad * v) < 1e-12);
  CHECK(oracle::max_abs(condvar::band_matvec_transposed(a, v) - ad.transpose() * v) < 1e-12);
}

TEST_CASE("gram, transpose and principal submatrix") {
  std::mt19937_64 gen(16);
  const BandMatrixd l = random_lower_band(30, 4, gen);
  const MatrixXd ld = l.dense();
  CHECK(oracle::max_abs(condvar::band_gram(l).dense() - ld.transpose() * ld) < 1e-12);
  CHECK(oracle::max_abs(l.transpose().dense() - ld.transpose()) == 0.0);
  const std::vector<Index> idx{1, 4, 5, 9, 20};
  const BandMatrixd sub = condvar::band_principal_submatrix(condvar::band_gram(l), std::span<const Index>(idx));
  const MatrixXd g = ld.transpose() * ld;
  for (Index r = 0; r < 5; ++r) {
    for (Index c = 0; c < 5; ++c) {
      if (sub.in_band(r, c)) CHECK(sub(r, c) == doctest::Approx(g(idx[r], idx[c])));
    }
  }
}

TEST_CASE("band code works in single precision") {
  Eigen::MatrixXf a(3, 3);
  a << 4, 1, 0, 1, 3, 1, 0, 1, 2;
  const BandMatrix<float> l = condvar::band_cholesky(BandMatrix<float>::from_dense(a, 1, 1));
  const Eigen::MatrixXf ld = l.dense();
  CHECK((ld * ld.transpose() - a).cwiseAbs().maxCoeff() < 1e-5f);
}

TEST_CASE("selection matrices validate their rows") {
  CHECK_THROWS_AS(condvar::SelectionMatrix(3, {0, 0}), condvar::Error);
  CHECK_THROWS_AS(condvar::SelectionMatrix(3, {3}), condvar::Error);
  const condvar::SelectionMatrix s(4, {2, 0});
  CHECK(s.complement().col_of_row() == std::vector<Index>{1, 3});
}

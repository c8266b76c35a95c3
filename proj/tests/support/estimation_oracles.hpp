#pragma once

// Dense reference pieces for the per-equation conjugate prior.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd simulate_var(Index n, Index p, Index t, std::uint64_t seed, double cross = 0.1) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  std::vector<MatrixXd> lags;
  for (Index l = 0; l < p; ++l) {
    MatrixXd b = MatrixXd::Constant(n, n, cross / static_cast<double>(l + 1));
    b.diagonal().setConstant(0.5 / static_cast<double>(l + 1));
    lags.push_back(b);
  }
  MatrixXd y = MatrixXd::Zero(t + 50, n);
  for (Index s = p; s < y.rows(); ++s) {
    VectorXd v = VectorXd::Constant(n, 0.3);
    for (Index l = 1; l <= p; ++l) v += lags[static_cast<std::size_t>(l - 1)] * y.row(s - l).transpose();
    for (Index i = 0; i < n; ++i) v(i) += nd(gen);
    y.row(s) = v.transpose();
  }
  return y.bottomRows(t);
}

// Regressors of equation i, assembled from the raw data.
struct Eq {
  MatrixXd x;
  VectorXd y;
};

inline Eq build_equation(const MatrixXd& data, Index p, Index i) {
  const Index n = data.cols();
  const Index rows = data.rows() - p;
  Eq e{MatrixXd(rows, i + 1 + n * p), VectorXd(rows)};
  for (Index r = 0; r < rows; ++r) {
    const Index t = r + p;
    Index c = 0;
    for (Index j = 0; j < i; ++j) e.x(r, c++) = -data(t, j);
    e.x(r, c++) = 1.0;
    for (Index l = 1; l <= p; ++l) {
      for (Index j = 0; j < n; ++j) e.x(r, c++) = data(t - l, j);
    }
    e.y(r) = data(t, i);
  }
  return e;
}

inline VectorXd ar_variances(const MatrixXd& data, Index p) {
  VectorXd out(data.cols());
  const Index rows = data.rows() - p;
  for (Index j = 0; j < data.cols(); ++j) {
    MatrixXd x(rows, p + 1);
    VectorXd y(rows);
    for (Index r = 0; r < rows; ++r) {
      x(r, 0) = 1.0;
      for (Index l = 1; l <= p; ++l) x(r, l) = data(r + p - l, j);
      y(r) = data(r + p, j);
    }
    const VectorXd b = (x.transpose() * x).ldlt().solve(x.transpose() * y);
    out(j) = (y - x * b).squaredNorm() / static_cast<double>(rows - p - 1);
  }
  return out;
}

struct Nig {
  VectorXd mean;
  VectorXd var;
  double shape;
  double rate;
};

inline Nig equation_prior(const VectorXd& s_sq, Index p, Index i, double k1, double k2, double v0) {
  const Index n = s_sq.size();
  Nig pr{VectorXd::Zero(i + 1 + n * p), VectorXd(i + 1 + n * p), 0.5 * (v0 + static_cast<double>(i + 1 - n)), 0.5 * s_sq(i)};
  for (Index j = 0; j < i; ++j) pr.var(j) = 1.0 / s_sq(j);
  pr.var(i) = 100.0;
  for (Index l = 1; l <= p; ++l) {
    for (Index j = 0; j < n; ++j) {
      const Index k = i + 1 + (l - 1) * n + j;
      pr.var(k) = (j == i ? k1 / s_sq(i) : k2 / s_sq(j)) / static_cast<double>(l * l);
      if (l == 1 && j == i) pr.mean(k) = 1.0;
    }
  }
  return pr;
}

inline double log_ig(double s2, double a, double b) {
  return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(s2) - b / s2;
}

inline double log_mvn(const VectorXd& x, const VectorXd& mean, const MatrixXd& cov) {
  const Eigen::LLT<MatrixXd> llt(cov);
  const MatrixXd l = llt.matrixL();
  const VectorXd z = l.triangularView<Eigen::Lower>().solve(x - mean);
  return -0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) - l.diagonal().array().log().sum() -
         0.5 * z.squaredNorm();
}

}  // namespace oracle

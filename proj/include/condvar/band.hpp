#pragma once

// Banded and selection-matrix linear algebra. Everything here is templated on
// the scalar type; the rest of the library instantiates it with double.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "condvar/error.hpp"

namespace condvar {

using Index = Eigen::Index;

/// Square band matrix. Entry (i, j) lives at row `upper + i - j`, column j of
/// the band array, so each column of the matrix is a contiguous segment.
template <typename Scalar>
class BandMatrix {
 public:
  using Bands = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  BandMatrix() = default;

  /// Bandwidths larger than dim - 1 are clamped.
  BandMatrix(Index dim, Index lower_bw, Index upper_bw) : dim_(dim) {
    require(dim >= 1, ErrorCode::InvalidArgument, "band matrix dimension must be >= 1");
    require(lower_bw >= 0 && upper_bw >= 0, ErrorCode::InvalidArgument, "negative bandwidth");
    lower_ = std::min(lower_bw, dim - 1);
    upper_ = std::min(upper_bw, dim - 1);
    bands_ = Bands::Zero(lower_ + upper_ + 1, dim);
  }

  static BandMatrix identity(Index dim) {
    BandMatrix m(dim, 0, 0);
    m.bands_.setOnes();
    return m;
  }

  /// Entries outside the requested band must be exactly zero.
  static BandMatrix from_dense(const Eigen::Ref<const Dense>& a, Index lower_bw, Index upper_bw) {
    require(a.rows() == a.cols(), ErrorCode::DimensionMismatch, "from_dense needs a square matrix");
    BandMatrix m(a.rows(), lower_bw, upper_bw);
    for (Index j = 0; j < a.cols(); ++j) {
      for (Index i = 0; i < a.rows(); ++i) {
        if (m.in_band(i, j)) {
          m.bands_(m.upper_ + i - j, j) = a(i, j);
        } else {
          require(a(i, j) == Scalar(0), ErrorCode::InvalidArgument,
                  "nonzero entry outside the declared band");
        }
      }
    }
    return m;
  }

  [[nodiscard]] Index dim() const noexcept { return dim_; }
  [[nodiscard]] Index lower_bw() const noexcept { return lower_; }
  [[nodiscard]] Index upper_bw() const noexcept { return upper_; }

  [[nodiscard]] bool in_band(Index i, Index j) const noexcept {
    return i - j <= lower_ && j - i <= upper_;
  }

  Scalar operator()(Index i, Index j) const noexcept {
    return in_band(i, j) ? bands_(upper_ + i - j, j) : Scalar(0);
  }

  /// Mutable access; only in-band positions are addressable.
  Scalar& at(Index i, Index j) {
    if (i < 0 || j < 0 || i >= dim_ || j >= dim_ || !in_band(i, j)) {
      throw Error(ErrorCode::IndexOutOfRange,
                  "band entry (" + std::to_string(i) + "," + std::to_string(j) + ") is not stored");
    }
    return bands_(upper_ + i - j, j);
  }

  [[nodiscard]] const Bands& bands() const noexcept { return bands_; }
  [[nodiscard]] Bands& bands() noexcept { return bands_; }

  [[nodiscard]] Dense dense() const {
    Dense out = Dense::Zero(dim_, dim_);
    for (Index j = 0; j < dim_; ++j) {
      const Index lo = std::max<Index>(0, j - upper_);
      const Index hi = std::min<Index>(dim_ - 1, j + lower_);
      for (Index i = lo; i <= hi; ++i) out(i, j) = bands_(upper_ + i - j, j);
    }
    return out;
  }

  [[nodiscard]] BandMatrix transpose() const {
    BandMatrix t(dim_, upper_, lower_);
    for (Index j = 0; j < dim_; ++j) {
      const Index lo = std::max<Index>(0, j - upper_);
      const Index hi = std::min<Index>(dim_ - 1, j + lower_);
      for (Index i = lo; i <= hi; ++i) t.bands_(t.upper_ + j - i, i) = bands_(upper_ + i - j, j);
    }
    return t;
  }

  /// Same matrix with all-zero outer diagonals dropped.
  [[nodiscard]] BandMatrix trimmed() const {
    Index lo = lower_;
    while (lo > 0 && bands_.row(upper_ + lo).isZero(0)) --lo;
    Index up = upper_;
    while (up > 0 && bands_.row(upper_ - up).isZero(0)) --up;
    BandMatrix t(dim_, lo, up);
    t.bands_ = bands_.middleRows(upper_ - up, lo + up + 1);
    return t;
  }

  [[nodiscard]] Scalar max_abs_diagonal() const {
    return bands_.row(upper_).cwiseAbs().maxCoeff();
  }

  /// Largest |a_ij - a_ji| over the band.
  [[nodiscard]] Scalar asymmetry() const {
    Scalar worst(0);
    const Index bw = std::max(lower_, upper_);
    for (Index i = 0; i < dim_; ++i) {
      for (Index j = i + 1; j <= std::min(dim_ - 1, i + bw); ++j) {
        worst = std::max(worst, std::abs((*this)(i, j) - (*this)(j, i)));
      }
    }
    return worst;
  }

 private:
  Index dim_ = 0;
  Index lower_ = 0;
  Index upper_ = 0;
  Bands bands_;
};

/// Row selector: row k picks coordinate col_of_row[k] of an n_cols vector.
class SelectionMatrix {
 public:
  SelectionMatrix() = default;

  SelectionMatrix(Index n_cols, std::vector<Index> col_of_row)
      : n_cols_(n_cols), cols_(std::move(col_of_row)) {
    require(n_cols >= 1, ErrorCode::InvalidArgument, "selection needs at least one column");
    std::vector<char> seen(static_cast<std::size_t>(n_cols), 0);
    for (Index c : cols_) {
      require(c >= 0 && c < n_cols, ErrorCode::IndexOutOfRange,
              "selected column " + std::to_string(c) + " out of range");
      require(!seen[static_cast<std::size_t>(c)], ErrorCode::InvalidArgument,
              "selection matrix rows must pick distinct columns");
      seen[static_cast<std::size_t>(c)] = 1;
    }
  }

  [[nodiscard]] Index rows() const noexcept { return static_cast<Index>(cols_.size()); }
  [[nodiscard]] Index cols() const noexcept { return n_cols_; }
  [[nodiscard]] bool empty() const noexcept { return cols_.empty(); }
  [[nodiscard]] const std::vector<Index>& col_of_row() const noexcept { return cols_; }
  [[nodiscard]] Index operator[](Index row) const { return cols_[static_cast<std::size_t>(row)]; }

  [[nodiscard]] bool selects(Index col) const {
    return std::find(cols_.begin(), cols_.end(), col) != cols_.end();
  }

  /// The ascending selection of every column this one leaves out.
  [[nodiscard]] SelectionMatrix complement() const {
    std::vector<char> taken(static_cast<std::size_t>(n_cols_), 0);
    for (Index c : cols_) taken[static_cast<std::size_t>(c)] = 1;
    std::vector<Index> rest;
    rest.reserve(static_cast<std::size_t>(n_cols_ - rows()));
    for (Index c = 0; c < n_cols_; ++c) {
      if (!taken[static_cast<std::size_t>(c)]) rest.push_back(c);
    }
    return SelectionMatrix(n_cols_, std::move(rest));
  }

  [[nodiscard]] Eigen::MatrixXd dense() const {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(rows(), n_cols_);
    for (Index k = 0; k < rows(); ++k) s(k, (*this)[k]) = 1.0;
    return s;
  }

  friend bool operator==(const SelectionMatrix&, const SelectionMatrix&) = default;

 private:
  Index n_cols_ = 0;
  std::vector<Index> cols_;
};

// ---------------------------------------------------------------------------
// Products

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> band_matvec(
    const BandMatrix<Scalar>& a, const std::type_identity_t<Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>>& x) {
  require(x.size() == a.dim(), ErrorCode::DimensionMismatch, "band_matvec: vector length");
  const Index n = a.dim();
  const Index up = a.upper_bw();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(n);
  const auto& b = a.bands();
  for (Index j = 0; j < n; ++j) {
    const Scalar xj = x(j);
    if (xj == Scalar(0)) continue;
    const Index lo = std::max<Index>(0, j - up);
    const Index hi = std::min<Index>(n - 1, j + a.lower_bw());
    for (Index i = lo; i <= hi; ++i) y(i) += b(up + i - j, j) * xj;
  }
  return y;
}

/// A' x without forming the transpose.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> band_matvec_transposed(
    const BandMatrix<Scalar>& a, const std::type_identity_t<Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>>& x) {
  require(x.size() == a.dim(), ErrorCode::DimensionMismatch, "band_matvec_transposed: vector length");
  const Index n = a.dim();
  const Index up = a.upper_bw();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y(n);
  const auto& b = a.bands();
  for (Index j = 0; j < n; ++j) {
    const Index lo = std::max<Index>(0, j - up);
    const Index hi = std::min<Index>(n - 1, j + a.lower_bw());
    Scalar acc(0);
    for (Index i = lo; i <= hi; ++i) acc += b(up + i - j, j) * x(i);
    y(j) = acc;
  }
  return y;
}

/// H'H, symmetric with bandwidth lower_bw(H) + upper_bw(H).
template <typename Scalar>
BandMatrix<Scalar> band_gram(const BandMatrix<Scalar>& h) {
  const Index n = h.dim();
  const Index lh = h.lower_bw();
  const Index uh = h.upper_bw();
  BandMatrix<Scalar> out(n, lh + uh, lh + uh);
  const Index bw = out.lower_bw();
  const Index ou = out.upper_bw();
  const auto& hb = h.bands();
  auto& ob = out.bands();
  for (Index j = 0; j < n; ++j) {
    for (Index i = j; i <= std::min(n - 1, j + bw); ++i) {
      // rows k holding both column i and column j of H
      const Index k_lo = std::max<Index>(0, i - uh);
      const Index k_hi = std::min<Index>(n - 1, j + lh);
      Scalar acc(0);
      if (k_hi >= k_lo) {
        const Index len = k_hi - k_lo + 1;
        acc = hb.col(i).segment(uh + k_lo - i, len).dot(hb.col(j).segment(uh + k_lo - j, len));
      }
      ob(ou + i - j, j) = acc;
      ob(ou + j - i, i) = acc;
    }
  }
  return out;
}

/// Principal submatrix on ascending indices; the band never widens.
template <typename Scalar>
BandMatrix<Scalar> band_principal_submatrix(const BandMatrix<Scalar>& a, std::span<const Index> idx) {
  const Index m = static_cast<Index>(idx.size());
  require(m >= 1, ErrorCode::InvalidArgument, "empty principal submatrix");
  for (Index k = 1; k < m; ++k) {
    require(idx[k] > idx[k - 1], ErrorCode::InvalidArgument, "submatrix indices must ascend");
  }
  BandMatrix<Scalar> out(m, a.lower_bw(), a.upper_bw());
  for (Index c = 0; c < m; ++c) {
    const Index lo = std::max<Index>(0, c - out.upper_bw());
    const Index hi = std::min<Index>(m - 1, c + out.lower_bw());
    for (Index r = lo; r <= hi; ++r) out.at(r, c) = a(idx[r], idx[c]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cholesky and triangular solves

/// Lower factor L with L L' = A for symmetric positive definite banded A.
template <typename Scalar>
BandMatrix<Scalar> band_cholesky(const BandMatrix<Scalar>& a) {
  const Index n = a.dim();
  const Index bw = std::max(a.lower_bw(), a.upper_bw());
  const Scalar scale = std::max(Scalar(1), a.bands().cwiseAbs().maxCoeff());
  require(a.asymmetry() <= Scalar(1e-10) * scale, ErrorCode::InvalidArgument,
          "band_cholesky: matrix is not symmetric");
  const Scalar pivot_tol =
      Scalar(n) * std::numeric_limits<Scalar>::epsilon() * a.max_abs_diagonal();

  // column j of L sits in lb.col(j), row offset i - j
  BandMatrix<Scalar> l(n, bw, 0);
  auto& lb = l.bands();
  const auto& ab = a.bands();
  const Index au = a.upper_bw();
  for (Index j = 0; j < n; ++j) {
    const Index len = std::min(n - 1, j + bw) - j + 1;
    auto col = lb.col(j).head(len);
    for (Index r = 0; r < len; ++r) col(r) = r <= a.lower_bw() ? ab(au + r, j) : Scalar(0);
    // left-looking update with the earlier columns that reach row j
    for (Index k = std::max<Index>(0, j - bw); k < j; ++k) {
      const Index off = j - k;
      const Index m = std::min(len, bw + 1 - off);
      col.head(m) -= lb(off, k) * lb.col(k).segment(off, m);
    }
    const Scalar d = col(0);
    if (!(d > pivot_tol)) {
      throw Error(ErrorCode::NotPositiveDefinite,
                  "pivot " + std::to_string(static_cast<double>(d)) + " at row " + std::to_string(j));
    }
    const Scalar ljj = std::sqrt(d);
    col(0) = ljj;
    col.tail(len - 1) /= ljj;
  }
  return l;
}

enum class Trans { No, Yes };

/// Solves L x = b (or L' x = b) for banded lower-triangular L.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> band_solve(
    const BandMatrix<Scalar>& l, const std::type_identity_t<Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>>& b,
    Trans trans = Trans::No) {
  const Index n = l.dim();
  require(b.size() == n, ErrorCode::DimensionMismatch, "band_solve: right-hand side length");
  require(l.upper_bw() == 0, ErrorCode::InvalidArgument, "band_solve expects a lower-triangular band");
  const Index bw = l.lower_bw();
  const auto& bands = l.bands();  // column j holds L(j.., j)
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x = b;
  for (Index i = 0; i < n; ++i) {
    if (bands(0, i) == Scalar(0)) {
      throw Error(ErrorCode::SingularDiagonal, "zero diagonal at row " + std::to_string(i));
    }
  }
  if (trans == Trans::No) {
    for (Index j = 0; j < n; ++j) {
      x(j) /= bands(0, j);
      const Index m = std::min(n - 1, j + bw) - j;
      if (m > 0) x.segment(j + 1, m) -= x(j) * bands.col(j).segment(1, m);
    }
  } else {
    for (Index i = n - 1; i >= 0; --i) {
      const Index m = std::min(n - 1, i + bw) - i;
      Scalar s = x(i);
      if (m > 0) s -= bands.col(i).segment(1, m).dot(x.segment(i + 1, m));
      x(i) = s / bands(0, i);
    }
  }
  return x;
}

/// Solves A x = b given the Cholesky factor of A.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> band_cholesky_solve(
    const BandMatrix<Scalar>& l, const std::type_identity_t<Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>>& b) {
  return band_solve(l, band_solve(l, b, Trans::No), Trans::Yes);
}

template <typename Scalar>
Scalar band_cholesky_logdet(const BandMatrix<Scalar>& l) {
  return Scalar(2) * l.bands().row(0).array().log().sum();
}

// ---------------------------------------------------------------------------
// Selection products

inline Eigen::VectorXd select_rows(const SelectionMatrix& s, const Eigen::Ref<const Eigen::VectorXd>& x) {
  require(x.size() == s.cols(), ErrorCode::DimensionMismatch, "select_rows: vector length");
  Eigen::VectorXd out(s.rows());
  for (Index k = 0; k < s.rows(); ++k) out(k) = x(s[k]);
  return out;
}

/// S' x: scatters x into a zero vector at the selected positions.
inline Eigen::VectorXd select_cols_embed(const SelectionMatrix& s, const Eigen::Ref<const Eigen::VectorXd>& x) {
  require(x.size() == s.rows(), ErrorCode::DimensionMismatch, "select_cols_embed: vector length");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(s.cols());
  for (Index k = 0; k < s.rows(); ++k) out(s[k]) = x(k);
  return out;
}

using BandMatrixd = BandMatrix<double>;

}  // namespace condvar

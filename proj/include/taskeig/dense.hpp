#pragma once

// Small column-major dense matrix and the fixed-order kernels used by every
// task body. Summation order is part of the contract: results must be
// bitwise reproducible no matter which worker runs a kernel.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace taskeig {

inline constexpr double eps = std::numeric_limits<double>::epsilon();
inline constexpr double safe_min = std::numeric_limits<double>::min();

class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  /// Build from row-major data (the order used by text matrix files).
  static Matrix from_row_major(std::size_t rows, std::size_t cols, std::span<const double> values) {
    if (values.size() != rows * cols) throw std::invalid_argument("Matrix: value count mismatch");
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) m(r, c) = values[r * cols + c];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept {
    assert(r < rows_ && c < cols_);
    return data_[c * rows_ + r];
  }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    assert(r < rows_ && c < cols_);
    return data_[c * rows_ + r];
  }

  double* col(std::size_t c) noexcept { return data_.data() + c * rows_; }
  const double* col(std::size_t c) const noexcept { return data_.data() + c * rows_; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  Matrix block(std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols) const {
    assert(r0 + rows <= rows_ && c0 + cols <= cols_);
    Matrix out(rows, cols);
    for (std::size_t c = 0; c < cols; ++c)
      std::copy_n(col(c0 + c) + r0, rows, out.col(c));
    return out;
  }

  void set_block(std::size_t r0, std::size_t c0, const Matrix& src) {
    assert(r0 + src.rows() <= rows_ && c0 + src.cols() <= cols_);
    for (std::size_t c = 0; c < src.cols(); ++c)
      std::copy_n(src.col(c), src.rows(), col(c0 + c) + r0);
  }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t c = 0; c < cols_; ++c)
      for (std::size_t r = 0; r < rows_; ++r) t(c, r) = (*this)(r, c);
    return t;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Trans { no, yes };

/// C = beta*C + alpha*op(A)*op(B). Loop nest is fixed (column of C outer,
/// inner dimension middle, rows innermost) so the result never depends on
/// who calls it.
inline void gemm(Trans ta, Trans tb, double alpha, const Matrix& a, const Matrix& b, double beta,
                 Matrix& c) {
  const std::size_t m = ta == Trans::no ? a.rows() : a.cols();
  const std::size_t k = ta == Trans::no ? a.cols() : a.rows();
  const std::size_t kb = tb == Trans::no ? b.rows() : b.cols();
  const std::size_t n = tb == Trans::no ? b.cols() : b.rows();
  if (k != kb || c.rows() != m || c.cols() != n) throw std::invalid_argument("gemm: dimension mismatch");

  if (beta != 1.0) {
    for (auto& x : c.data()) x = beta == 0.0 ? 0.0 : beta * x;
  }
  if (ta == Trans::no) {
    for (std::size_t j = 0; j < n; ++j) {
      double* cj = c.col(j);
      for (std::size_t l = 0; l < k; ++l) {
        const double blj = alpha * (tb == Trans::no ? b(l, j) : b(j, l));
        if (blj == 0.0) continue;
        const double* al = a.col(l);
        for (std::size_t i = 0; i < m; ++i) cj[i] += al[i] * blj;
      }
    }
  } else {
    // op(A) = A^T: inner products over contiguous columns of A.
    for (std::size_t j = 0; j < n; ++j) {
      double* cj = c.col(j);
      for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a.col(i);
        double sum = 0.0;
        if (tb == Trans::no) {
          const double* bj = b.col(j);
          for (std::size_t l = 0; l < k; ++l) sum += ai[l] * bj[l];
        } else {
          for (std::size_t l = 0; l < k; ++l) sum += ai[l] * b(j, l);
        }
        cj[i] += alpha * sum;
      }
    }
  }
}

inline Matrix multiply(const Matrix& a, const Matrix& b, Trans ta = Trans::no, Trans tb = Trans::no) {
  Matrix c(ta == Trans::no ? a.rows() : a.cols(), tb == Trans::no ? b.cols() : b.rows());
  gemm(ta, tb, 1.0, a, b, 0.0, c);
  return c;
}

inline double frobenius_norm(const Matrix& a) {
  double scale = 0.0, ssq = 1.0;
  for (double x : a.data()) {
    if (x == 0.0) continue;
    const double ax = std::abs(x);
    if (scale < ax) {
      ssq = 1.0 + ssq * (scale / ax) * (scale / ax);
      scale = ax;
    } else {
      ssq += (ax / scale) * (ax / scale);
    }
  }
  return scale * std::sqrt(ssq);
}

inline double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double x : a.data()) m = std::max(m, std::abs(x));
  return m;
}

inline Matrix subtract(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("subtract: dimension mismatch");
  Matrix d(a.rows(), a.cols());
  for (std::size_t i = 0; i < d.data().size(); ++i) d.data()[i] = a.data()[i] - b.data()[i];
  return d;
}

/// ||Q^T Q - I||_F
inline double orthogonality_defect(const Matrix& q) {
  Matrix g = multiply(q, q, Trans::yes, Trans::no);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return frobenius_norm(g);
}

/// ||A - Q B Q^T||_F
inline double similarity_residual(const Matrix& a, const Matrix& q, const Matrix& b) {
  const Matrix qb = multiply(q, b);
  Matrix r = a;
  gemm(Trans::no, Trans::yes, -1.0, qb, q, 1.0, r);
  return frobenius_norm(r);
}

/// Scaled Euclidean norm of a strided sequence; never overflows for finite input.
inline double norm2(const double* x, std::size_t n, std::size_t stride = 1) {
  double scale = 0.0, ssq = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ax = std::abs(x[i * stride]);
    if (ax == 0.0) continue;
    if (scale < ax) {
      ssq = 1.0 + ssq * (scale / ax) * (scale / ax);
      scale = ax;
    } else {
      ssq += (ax / scale) * (ax / scale);
    }
  }
  return scale * std::sqrt(ssq);
}

}  // namespace taskeig

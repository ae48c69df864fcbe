#pragma once

// Local orthogonal transformations (Householder reflectors, Givens
// rotations), their accumulation over a diagonal window, and level-3
// application of the accumulated product to off-diagonal slabs.

#include <array>
#include <variant>

#include "taskeig/dense.hpp"

namespace taskeig {

/// P = I - tau * v * v^T with v[0] == 1. `size` is 3, or 2 at the bottom of
/// a bulge chase (then v[2] is ignored).
struct Householder3 {
  std::array<double, 3> v{1.0, 0.0, 0.0};
  double tau = 0.0;
  std::size_t size = 3;
};

/// Rotation acting on index pair (i, j); maps (a, b) to (hypot(a, b), 0).
struct GivensRotation {
  double c = 1.0;
  double s = 0.0;
  std::size_t i = 0;
  std::size_t j = 1;
};

/// Generates a reflector in place: on return x[0] holds beta, x[1..] the
/// tail of v (v[0] == 1 implied). Returns tau. A vector that is already a
/// multiple of e1 gives tau == 0.
inline double make_reflector(double* x, std::size_t n) {
  if (n <= 1) return 0.0;
  const double xnorm = norm2(x + 1, n - 1);
  if (xnorm == 0.0) return 0.0;
  const double alpha = x[0];
  const double beta = -std::copysign(std::hypot(alpha, xnorm), alpha);
  const double tau = (beta - alpha) / beta;
  const double scale = 1.0 / (alpha - beta);
  for (std::size_t i = 1; i < n; ++i) x[i] *= scale;
  x[0] = beta;
  return tau;
}

inline Householder3 make_householder(std::array<double, 3> x, std::size_t size = 3) {
  Householder3 h;
  h.size = size;
  h.tau = make_reflector(x.data(), size);
  h.v = {1.0, size > 1 ? x[1] : 0.0, size > 2 ? x[2] : 0.0};
  if (h.tau == 0.0) h.v = {1.0, 0.0, 0.0};
  return h;
}

inline GivensRotation make_givens(double a, double b, std::size_t i = 0, std::size_t j = 1) {
  if (b == 0.0) return {1.0, 0.0, i, j};
  const double r = std::hypot(a, b);
  return {a / r, b / r, i, j};
}

// -- application to dense blocks ---------------------------------------------

/// Rows [row, row+size) of columns [c0, c1) <- P * rows.
inline void apply_left(const Householder3& h, Matrix& m, std::size_t row, std::size_t c0, std::size_t c1) {
  if (h.tau == 0.0) return;
  const double v1 = h.v[1], v2 = h.v[2];
  for (std::size_t c = c0; c < c1; ++c) {
    double* col = m.col(c) + row;
    if (h.size == 3) {
      const double sum = col[0] + v1 * col[1] + v2 * col[2];
      const double t = h.tau * sum;
      col[0] -= t;
      col[1] -= t * v1;
      col[2] -= t * v2;
    } else {
      const double t = h.tau * (col[0] + v1 * col[1]);
      col[0] -= t;
      col[1] -= t * v1;
    }
  }
}

/// Columns [col, col+size) of rows [r0, r1) <- columns * P.
inline void apply_right(const Householder3& h, Matrix& m, std::size_t col, std::size_t r0, std::size_t r1) {
  if (h.tau == 0.0) return;
  const double v1 = h.v[1], v2 = h.v[2];
  double* c0 = m.col(col);
  double* c1 = m.col(col + 1);
  if (h.size == 3) {
    double* c2 = m.col(col + 2);
    for (std::size_t r = r0; r < r1; ++r) {
      const double t = h.tau * (c0[r] + v1 * c1[r] + v2 * c2[r]);
      c0[r] -= t;
      c1[r] -= t * v1;
      c2[r] -= t * v2;
    }
  } else {
    for (std::size_t r = r0; r < r1; ++r) {
      const double t = h.tau * (c0[r] + v1 * c1[r]);
      c0[r] -= t;
      c1[r] -= t * v1;
    }
  }
}

inline void apply_left(const GivensRotation& g, Matrix& m, std::size_t c0, std::size_t c1) {
  for (std::size_t c = c0; c < c1; ++c) {
    const double x = m(g.i, c), y = m(g.j, c);
    m(g.i, c) = g.c * x + g.s * y;
    m(g.j, c) = -g.s * x + g.c * y;
  }
}

inline void apply_right(const GivensRotation& g, Matrix& m, std::size_t r0, std::size_t r1) {
  for (std::size_t r = r0; r < r1; ++r) {
    const double x = m(r, g.i), y = m(r, g.j);
    m(r, g.i) = g.c * x + g.s * y;
    m(r, g.j) = -g.s * x + g.c * y;
  }
}

// -- window accumulation -----------------------------------------------------

struct PlacedReflector {
  std::size_t offset = 0;  // first index the reflector acts on
  Householder3 h;
};

using LocalTransform = std::variant<GivensRotation, PlacedReflector>;

/// Orthogonal product of a window's local transformations; `begin`/`end`
/// give the window as a half-open range of global diagonal indices.
struct Accumulator {
  Matrix q;
  std::size_t begin = 0;
  std::size_t end = 0;

  static Accumulator identity(std::size_t begin, std::size_t end) {
    return {Matrix::identity(end - begin), begin, end};
  }
  std::size_t size() const noexcept { return q.rows(); }
};

/// Two-sided application of one transformation to the whole of a square
/// block, with Q <- Q * U accumulated alongside.
inline void apply_two_sided(const LocalTransform& t, Matrix& block, Matrix& q) {
  const std::size_t k = block.rows();
  if (const auto* g = std::get_if<GivensRotation>(&t)) {
    if (g->i >= k || g->j >= k) throw std::out_of_range("accumulate_window: rotation escapes window");
    apply_left(*g, block, 0, k);
    apply_right(*g, block, 0, k);
    apply_right(*g, q, 0, k);
  } else {
    const auto& r = std::get<PlacedReflector>(t);
    if (r.offset + r.h.size > k) throw std::out_of_range("accumulate_window: reflector escapes window");
    apply_left(r.h, block, r.offset, 0, k);
    apply_right(r.h, block, r.offset, 0, k);
    apply_right(r.h, q, r.offset, 0, k);
  }
}

/// block <- Q^T block Q with Q the ordered product of `transforms`.
inline Accumulator accumulate_window(Matrix& block, const std::vector<LocalTransform>& transforms,
                                     std::size_t begin = 0) {
  if (block.rows() != block.cols()) throw std::invalid_argument("accumulate_window: window must be square");
  Accumulator acc = Accumulator::identity(begin, begin + block.rows());
  for (const auto& t : transforms) apply_two_sided(t, block, acc.q);
  return acc;
}

/// slab * q  (slab is m x k)
inline Matrix apply_right(const Matrix& slab, const Accumulator& acc) {
  if (slab.cols() != acc.size()) throw std::invalid_argument("apply_right: dimension mismatch");
  return multiply(slab, acc.q);
}

/// q^T * slab  (slab is k x m)
inline Matrix apply_left(const Matrix& slab, const Accumulator& acc) {
  if (slab.rows() != acc.size()) throw std::invalid_argument("apply_left: dimension mismatch");
  return multiply(acc.q, slab, Trans::yes, Trans::no);
}

}  // namespace taskeig

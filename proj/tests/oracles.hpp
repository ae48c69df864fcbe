#pragma once

// Reference computations used by the tests. None of them call into the
// library's numerical kernels; they are slow, textbook formulations.

#include <algorithm>
#include <complex>
#include <random>
#include <set>
#include <vector>

#include "taskeig/dense.hpp"

namespace oracle {

using taskeig::Matrix;
using cld = std::complex<long double>;

inline Matrix random_matrix(std::size_t n, unsigned seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix a(n, n);
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t r = 0; r < n; ++r) a(r, c) = dist(gen);
  return a;
}

inline Matrix random_hessenberg(std::size_t n, unsigned seed) {
  Matrix a = random_matrix(n, seed);
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t r = c + 2; r < n; ++r) a(r, c) = 0.0;
  return a;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<long double>(a(i, k)) * b(k, j);
      c(i, j) = static_cast<double>(s);
    }
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline double fro(const Matrix& a) {
  long double s = 0;
  for (double x : a.data()) s += static_cast<long double>(x) * x;
  return static_cast<double>(std::sqrt(s));
}

inline double fro_diff(const Matrix& a, const Matrix& b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const long double d = static_cast<long double>(a.data()[i]) - b.data()[i];
    s += d * d;
  }
  return static_cast<double>(std::sqrt(s));
}

/// ||A - Q B Q^T||_F / ||A||_F in extended precision.
inline double similarity_error(const Matrix& a, const Matrix& q, const Matrix& b) {
  const double na = fro(a);
  const double d = fro_diff(a, matmul(matmul(q, b), transpose(q)));
  return na == 0.0 ? d : d / na;
}

inline double orth_error(const Matrix& q) {
  Matrix g = matmul(transpose(q), q);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return fro(g);
}

/// Householder QR, returns Q (explicit) and R.
inline std::pair<Matrix, Matrix> householder_qr(Matrix r) {
  const std::size_t m = r.rows(), n = r.cols();
  Matrix q = Matrix::identity(m);
  for (std::size_t k = 0; k < std::min(m - 1, n); ++k) {
    std::vector<long double> v(m, 0.0L);
    long double norm = 0;
    for (std::size_t i = k; i < m; ++i) norm += static_cast<long double>(r(i, k)) * r(i, k);
    norm = std::sqrt(norm);
    if (norm == 0) continue;
    const long double alpha = r(k, k) >= 0 ? -norm : norm;
    for (std::size_t i = k; i < m; ++i) v[i] = r(i, k);
    v[k] -= alpha;
    long double vv = 0;
    for (std::size_t i = k; i < m; ++i) vv += v[i] * v[i];
    if (vv == 0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      long double s = 0;
      for (std::size_t i = k; i < m; ++i) s += v[i] * r(i, j);
      s = 2 * s / vv;
      for (std::size_t i = k; i < m; ++i) r(i, j) = static_cast<double>(r(i, j) - s * v[i]);
    }
    for (std::size_t i = 0; i < m; ++i) {
      long double s = 0;
      for (std::size_t j = k; j < m; ++j) s += q(i, j) * v[j];
      s = 2 * s / vv;
      for (std::size_t j = k; j < m; ++j) q(i, j) = static_cast<double>(q(i, j) - s * v[j]);
    }
  }
  return {q, r};
}

/// Explicit double-shift QR step: M = (H - s1)(H - s2) = QR, returns Q^T H Q.
inline Matrix explicit_double_shift(const Matrix& h, std::complex<double> s1, std::complex<double> s2) {
  const std::size_t n = h.rows();
  const double tr = (s1 + s2).real();
  const double det = (s1 * s2).real();
  Matrix m = matmul(h, h);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) += -tr * h(i, j) + (i == j ? det : 0.0);
  auto [q, r] = householder_qr(m);
  return matmul(matmul(transpose(q), h), q);
}

/// Characteristic polynomial det(xI - A), coefficients c[0..n] with c[n] = 1,
/// by the Faddeev-LeVerrier recurrence in long double.
inline std::vector<long double> char_poly(const Matrix& a) {
  const std::size_t n = a.rows();
  std::vector<long double> c(n + 1, 0.0L);
  c[n] = 1.0L;
  std::vector<long double> m(n * n, 0.0L), am(n * n);
  for (std::size_t k = 1; k <= n; ++k) {
    // M_k = A M_{k-1} + c_{n-k+1} I
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        long double s = 0;
        for (std::size_t l = 0; l < n; ++l) s += static_cast<long double>(a(i, l)) * m[l * n + j];
        am[i * n + j] = s;
      }
    for (std::size_t i = 0; i < n; ++i) am[i * n + i] += c[n - k + 1];
    m = am;
    long double tr = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < n; ++l) tr += static_cast<long double>(a(i, l)) * m[l * n + i];
    c[n - k] = -tr / static_cast<long double>(k);
  }
  return c;
}

/// Roots of a monic polynomial by the Aberth-Ehrlich iteration.
inline std::vector<std::complex<double>> poly_roots(const std::vector<long double>& c) {
  const std::size_t n = c.size() - 1;
  long double radius = 0;
  for (std::size_t i = 0; i < n; ++i) radius = std::max(radius, std::pow(std::abs(c[i]), 1.0L / (n - i)));
  radius = 2 * radius + 1;
  std::vector<cld> z(n);
  for (std::size_t i = 0; i < n; ++i)
    z[i] = std::polar(radius * 0.5L, 2.0L * 3.14159265358979323846L * i / n + 0.4L);
  auto eval = [&](cld x, cld& d) {
    cld p = c[n], dp = 0;
    for (std::size_t i = n; i-- > 0;) {
      dp = dp * x + p;
      p = p * x + c[i];
    }
    d = dp;
    return p;
  };
  for (int it = 0; it < 500; ++it) {
    long double moved = 0;
    for (std::size_t i = 0; i < n; ++i) {
      cld d;
      const cld p = eval(z[i], d);
      if (p == cld(0)) continue;
      const cld ratio = p / d;
      cld sum = 0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) sum += 1.0L / (z[i] - z[j]);
      const cld w = ratio / (1.0L - ratio * sum);
      z[i] -= w;
      moved = std::max(moved, std::abs(w));
    }
    if (moved < 1e-30L) break;
  }
  std::vector<std::complex<double>> out;
  for (auto x : z) out.emplace_back(static_cast<double>(x.real()), static_cast<double>(x.imag()));
  return out;
}

/// Greedy matching distance between two eigenvalue multisets.
inline double multiset_distance(std::vector<std::complex<double>> a, std::vector<std::complex<double>> b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double worst = 0;
  for (auto x : a) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < b.size(); ++j)
      if (std::abs(b[j] - x) < std::abs(b[best] - x)) best = j;
    worst = std::max(worst, std::abs(b[best] - x));
    b.erase(b.begin() + static_cast<long>(best));
  }
  return worst;
}

/// det(A - lambda I) by complex partial-pivoting LU in long double.
inline cld shifted_det(const Matrix& a, std::complex<double> lambda) {
  const std::size_t n = a.rows();
  std::vector<cld> m(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m[i * n + j] = cld(a(i, j)) - (i == j ? cld(lambda.real(), lambda.imag()) : cld(0));
  cld det = 1;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t r = k + 1; r < n; ++r)
      if (std::abs(m[r * n + k]) > std::abs(m[p * n + k])) p = r;
    if (m[p * n + k] == cld(0)) return 0;
    if (p != k) {
      for (std::size_t c = 0; c < n; ++c) std::swap(m[p * n + c], m[k * n + c]);
      det = -det;
    }
    det *= m[k * n + k];
    for (std::size_t r = k + 1; r < n; ++r) {
      const cld f = m[r * n + k] / m[k * n + k];
      for (std::size_t c = k; c < n; ++c) m[r * n + c] -= f * m[k * n + c];
    }
  }
  return det;
}

inline long double determinant(const Matrix& a) { return shifted_det(a, 0.0).real(); }

// -- quasi-triangular helpers ------------------------------------------------

struct Block {
  std::size_t start, size;
  std::complex<double> lambda;  // +im for pairs
};

inline std::vector<Block> blocks_of(const Matrix& t) {
  std::vector<Block> out;
  const std::size_t n = t.rows();
  for (std::size_t i = 0; i < n;) {
    if (i + 1 < n && t(i + 1, i) != 0.0) {
      const double a = t(i, i), b = t(i, i + 1), c = t(i + 1, i), d = t(i + 1, i + 1);
      const double tr = 0.5 * (a + d), disc = 0.25 * (a - d) * (a - d) + b * c;
      out.push_back({i, 2, {tr, std::sqrt(std::max(0.0, -disc))}});
      i += 2;
    } else {
      out.push_back({i, 1, {t(i, i), 0.0}});
      i += 1;
    }
  }
  return out;
}

/// Random quasi-triangular matrix with standardized 2x2 blocks at random
/// positions; eigenvalues well separated with high probability.
inline Matrix random_quasi_triangular(std::size_t n, unsigned seed, double pair_prob = 0.4) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix t(n, n);
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t r = 0; r <= c; ++r) t(r, c) = u(gen);
  for (std::size_t i = 0; i < n;) {
    if (i + 1 < n && (u(gen) + 1.0) / 2.0 < pair_prob) {
      const double a = 2.0 * u(gen);
      const double b = 0.5 + std::abs(u(gen)), c = -(0.5 + std::abs(u(gen)));
      t(i, i) = a;
      t(i + 1, i + 1) = a;
      t(i, i + 1) = b;
      t(i + 1, i) = c;
      i += 2;
    } else {
      t(i, i) = 3.0 * u(gen);
      i += 1;
    }
  }
  return t;
}

/// Orthonormal basis (k x q) of the null space of m (k x k, rank k - q), via
/// column-pivoted Householder QR of m^T.
inline Matrix null_space(const Matrix& m, std::size_t q) {
  const std::size_t k = m.rows();
  Matrix mt = transpose(m);
  // pivoted QR: choose the largest remaining column each step
  Matrix work = mt;
  Matrix qfull = Matrix::identity(k);
  for (std::size_t step = 0; step < k - q; ++step) {
    std::size_t best = step;
    double bn = -1;
    for (std::size_t c = step; c < k; ++c) {
      double s = 0;
      for (std::size_t r = step; r < k; ++r) s += work(r, c) * work(r, c);
      if (s > bn) {
        bn = s;
        best = c;
      }
    }
    for (std::size_t r = 0; r < k; ++r) std::swap(work(r, step), work(r, best));
    Matrix sub(k, 1);
    std::vector<double> v(k, 0.0);
    double norm = 0;
    for (std::size_t r = step; r < k; ++r) norm += work(r, step) * work(r, step);
    norm = std::sqrt(norm);
    const double alpha = work(step, step) >= 0 ? -norm : norm;
    for (std::size_t r = step; r < k; ++r) v[r] = work(r, step);
    v[step] -= alpha;
    double vv = 0;
    for (double x : v) vv += x * x;
    if (vv == 0) continue;
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0;
      for (std::size_t r = step; r < k; ++r) s += v[r] * work(r, c);
      s = 2 * s / vv;
      for (std::size_t r = step; r < k; ++r) work(r, c) -= s * v[r];
    }
    for (std::size_t r = 0; r < k; ++r) {
      double s = 0;
      for (std::size_t j = step; j < k; ++j) s += qfull(r, j) * v[j];
      s = 2 * s / vv;
      for (std::size_t j = step; j < k; ++j) qfull(r, j) -= s * v[j];
    }
  }
  Matrix out(k, q);
  for (std::size_t j = 0; j < q; ++j)
    for (std::size_t r = 0; r < k; ++r) out(r, j) = qfull(r, k - q + j);
  return out;
}

/// Swaps adjacent blocks at `pos` (sizes p, q) of a dense quasi-triangular t by
/// projecting onto the invariant subspace of the lower block. Returns the
/// similarity residual of the window, or infinity when the swap is unusable.
inline double naive_swap(Matrix& t, std::size_t pos, std::size_t p, std::size_t q) {
  const std::size_t k = p + q, n = t.rows();
  Matrix w(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) w(i, j) = t(pos + i, pos + j);
  Matrix m(k, k);
  if (q == 1) {
    const double lambda = w(p, p);
    m = w;
    for (std::size_t i = 0; i < k; ++i) m(i, i) -= lambda;
  } else {
    const double a = w(p, p), b = w(p, p + 1), c = w(p + 1, p), d = w(p + 1, p + 1);
    const double tr = a + d, det = a * d - b * c;
    m = matmul(w, w);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) m(i, j) += -tr * w(i, j) + (i == j ? det : 0.0);
  }
  const Matrix basis = null_space(m, q);
  // complete to an orthogonal matrix: null-space basis first, then its complement
  auto [z, r] = householder_qr(basis);
  (void)r;
  Matrix full(n, n);
  for (std::size_t i = 0; i < n; ++i) full(i, i) = 1.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) full(pos + i, pos + j) = z(i, j);
  Matrix next = matmul(matmul(transpose(full), t), full);
  double leak = 0;
  for (std::size_t i = q; i < k; ++i)
    for (std::size_t j = 0; j < q; ++j) {
      leak = std::max(leak, std::abs(next(pos + i, pos + j)));
      next(pos + i, pos + j) = 0.0;
    }
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t rr = c + 2; rr < n; ++rr) next(rr, c) = 0.0;
  if (q == 1 && p == 1) next(pos + 1, pos) = 0.0;
  if (q == 2 && p == 1) next(pos + 2, pos + 1) = 0.0;
  if (q == 1 && p == 2) next(pos + 1, pos) = 0.0;
  const double err = similarity_error(t, full, next);
  t = next;
  return std::max(err, leak);
}

/// Naive reordering: bubbles selected blocks to the front one adjacent swap
/// at a time; returns the final block list (sizes and eigenvalues).
inline std::vector<Block> naive_reorder(Matrix t, const std::vector<bool>& selected, double* worst_step = nullptr) {
  std::vector<Block> blocks = blocks_of(t);
  std::vector<bool> sel = selected;
  double worst = 0;
  std::size_t lead = 0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (!sel[i]) continue;
    for (std::size_t j = i; j > lead; --j) {
      const std::size_t pos = blocks[j - 1].start;
      worst = std::max(worst, naive_swap(t, pos, blocks[j - 1].size, blocks[j].size));
      std::swap(blocks[j - 1], blocks[j]);
      std::swap(sel[j - 1], sel[j]);
      blocks[j - 1].start = pos;
      blocks[j].start = pos + blocks[j - 1].size;
    }
    ++lead;
  }
  if (worst_step) *worst_step = worst;
  return blocks;
}

/// Unprotected backsubstitution for the eigenvector of the 1x1 block k of an
/// upper triangular t (y_k = 1).
inline std::vector<double> naive_triangular_eigvec(const Matrix& t, std::size_t k) {
  std::vector<double> y(t.rows(), 0.0);
  y[k] = 1.0;
  const double lambda = t(k, k);
  for (std::size_t i = k; i-- > 0;) {
    double s = 0;
    for (std::size_t j = i + 1; j <= k; ++j) s += t(i, j) * y[j];
    y[i] = -s / (t(i, i) - lambda);
  }
  return y;
}

// -- task footprints ---------------------------------------------------------

struct Footprint {
  std::set<int> reads, writes;
};

/// Every pair (i, j), i < j, whose footprints conflict.
inline std::set<std::pair<std::size_t, std::size_t>> conflict_edges(const std::vector<Footprint>& f) {
  std::set<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t j = 0; j < f.size(); ++j)
    for (std::size_t i = 0; i < j; ++i) {
      bool hit = false;
      for (int x : f[i].writes)
        if (f[j].reads.count(x) || f[j].writes.count(x)) hit = true;
      for (int x : f[i].reads)
        if (f[j].writes.count(x)) hit = true;
      if (hit) e.insert({i, j});
    }
  return e;
}

inline std::vector<std::vector<bool>> closure(std::size_t n, const std::set<std::pair<std::size_t, std::size_t>>& e) {
  std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
  for (auto [a, b] : e) r[a][b] = true;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (r[i][k])
        for (std::size_t j = 0; j < n; ++j)
          if (r[k][j]) r[i][j] = true;
  return r;
}

}  // namespace oracle

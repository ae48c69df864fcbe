#pragma once

// Eigenvectors from the real Schur form. Backsubstitution on S - lambda I is
// protected against overflow by power-of-two downscaling: each column carries
// a scale alpha and represents v / alpha. The backtransform x = Q1 (Q2 y) is
// done by tile-row product tasks.

#include <complex>
#include <memory>

#include "taskeig/reorder.hpp"
#include "taskeig/runtime.hpp"
#include "taskeig/schur_structure.hpp"

namespace taskeig {

/// Overflow threshold for every stored value of a protected solve.
inline const double overflow_bound = std::ldexp(1.0, 500);
/// Smallest usable scale; below it a column is given up.
inline const double min_scale = std::ldexp(1.0, -1022);

namespace detail {

inline bool within_bound(double v) { return v <= overflow_bound * (1.0 - 4.0 * eps); }

inline double log2_or_min(double x) { return x == 0.0 ? -std::numeric_limits<double>::infinity() : std::log2(x); }

/// Largest power of two 2^k, k <= 0, accepted by `safe`, starting from the
/// conservative exponent `guess`.
template <typename Safe>
double largest_safe_power(int guess, Safe safe) {
  int k = std::min(guess, 0);
  k = std::max(k, -2200);
  while (k > -2200 && !safe(k)) --k;
  while (k < 0 && safe(k + 1)) ++k;
  return std::ldexp(1.0, k);
}

}  // namespace detail

/// Scale sigma (a power of two in (0, 1]) that keeps sigma * |b| / |d| within
/// the overflow bound. d must be nonzero.
inline double protect_division(double b, double d) {
  b = std::abs(b);
  d = std::abs(d);
  if (d == 0.0) throw std::invalid_argument("protect_division: zero divisor");
  auto safe = [&](int k) { return std::ldexp(b, k) / d <= overflow_bound * (1.0 - 4.0 * eps) || std::ldexp(b, k) == 0.0; };
  if (safe(0)) return 1.0;
  const double lg = 500.0 + std::log2(d) - std::log2(b);
  return detail::largest_safe_power(static_cast<int>(std::floor(lg)) - 1, safe);
}

/// Scale sigma for the update y <- y - t x, where ynorm bounds |y|, t the
/// multiplier and xnorm |x|: afterwards sigma*(ynorm + t*xnorm) stays within
/// the overflow bound.
inline double protect_update(double t, double xnorm, double ynorm) {
  t = std::abs(t);
  auto bound = [&](int k) { return std::ldexp(ynorm, k) + t * std::ldexp(xnorm, k); };
  auto safe = [&](int k) { return detail::within_bound(bound(k)); };
  if (safe(0)) return 1.0;
  const double big = std::max(detail::log2_or_min(ynorm), detail::log2_or_min(t) + detail::log2_or_min(xnorm));
  return detail::largest_safe_power(static_cast<int>(std::floor(500.0 - big)) - 2, safe);
}

/// v / alpha is the represented vector. Two columns (u, w) stand for the
/// complex vector u + i w of the eigenvalue lambda (lambda.imag() > 0).
struct ScaledVector {
  Matrix v;
  double alpha = 1.0;
  std::complex<double> lambda;
  std::size_t block_start = 0;
  std::size_t block_size = 1;
  bool failed = false;
};

enum class Basis { schur, original };

struct EigenvectorSet {
  std::vector<ScaledVector> columns;
  Basis basis = Basis::schur;
};

namespace detail {

inline double magnitude(double x) { return std::abs(x); }
inline double magnitude(std::complex<double> x) { return std::abs(x); }

/// Backsubstitution for one eigenvalue, in real or complex arithmetic.
template <typename T>
class ColumnSolver {
public:
  ColumnSolver(const Matrix& s, const SchurStructure& st, const std::vector<double>& colnorm, std::size_t block)
      : s_(s), st_(st), colnorm_(colnorm), block_(block), x_(s.rows(), T{}) {}

  ScaledVector solve() {
    const DiagBlock own = st_.blocks[block_];
    const auto& e = st_.eigen[block_];
    lambda_ = T{};
    if constexpr (std::is_same_v<T, double>) {
      lambda_ = e.re;
      x_[own.start] = 1.0;
    } else {
      lambda_ = T(e.re, e.im);
      // eigenvector of the standardized block [a b; c a]
      const double b = s_(own.start, own.start + 1), c = s_(own.start + 1, own.start);
      const double w = e.im;
      if (std::abs(b) >= std::abs(c)) {
        x_[own.start] = 1.0;
        x_[own.start + 1] = T(0.0, w / b);
      } else {
        x_[own.start] = T(0.0, -b / w);
        x_[own.start + 1] = 1.0;
      }
    }
    smin_ = std::max(eps * std::abs(std::complex<double>(e.re, e.im)), safe_min);

    update_above(own);
    for (std::size_t j = block_; j-- > 0 && !failed_;) {
      const DiagBlock blk = st_.blocks[j];
      if (blk.size == 1) solve_1x1(blk.start);
      else solve_2x2(blk.start);
      if (!failed_) update_above(blk);
    }

    ScaledVector out;
    out.alpha = alpha_;
    out.lambda = std::complex<double>(e.re, e.im);
    out.block_start = own.start;
    out.block_size = own.size;
    out.failed = failed_;
    const std::size_t n = s_.rows();
    out.v = Matrix(n, std::is_same_v<T, double> ? 1 : 2);
    for (std::size_t i = 0; i < n; ++i) {
      if constexpr (std::is_same_v<T, double>) {
        out.v(i, 0) = x_[i];
      } else {
        out.v(i, 0) = x_[i].real();
        out.v(i, 1) = x_[i].imag();
      }
    }
    return out;
  }

private:
  void rescale(double sigma) {
    if (sigma == 1.0) return;
    for (auto& v : x_) v *= sigma;
    alpha_ *= sigma;
    if (alpha_ < min_scale) failed_ = true;
  }

  double norm_above(std::size_t end) const {
    double m = 0.0;
    for (std::size_t i = 0; i < end; ++i) m = std::max(m, magnitude(x_[i]));
    return m;
  }

  // x[0, start) -= S[0, start; block cols] * x[block]
  void update_above(const DiagBlock& blk) {
    if (blk.start == 0) return;
    double t = 0.0, xn = 0.0;
    for (std::size_t c = blk.start; c < blk.start + blk.size; ++c) {
      t += colnorm_[c];
      xn = std::max(xn, magnitude(x_[c]));
    }
    rescale(protect_update(t, xn, norm_above(blk.start)));
    if (failed_) return;
    for (std::size_t c = blk.start; c < blk.start + blk.size; ++c) {
      const T xc = x_[c];
      if (xc == T{}) continue;
      const double* col = s_.col(c);
      for (std::size_t i = 0; i < blk.start; ++i) x_[i] -= col[i] * xc;
    }
  }

  void solve_1x1(std::size_t j) {
    const T d = s_(j, j) - lambda_;
    if (magnitude(d) < smin_) {
      if (x_[j] == T{}) return;
      failed_ = true;
      return;
    }
    rescale(protect_division(magnitude(x_[j]), magnitude(d)));
    if (failed_) return;
    x_[j] /= d;
  }

  void solve_2x2(std::size_t j) {
    T m00 = s_(j, j) - lambda_, m01 = s_(j, j + 1);
    T m10 = s_(j + 1, j), m11 = s_(j + 1, j + 1) - lambda_;
    const double big = std::max({magnitude(m00), magnitude(m01), magnitude(m10), magnitude(m11)});
    const double scale = std::ldexp(1.0, std::ilogb(big));
    m00 /= scale;
    m01 /= scale;
    m10 /= scale;
    m11 /= scale;
    const T det = m00 * m11 - m01 * m10;
    const double lim = smin_ / scale;
    if (magnitude(det) < lim * lim || det == T{}) {
      if (x_[j] == T{} && x_[j + 1] == T{}) return;
      failed_ = true;
      return;
    }
    const T r0 = x_[j], r1 = x_[j + 1];
    T u0 = m11 * r0 - m01 * r1;
    T u1 = -m10 * r0 + m00 * r1;
    const double sigma1 = protect_division(std::max(magnitude(u0), magnitude(u1)), magnitude(det));
    rescale(sigma1);
    if (failed_) return;
    u0 = u0 * sigma1 / det;
    u1 = u1 * sigma1 / det;
    const double sigma2 = protect_division(std::max(magnitude(u0), magnitude(u1)), scale);
    rescale(sigma2);
    if (failed_) return;
    x_[j] = u0 * sigma2 / scale;
    x_[j + 1] = u1 * sigma2 / scale;
  }

  const Matrix& s_;
  const SchurStructure& st_;
  const std::vector<double>& colnorm_;
  std::size_t block_;
  std::vector<T> x_;
  T lambda_{};
  double alpha_ = 1.0;
  double smin_ = 0.0;
  bool failed_ = false;
};

/// Max |S(i, c)| over the rows above the diagonal block holding column c.
inline std::vector<double> column_norms_above(const Matrix& s, const SchurStructure& st) {
  std::vector<double> out(s.rows(), 0.0);
  for (const auto& b : st.blocks)
    for (std::size_t c = b.start; c < b.start + b.size; ++c) {
      double m = 0.0;
      for (std::size_t i = 0; i < b.start; ++i) m = std::max(m, std::abs(s(i, c)));
      out[c] = m;
    }
  return out;
}

}  // namespace detail

/// Solves (S - lambda I) y = 0 for every selected block. Vectors come back
/// unnormalized (the eigenvalue's own leading component is 1 before scaling).
inline EigenvectorSet solve_schur_eigenvectors(const TiledMatrix& s, const SchurStructure& st,
                                               const EigenSelection& sel, const ExecPolicy& policy = {}) {
  check_structure(s, st);
  if (sel.selected.size() != st.blocks.size()) throw std::invalid_argument("eigenvector selection size mismatch");
  std::vector<std::size_t> picked;
  for (std::size_t i = 0; i < st.blocks.size(); ++i)
    if (sel.selected[i]) picked.push_back(i);

  EigenvectorSet set;
  set.columns.resize(picked.size());
  if (picked.empty()) return set;

  auto& src = const_cast<TiledMatrix&>(s);
  auto dense = std::make_shared<Matrix>();
  auto norms = std::make_shared<std::vector<double>>();
  DataHandle staged(1), outputs(picked.size());
  TaskGraph graph;

  TaskNode stage;
  stage.kind = TaskKind::custom;
  stage.reads = footprint(src, 0, 0, s.order(), s.order());
  stage.writes.push_back(HandleRef{&staged, 0});
  stage.body = [&src, dense, norms, &st] {
    *dense = to_dense(src);
    *norms = detail::column_norms_above(*dense, st);
  };
  graph.insert(std::move(stage));

  for (std::size_t i = 0; i < picked.size(); ++i) {
    TaskNode t;
    t.kind = TaskKind::custom;
    t.priority = update_priority;
    t.reads.push_back(HandleRef{&staged, 0});
    t.writes.push_back(HandleRef{&outputs, i});
    t.body = [dense, norms, &st, &set, i, blk = picked[i]] {
      if (st.blocks[blk].size == 1)
        set.columns[i] = detail::ColumnSolver<double>(*dense, st, *norms, blk).solve();
      else
        set.columns[i] = detail::ColumnSolver<std::complex<double>>(*dense, st, *norms, blk).solve();
    };
    graph.insert(std::move(t));
  }
  execute_or_throw(graph, policy);
  return set;
}

/// Unit 2-norm version of a column (alpha becomes 1). The scale cancels, so
/// the stored v is normalized directly.
inline ScaledVector normalized(ScaledVector x) {
  if (x.failed) return x;
  const double nrm = norm2(x.v.data().data(), x.v.data().size());
  if (nrm == 0.0 || !std::isfinite(nrm)) {
    x.failed = true;
    return x;
  }
  for (double& v : x.v.data()) v /= nrm;
  x.alpha = 1.0;
  return x;
}

inline EigenvectorSet normalized(EigenvectorSet set) {
  for (auto& c : set.columns) c = normalized(std::move(c));
  return set;
}

/// x = Q1 (Q2 y) for every column, normalized to unit 2-norm.
inline EigenvectorSet backtransform(const EigenvectorSet& vecs, const TiledMatrix& q1, const TiledMatrix& q2,
                                    const ExecPolicy& policy = {}) {
  if (vecs.basis != Basis::schur) throw std::invalid_argument("backtransform: vectors are not in the Schur basis");
  const std::size_t n = q1.order();
  if (q2.order() != n || q1.tile_size() != q2.tile_size()) throw std::invalid_argument("backtransform: dimension mismatch");
  std::size_t width = 0;
  for (const auto& c : vecs.columns) {
    if (c.v.rows() != n) throw std::invalid_argument("backtransform: dimension mismatch");
    width += c.v.cols();
  }
  EigenvectorSet out{vecs.columns, Basis::original};
  if (width == 0) return out;

  auto y = std::make_shared<Matrix>(n, width);
  for (std::size_t c = 0, k = 0; c < vecs.columns.size(); ++c)
    for (std::size_t j = 0; j < vecs.columns[c].v.cols(); ++j, ++k)
      std::copy_n(vecs.columns[c].v.col(j), n, y->col(k));
  auto w1 = std::make_shared<Matrix>(n, width);
  auto w2 = std::make_shared<Matrix>(n, width);

  const std::size_t b = q1.tile_size();
  const std::size_t rows = q1.grid();
  DataHandle hy(1), h1(rows), h2(rows), hout(vecs.columns.size());
  auto& m1 = const_cast<TiledMatrix&>(q1);
  auto& m2 = const_cast<TiledMatrix&>(q2);
  TaskGraph graph;

  auto product_stage = [&](TiledMatrix& q, std::shared_ptr<Matrix> in, std::shared_ptr<Matrix> dst,
                           const std::vector<DataRef>& in_refs, DataHandle& dst_handle) {
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t r0 = r * b, r1 = std::min(n, r0 + b);
      TaskNode t;
      t.kind = TaskKind::left_update;
      t.priority = update_priority;
      t.reads = footprint(q, r0, 0, r1 - r0, n);
      append(t.reads, in_refs);
      t.writes.push_back(HandleRef{&dst_handle, r});
      t.body = [&q, in, dst, r0, r1, n] {
        const Matrix part = multiply(q.read_block(r0, 0, r1 - r0, n), *in);
        for (std::size_t c = 0; c < part.cols(); ++c) std::copy_n(part.col(c), r1 - r0, dst->col(c) + r0);
      };
      graph.insert(std::move(t));
    }
  };
  std::vector<DataRef> y_ref{HandleRef{&hy, 0}};
  std::vector<DataRef> w1_refs, w2_refs;
  for (std::size_t r = 0; r < rows; ++r) {
    w1_refs.push_back(HandleRef{&h1, r});
    w2_refs.push_back(HandleRef{&h2, r});
  }
  product_stage(m2, y, w1, y_ref, h1);
  product_stage(m1, w1, w2, w1_refs, h2);

  for (std::size_t c = 0, k = 0; c < out.columns.size(); ++c) {
    const std::size_t cols = out.columns[c].v.cols();
    TaskNode t;
    t.kind = TaskKind::custom;
    t.reads = w2_refs;
    t.writes.push_back(HandleRef{&hout, c});
    t.body = [&out, w2, c, k, cols, n] {
      auto& col = out.columns[c];
      for (std::size_t j = 0; j < cols; ++j) std::copy_n(w2->col(k + j), n, col.v.col(j));
      col = normalized(std::move(col));
    };
    graph.insert(std::move(t));
    k += cols;
  }
  execute_or_throw(graph, policy);
  return out;
}

}  // namespace taskeig

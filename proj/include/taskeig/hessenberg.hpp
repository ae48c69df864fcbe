#pragma once

// Orthogonal reduction A = Q1 H Q1^T to upper Hessenberg form.
//
// Blocked scheme: a panel task reduces `panel_width` columns with the
// right-hand updates deferred (Y = A V T, compact WY Q = I - V T V^T), then
// the trailing matrix and Q1 are updated by tile-sized slab tasks.

#include <memory>

#include "taskeig/runtime.hpp"
#include "taskeig/slab_tasks.hpp"
#include "taskeig/transform_kernels.hpp"

namespace taskeig {

struct HessenbergResult {
  TiledMatrix h;
  TiledMatrix q1;
};

namespace detail {

struct PanelFactors {
  std::size_t k = 0;   // first panel column
  std::size_t nb = 0;  // reflectors in this panel
  Matrix v;            // (n-k-1) x nb, rows k+1..n-1, unit lower trapezoidal
  Matrix t;            // nb x nb upper triangular
  Matrix y;            // n x nb, A V T with A taken at panel start
  DataHandle handle{1};
};

inline void factor_panel(TiledMatrix& a, PanelFactors& p) {
  const std::size_t n = a.order();
  const std::size_t k = p.k, nb = p.nb;
  const std::size_t m = n - k - 1;
  const Matrix a0 = a.read_block(0, k, n, n - k);
  Matrix panel(n, nb);
  p.v = Matrix(m, nb);
  p.t = Matrix(nb, nb);
  p.y = Matrix(n, nb);
  std::vector<double> col(n), w(nb), z(nb);

  for (std::size_t i = 0; i < nb; ++i) {
    const std::size_t j = k + i;
    std::copy_n(a0.col(i), n, col.begin());
    if (i > 0) {
      // deferred right updates of the previous reflectors
      for (std::size_t l = 0; l < i; ++l) {
        const double vjl = p.v(j - k - 1, l);
        if (vjl == 0.0) continue;
        const double* yl = p.y.col(l);
        for (std::size_t r = 0; r < n; ++r) col[r] -= yl[r] * vjl;
      }
      // left update with Q_prev^T = I - V T^T V^T on rows k+1..n-1
      for (std::size_t l = 0; l < i; ++l) {
        const double* vl = p.v.col(l);
        double s = 0.0;
        for (std::size_t r = 0; r < m; ++r) s += vl[r] * col[k + 1 + r];
        w[l] = s;
      }
      for (std::size_t l = i; l-- > 0;) {
        double s = 0.0;
        for (std::size_t q = 0; q <= l; ++q) s += p.t(q, l) * w[q];
        w[l] = s;
      }
      for (std::size_t l = 0; l < i; ++l) {
        const double* vl = p.v.col(l);
        for (std::size_t r = 0; r < m; ++r) col[k + 1 + r] -= vl[r] * w[l];
      }
    }

    double* x = col.data() + j + 1;
    const std::size_t len = n - j - 1;
    const double tau = make_reflector(x, len);
    double* vi = p.v.col(i);
    vi[j - k] = 1.0;
    for (std::size_t r = 1; r < len; ++r) vi[j - k + r] = tau == 0.0 ? 0.0 : x[r];
    for (std::size_t r = 1; r < len; ++r) x[r] = 0.0;
    std::copy_n(col.begin(), n, panel.col(i));

    // z = V_prev^T v
    for (std::size_t l = 0; l < i; ++l) {
      const double* vl = p.v.col(l);
      double s = 0.0;
      for (std::size_t r = j - k; r < m; ++r) s += vl[r] * vi[r];
      z[l] = s;
    }
    for (std::size_t l = 0; l < i; ++l) {
      double s = 0.0;
      for (std::size_t q = l; q < i; ++q) s += p.t(l, q) * z[q];
      p.t(l, i) = -tau * s;
    }
    p.t(i, i) = tau;

    // Y(:, i) = tau * (A0(:, j+1:n) v - Y_prev z)
    double* yi = p.y.col(i);
    for (std::size_t c = 0; c < len; ++c) {
      const double vc = vi[j - k + c];
      if (vc == 0.0) continue;
      const double* ac = a0.col(j + 1 + c - k);
      for (std::size_t r = 0; r < n; ++r) yi[r] += ac[r] * vc;
    }
    for (std::size_t l = 0; l < i; ++l) {
      const double* yl = p.y.col(l);
      for (std::size_t r = 0; r < n; ++r) yi[r] -= yl[r] * z[l];
    }
    for (std::size_t r = 0; r < n; ++r) yi[r] *= tau;
  }
  a.write_block(0, k, panel);
}

}  // namespace detail

/// Reduces `a` (left untouched) to upper Hessenberg form. panel_width == 0
/// selects the tile size.
inline HessenbergResult reduce_to_hessenberg(const TiledMatrix& a, std::size_t panel_width = 0,
                                             const ExecPolicy& policy = {}) {
  const std::size_t n = a.order();
  if (n == 0) throw std::invalid_argument("reduce_to_hessenberg: empty matrix");
  if (panel_width == 0) panel_width = a.tile_size();

  HessenbergResult res{a, TiledMatrix::identity(n, a.tile_size())};
  if (n <= 2) return res;

  TiledMatrix& h = res.h;
  TiledMatrix& q1 = res.q1;
  const std::size_t b = h.tile_size();
  std::vector<std::shared_ptr<detail::PanelFactors>> panels;
  TaskGraph graph;

  for (std::size_t k = 0; k + 2 < n; k += panel_width) {
    auto p = std::make_shared<detail::PanelFactors>();
    p->k = k;
    p->nb = std::min(panel_width, n - 2 - k);
    panels.push_back(p);

    TaskNode panel;
    panel.kind = TaskKind::panel;
    panel.priority = window_priority;
    panel.reads = footprint(h, 0, k, n, n - k);
    panel.writes = footprint(h, 0, k, n, p->nb);
    panel.writes.push_back(HandleRef{&p->handle, 0});
    panel.body = [&h, p] { detail::factor_panel(h, *p); };
    graph.insert(std::move(panel));

    const std::size_t c_begin = k + p->nb;
    // A(:, trailing) -= Y V(trailing, :)^T, one task per tile
    for (std::size_t c0 = c_begin; c0 < n;) {
      const std::size_t c1 = std::min(n, (c0 / b + 1) * b);
      for (std::size_t r0 = 0; r0 < n;) {
        const std::size_t r1 = std::min(n, (r0 / b + 1) * b);
        TaskNode t;
        t.kind = TaskKind::right_update;
        t.priority = update_priority;
        t.reads.push_back(HandleRef{&p->handle, 0});
        t.writes = footprint(h, r0, c0, r1 - r0, c1 - c0);
        t.body = [&h, p, r0, r1, c0, c1] {
          Matrix slab = h.read_block(r0, c0, r1 - r0, c1 - c0);
          const Matrix yblk = p->y.block(r0, 0, r1 - r0, p->nb);
          const Matrix vblk = p->v.block(c0 - p->k - 1, 0, c1 - c0, p->nb);
          gemm(Trans::no, Trans::yes, -1.0, yblk, vblk, 1.0, slab);
          h.write_block(r0, c0, slab);
        };
        graph.insert(std::move(t));
        r0 = r1;
      }
      // rows k+1..n-1 <- (I - V T V^T)^T rows
      TaskNode t;
      t.kind = TaskKind::left_update;
      t.priority = update_priority;
      t.reads.push_back(HandleRef{&p->handle, 0});
      t.writes = footprint(h, k + 1, c0, n - k - 1, c1 - c0);
      t.body = [&h, p, c0, c1] {
        const std::size_t m = p->v.rows();
        Matrix slab = h.read_block(p->k + 1, c0, m, c1 - c0);
        Matrix w = multiply(p->v, slab, Trans::yes, Trans::no);
        Matrix tw = multiply(p->t, w, Trans::yes, Trans::no);
        gemm(Trans::no, Trans::no, -1.0, p->v, tw, 1.0, slab);
        h.write_block(p->k + 1, c0, slab);
      };
      graph.insert(std::move(t));
      c0 = c1;
    }

    // Q1(:, k+1:n) <- Q1(:, k+1:n) (I - V T V^T), one task per tile row
    for (std::size_t r0 = 0; r0 < n;) {
      const std::size_t r1 = std::min(n, (r0 / b + 1) * b);
      TaskNode t;
      t.kind = TaskKind::right_update;
      t.priority = q_update_priority;
      t.reads.push_back(HandleRef{&p->handle, 0});
      t.writes = footprint(q1, r0, k + 1, r1 - r0, n - k - 1);
      t.body = [&q1, p, r0, r1] {
        const std::size_t m = p->v.rows();
        Matrix slab = q1.read_block(r0, p->k + 1, r1 - r0, m);
        Matrix qv = multiply(slab, p->v);
        Matrix qvt = multiply(qv, p->t);
        gemm(Trans::no, Trans::yes, -1.0, qvt, p->v, 1.0, slab);
        q1.write_block(r0, p->k + 1, slab);
      };
      graph.insert(std::move(t));
      r0 = r1;
    }
  }

  execute_or_throw(graph, policy);
  return res;
}

}  // namespace taskeig

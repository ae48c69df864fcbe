#pragma once

// Real Schur decomposition H = Q2 S Q2^T of an upper Hessenberg matrix by the
// multishift QR algorithm with aggressive early deflation (AED).
//
// The host loop alternates two kinds of steps on the active diagonal range
// [lo, hi): an AED step (one large task plus slab updates) and a bulge-chasing
// sweep (chains of diagonal window tasks plus slab updates). Small active
// ranges go to an unblocked Francis double-shift solver.

#include <complex>
#include <memory>

#include "taskeig/reorder.hpp"
#include "taskeig/schur_structure.hpp"
#include "taskeig/slab_tasks.hpp"

namespace taskeig {

class ConvergenceError : public std::runtime_error {
public:
  ConvergenceError(std::size_t lo, std::size_t hi)
      : std::runtime_error("QR iteration did not converge on active range [" + std::to_string(lo) + ", " +
                           std::to_string(hi) + ")"),
        lo_(lo),
        hi_(hi) {}
  std::size_t lo() const noexcept { return lo_; }
  std::size_t hi() const noexcept { return hi_; }

private:
  std::size_t lo_, hi_;
};

// ---------------------------------------------------------------------------
// Dense building blocks

namespace detail {

/// Applies I - tau v v^T (v[0] = 1, tail in `tail`) from the left to rows
/// [row, row+len) of columns [c0, c1).
inline void reflect_left(Matrix& m, const double* tail, std::size_t len, double tau, std::size_t row, std::size_t c0,
                         std::size_t c1) {
  if (tau == 0.0) return;
  for (std::size_t c = c0; c < c1; ++c) {
    double* col = m.col(c) + row;
    double s = col[0];
    for (std::size_t i = 1; i < len; ++i) s += tail[i - 1] * col[i];
    s *= tau;
    col[0] -= s;
    for (std::size_t i = 1; i < len; ++i) col[i] -= s * tail[i - 1];
  }
}

/// Columns [col, col+len) of rows [r0, r1) times I - tau v v^T.
inline void reflect_right(Matrix& m, const double* tail, std::size_t len, double tau, std::size_t col, std::size_t r0,
                          std::size_t r1) {
  if (tau == 0.0) return;
  for (std::size_t r = r0; r < r1; ++r) {
    double s = m(r, col);
    for (std::size_t i = 1; i < len; ++i) s += tail[i - 1] * m(r, col + i);
    s *= tau;
    m(r, col) -= s;
    for (std::size_t i = 1; i < len; ++i) m(r, col + i) -= s * tail[i - 1];
  }
}

/// Unblocked Householder reduction of t[lo, hi) to Hessenberg form. Rows
/// [lo, hi) are updated up to column `ncols`, columns from row 0; z gets the
/// column updates.
inline void hessenberg_dense(Matrix& t, Matrix* z, std::size_t lo, std::size_t hi, std::size_t ncols) {
  std::vector<double> x;
  for (std::size_t c = lo; c + 2 < hi; ++c) {
    const std::size_t len = hi - c - 1;
    x.assign(t.col(c) + c + 1, t.col(c) + hi);
    const double tau = make_reflector(x.data(), len);
    if (tau == 0.0) continue;
    t(c + 1, c) = x[0];
    for (std::size_t r = c + 2; r < hi; ++r) t(r, c) = 0.0;
    reflect_left(t, x.data() + 1, len, tau, c + 1, c + 1, ncols);
    reflect_right(t, x.data() + 1, len, tau, c + 1, 0, hi);
    if (z) reflect_right(*z, x.data() + 1, len, tau, c + 1, 0, z->rows());
  }
}

/// |h(k, k-1)| negligible relative to its diagonal neighbours, falling back to
/// the matrix norm when both neighbours vanish.
inline bool negligible_subdiagonal(double sub, double d0, double d1, double norm) {
  const double scale = std::abs(d0) + std::abs(d1);
  const double tol = scale == 0.0 ? eps * norm : eps * scale;
  return std::abs(sub) <= std::max(tol, safe_min);
}

}  // namespace detail

/// Francis double-shift iteration on the Hessenberg range [lo, hi) of t,
/// updating full rows and columns of t (up to t.rows()) and the columns of z.
/// Returns false when the sweep cap was hit. 2x2 blocks are standardized.
inline bool francis_double_shift(Matrix& t, Matrix* z, std::size_t lo, std::size_t hi, std::size_t* sweeps = nullptr) {
  const std::size_t n = t.rows();
  if (hi <= lo) return true;
  const double norm = frobenius_norm(t.block(lo, lo, hi - lo, hi - lo));
  const std::size_t cap = 30 * std::max<std::size_t>(hi - lo, 10);
  constexpr int exceptional_every = 10;
  constexpr double wilk1 = 0.75, wilk2 = -0.4375;

  std::size_t total = 0;
  std::size_t i = hi;  // one past the active bottom
  while (i > lo) {
    std::size_t l = lo;
    bool converged = false;
    int stalled = 0;
    while (total <= cap) {
      // locate the bottom-most negligible subdiagonal
      std::size_t k = i - 1;
      for (; k > l; --k)
        if (detail::negligible_subdiagonal(t(k, k - 1), t(k - 1, k - 1), t(k, k), norm)) break;
      l = k;
      if (l > lo) t(l, l - 1) = 0.0;
      if (l + 2 >= i) {
        converged = true;
        break;
      }
      ++stalled;
      ++total;
      const std::size_t b = i - 1;  // bottom index

      double h11, h12, h21, h22;
      if (stalled % (2 * exceptional_every) == 0) {
        const double s = std::abs(t(b, b - 1)) + std::abs(t(b - 1, b - 2));
        h11 = wilk1 * s + t(b, b);
        h12 = wilk2 * s;
        h21 = s;
        h22 = h11;
      } else if (stalled % exceptional_every == 0) {
        const double s = std::abs(t(l + 1, l)) + std::abs(t(l + 2, l + 1));
        h11 = wilk1 * s + t(l, l);
        h12 = wilk2 * s;
        h21 = s;
        h22 = h11;
      } else {
        h11 = t(b - 1, b - 1);
        h21 = t(b, b - 1);
        h12 = t(b - 1, b);
        h22 = t(b, b);
      }
      double rt1r = 0.0, rt1i = 0.0, rt2r = 0.0, rt2i = 0.0;
      const double s = std::abs(h11) + std::abs(h12) + std::abs(h21) + std::abs(h22);
      if (s != 0.0) {
        h11 /= s;
        h21 /= s;
        h12 /= s;
        h22 /= s;
        const double tr = 0.5 * (h11 + h22);
        const double det = (h11 - tr) * (h22 - tr) - h12 * h21;
        const double rtdisc = std::sqrt(std::abs(det));
        if (det >= 0.0) {
          rt1r = tr * s;
          rt2r = rt1r;
          rt1i = rtdisc * s;
          rt2i = -rt1i;
        } else {
          rt1r = tr + rtdisc;
          rt2r = tr - rtdisc;
          if (std::abs(rt1r - h22) <= std::abs(rt2r - h22)) rt2r = rt1r;
          else rt1r = rt2r;
          rt1r *= s;
          rt2r *= s;
        }
      }

      // look for two consecutive small subdiagonals
      std::size_t m = b - 1;
      std::array<double, 3> v{};
      while (true) {
        --m;
        const double hs = std::abs(t(m, m) - rt2r) + std::abs(rt2i) + std::abs(t(m + 1, m));
        const double h21s = t(m + 1, m) / hs;
        v[0] = h21s * t(m, m + 1) + (t(m, m) - rt1r) * ((t(m, m) - rt2r) / hs) - rt1i * (rt2i / hs);
        v[1] = h21s * (t(m, m) + t(m + 1, m + 1) - rt1r - rt2r);
        v[2] = h21s * t(m + 2, m + 1);
        const double sv = std::abs(v[0]) + std::abs(v[1]) + std::abs(v[2]);
        for (double& x : v) x /= sv;
        if (m == l) break;
        const double h00 = std::abs(t(m, m - 1)) * (std::abs(v[1]) + std::abs(v[2]));
        const double h01 = std::abs(v[0]) * (std::abs(t(m - 1, m - 1)) + std::abs(t(m, m)) + std::abs(t(m + 1, m + 1)));
        if (h00 <= eps * h01) break;
      }

      for (std::size_t k2 = m; k2 + 1 <= b; ++k2) {
        const std::size_t nr = std::min<std::size_t>(3, b - k2 + 1);
        if (k2 > m)
          for (std::size_t r = 0; r < nr; ++r) v[r] = t(k2 + r, k2 - 1);
        const double tau = make_reflector(v.data(), nr);
        if (k2 > m) {
          t(k2, k2 - 1) = v[0];
          t(k2 + 1, k2 - 1) = 0.0;
          if (nr == 3) t(k2 + 2, k2 - 1) = 0.0;
        } else if (m > l) {
          t(k2, k2 - 1) *= (1.0 - tau);
        }
        detail::reflect_left(t, v.data() + 1, nr, tau, k2, k2, n);
        detail::reflect_right(t, v.data() + 1, nr, tau, k2, 0, std::min(k2 + 4, i));
        if (z) detail::reflect_right(*z, v.data() + 1, nr, tau, k2, 0, z->rows());
      }
    }
    if (sweeps) *sweeps = total;
    if (!converged) return false;
    if (l + 2 == i) standardize_block(t, l, 0, n, z);  // a real pair splits here
    i = l;
  }
  return true;
}

struct DenseSchur {
  Matrix s;
  Matrix q;
  SchurStructure structure;
};

/// Unblocked real Schur decomposition of a small dense matrix (first reduced
/// to Hessenberg form). Throws ConvergenceError on failure.
inline DenseSchur small_schur(const Matrix& m) {
  const std::size_t k = m.rows();
  if (k == 0 || m.cols() != k) throw std::invalid_argument("small_schur: need a nonempty square matrix");
  DenseSchur out{m, Matrix::identity(k), {}};
  detail::hessenberg_dense(out.s, &out.q, 0, k, k);
  if (!francis_double_shift(out.s, &out.q, 0, k)) throw ConvergenceError(0, k);
  out.structure = structure_of(out.s);
  return out;
}

// ---------------------------------------------------------------------------
// Shifts

/// Shifts for one sweep, consumed in consecutive pairs. Each pair is two real
/// shifts or a complex conjugate pair.
struct ShiftSet {
  std::vector<std::complex<double>> shifts;

  std::size_t count() const noexcept { return shifts.size(); }
  std::size_t bulges() const noexcept { return shifts.size() / 2; }

  void validate() const {
    if (shifts.size() < 2 || shifts.size() % 2 != 0) throw std::invalid_argument("ShiftSet: count must be even and >= 2");
    for (std::size_t i = 0; i < shifts.size(); i += 2) {
      const auto a = shifts[i], b = shifts[i + 1];
      const bool reals = a.imag() == 0.0 && b.imag() == 0.0;
      if (!reals && !(a == std::conj(b))) throw std::invalid_argument("ShiftSet: conjugate pairs must be adjacent");
    }
  }
};

/// Builds up to `wanted` shifts (rounded down to even) from eigenvalue blocks,
/// taking them from the end of the list. Real values are paired; a lone real
/// value is doubled when nothing else is available.
inline ShiftSet shifts_from(const std::vector<BlockEigenvalue>& eig, std::size_t wanted) {
  ShiftSet set;
  wanted -= wanted % 2;
  std::optional<double> pending;
  for (std::size_t i = eig.size(); i-- > 0 && set.count() < wanted;) {
    const auto& e = eig[i];
    if (e.im != 0.0) {
      set.shifts.emplace_back(e.re, e.im);
      set.shifts.emplace_back(e.re, -e.im);
    } else if (pending) {
      set.shifts.emplace_back(*pending, 0.0);
      set.shifts.emplace_back(e.re, 0.0);
      pending.reset();
    } else {
      pending = e.re;
    }
  }
  if (set.shifts.empty() && pending) {
    set.shifts.emplace_back(*pending, 0.0);
    set.shifts.emplace_back(*pending, 0.0);
  }
  return set;
}

namespace detail {

/// First column of (H - s1 I)(H - s2 I), scaled, from the leading 3x3 corner
/// (entries h00 h01 h10 h11 h21).
inline std::array<double, 3> shift_polynomial_column(double h00, double h01, double h10, double h11, double h21,
                                                     std::complex<double> s1, std::complex<double> s2) {
  std::array<double, 3> v{};
  const double s = std::abs(h00 - s2.real()) + std::abs(s2.imag()) + std::abs(h10);
  if (s == 0.0) return v;
  const double h10s = h10 / s;
  v[0] = h10s * h01 + (h00 - s1.real()) * ((h00 - s2.real()) / s) - s1.imag() * (s2.imag() / s);
  v[1] = h10s * (h00 + h11 - s1.real() - s2.real());
  v[2] = h10s * h21;
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Bulge chasing

/// One reflector move of one bulge: the reflector acts on [pos, pos+3)
/// (clipped at the active bottom). pos == lo introduces the bulge.
struct BulgeMove {
  std::size_t bulge = 0;  // index into the shift pairs
  std::size_t pos = 0;
};

struct ChaseWindow {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::vector<BulgeMove> moves;
};

using ChaseChain = std::vector<ChaseWindow>;

/// Plans the window chains that chase `bulges` bulges through [lo, hi) with
/// windows of height `window`. Bulges are grouped in packets; each packet gets
/// one chain of windows ordered top-down.
inline std::vector<ChaseChain> plan_bulge_chase(std::size_t lo, std::size_t hi, std::size_t bulges, std::size_t window) {
  if (hi < lo + 3) throw std::invalid_argument("plan_bulge_chase: active range too small");
  const std::size_t per_packet = std::max<std::size_t>(1, (window / 2 > 5 ? (window / 2 - 5) / 3 : 0));
  if (window < 3 * std::min(per_packet, bulges) + 5)
    throw std::invalid_argument("plan_bulge_chase: window too small for a bulge packet");
  const std::size_t done = hi - 1;  // position after the last move at hi-2

  std::vector<ChaseChain> chains;
  for (std::size_t first = 0; first < bulges; first += per_packet) {
    const std::size_t m = std::min(per_packet, bulges - first);
    std::vector<std::size_t> p(m, lo);  // next move position of each bulge, leading first
    ChaseChain chain;
    std::size_t ws = lo;
    while (p.back() < done) {
      const std::size_t we = std::min(hi, ws + window);
      ChaseWindow win{ws, we, {}};
      bool moved = true;
      while (moved) {
        moved = false;
        for (std::size_t j = 0; j < m; ++j) {
          const std::size_t k = p[j];
          if (k >= done) continue;
          if (j > 0 && p[j - 1] < done && k + 4 > p[j - 1]) continue;
          if (k < ws + 1 && !(k == lo && ws == lo)) continue;
          const bool bottom_ok = we == hi ? k + 2 <= hi : k + 4 <= we;
          if (!bottom_ok) continue;
          win.moves.push_back({first + j, k});
          ++p[j];
          moved = true;
        }
      }
      if (win.moves.empty()) throw std::logic_error("plan_bulge_chase: no progress in window");
      chain.push_back(std::move(win));
      if (p.back() >= done) break;
      ws = p.back() - 1;
    }
    chains.push_back(std::move(chain));
  }
  return chains;
}

/// Checks that every window lies in [lo, hi) and consecutive windows of a
/// chain overlap by at least three rows.
inline void validate_chains(const std::vector<ChaseChain>& chains, std::size_t lo, std::size_t hi) {
  for (const auto& chain : chains)
    for (std::size_t i = 0; i < chain.size(); ++i) {
      const auto& w = chain[i];
      if (w.begin < lo || w.end > hi || w.end <= w.begin) throw std::invalid_argument("malformed chain: window outside active range");
      for (const auto& mv : w.moves)
        if (mv.pos < w.begin || mv.pos + 2 > w.end) throw std::invalid_argument("malformed chain: move outside window");
      if (i > 0 && chain[i - 1].end < w.begin + 3)
        throw std::invalid_argument("malformed chain: windows overlap by fewer than 3 rows");
    }
}

/// Inserts the window and update tasks of one sweep over [lo, hi) into
/// `graph`. `h(lo, lo-1)` must be zero.
inline void insert_bulge_chase(TaskGraph& graph, TiledMatrix& s, TiledMatrix* q, std::size_t lo, std::size_t hi,
                               const ShiftSet& shifts, const std::vector<ChaseChain>& chains,
                               std::vector<std::shared_ptr<AccumulatorSlot>>& slots) {
  shifts.validate();
  validate_chains(chains, lo, hi);
  auto shift_list = std::make_shared<const ShiftSet>(shifts);
  for (const auto& chain : chains)
    for (const auto& win : chain) {
      auto slot = std::make_shared<AccumulatorSlot>();
      slots.push_back(slot);
      const std::size_t k = win.end - win.begin;
      TaskNode t;
      t.kind = TaskKind::window;
      t.priority = window_priority;
      t.writes = footprint(s, win.begin, win.begin, k, k);
      t.writes.push_back(HandleRef{&slot->handle, 0});
      t.body = [&s, slot, shift_list, win, k, lo, hi] {
        Matrix local = s.read_block(win.begin, win.begin, k, k);
        slot->acc = Accumulator::identity(win.begin, win.end);
        slot->identity = win.moves.empty();
        const std::size_t base = win.begin;
        for (const auto& mv : win.moves) {
          const std::size_t kk = mv.pos - base;  // local position
          const std::size_t nr = std::min<std::size_t>(3, hi - mv.pos);
          std::array<double, 3> v{};
          if (mv.pos == lo) {
            const auto s1 = shift_list->shifts[2 * mv.bulge], s2 = shift_list->shifts[2 * mv.bulge + 1];
            v = detail::shift_polynomial_column(local(kk, kk), local(kk, kk + 1), local(kk + 1, kk),
                                                local(kk + 1, kk + 1), nr == 3 ? local(kk + 2, kk + 1) : 0.0, s1, s2);
          } else {
            for (std::size_t r = 0; r < nr; ++r) v[r] = local(kk + r, kk - 1);
          }
          const double tau = make_reflector(v.data(), nr);
          if (mv.pos > lo) {
            local(kk, kk - 1) = v[0];
            for (std::size_t r = 1; r < nr; ++r) local(kk + r, kk - 1) = 0.0;
          }
          detail::reflect_left(local, v.data() + 1, nr, tau, kk, kk, k);
          detail::reflect_right(local, v.data() + 1, nr, tau, kk, 0, std::min(kk + nr + 1, hi - base));
          detail::reflect_right(slot->acc.q, v.data() + 1, nr, tau, kk, 0, k);
        }
        s.write_block(win.begin, win.begin, local);
      };
      graph.insert(std::move(t));
      insert_window_updates(graph, s, q, slot, {win.begin, win.end, win.begin, win.end});
    }
}

/// One multishift QR sweep over the active range [lo, hi) of s (with
/// h(lo, lo-1) == 0), accumulating into q when given.
inline void bulge_chase(TiledMatrix& s, TiledMatrix* q, std::size_t lo, std::size_t hi, const ShiftSet& shifts,
                        std::size_t window = 0, const ExecPolicy& policy = {}) {
  if (window == 0) window = std::max<std::size_t>(s.tile_size(), 12);
  shifts.validate();
  if (hi - lo <= shifts.count() + 2) throw std::invalid_argument("bulge_chase: active range too short for the shifts");
  const auto chains = plan_bulge_chase(lo, hi, shifts.bulges(), window);
  std::vector<std::shared_ptr<AccumulatorSlot>> slots;
  TaskGraph graph;
  insert_bulge_chase(graph, s, q, lo, hi, shifts, chains, slots);
  execute_or_throw(graph, policy);
}

// ---------------------------------------------------------------------------
// Aggressive early deflation

struct AedOutcome {
  std::size_t deflated = 0;
  std::vector<BlockEigenvalue> undeflated;  // shift candidates, top to bottom
  bool converged = true;
};

namespace detail {

/// AED on the dense window t (jw x jw) with spike scalar `spike` (the entry
/// coupling the window to the rest of the active range). On return t, the
/// spike column `spike_col` and v hold the updated window; applied tells
/// whether anything changed.
inline AedOutcome aed_dense(Matrix& t, std::vector<double>& spike_col, double spike, Matrix& v, bool& applied) {
  const std::size_t jw = t.rows();
  AedOutcome out;
  applied = false;
  Matrix work = t;
  Matrix z = Matrix::identity(jw);
  detail::hessenberg_dense(work, &z, 0, jw, jw);
  if (!francis_double_shift(work, &z, 0, jw)) {
    out.converged = false;
    out.undeflated = structure_of(t).eigen;
    return out;
  }

  const double smlnum = safe_min * (static_cast<double>(jw) / eps);
  std::vector<DiagBlock> blocks = structure_of(work).blocks;
  std::size_t ilst = 0, nsb = blocks.size();
  while (ilst < nsb) {
    const DiagBlock b = blocks[nsb - 1];
    bool deflatable;
    if (b.size == 1) {
      double foo = std::abs(work(b.start, b.start));
      if (foo == 0.0) foo = std::abs(spike);
      deflatable = std::abs(spike * z(0, b.start)) <= std::max(smlnum, eps * foo);
    } else {
      double foo = std::abs(work(b.start, b.start)) +
                   std::sqrt(std::abs(work(b.start, b.start + 1))) * std::sqrt(std::abs(work(b.start + 1, b.start)));
      if (foo == 0.0) foo = std::abs(spike);
      const double y = std::max(std::abs(spike * z(0, b.start)), std::abs(spike * z(0, b.start + 1)));
      deflatable = y <= std::max(smlnum, eps * foo);
    }
    if (deflatable) {
      --nsb;
      continue;
    }
    if (!bubble_block_up(work, &z, blocks, nsb - 1, ilst)) break;
    ++ilst;
  }
  const std::size_t ns = nsb == 0 ? 0 : blocks[nsb - 1].start + blocks[nsb - 1].size;
  out.deflated = jw - ns;
  for (std::size_t i = 0; i < nsb; ++i) {
    const auto& b = blocks[i];
    if (b.size == 1) out.undeflated.push_back({work(b.start, b.start), 0.0});
    else out.undeflated.push_back(block_eigenvalue(work(b.start, b.start), work(b.start, b.start + 1),
                                                   work(b.start + 1, b.start), work(b.start + 1, b.start + 1)));
  }

  if (ns == jw && spike != 0.0) return out;  // nothing deflated: keep the window as it was

  std::vector<double> sp(jw, 0.0);
  for (std::size_t r = 0; r < ns; ++r) sp[r] = spike * z(0, r);
  if (ns > 1 && spike != 0.0) {
    std::vector<double> x(sp.begin(), sp.begin() + ns);
    const double tau = make_reflector(x.data(), ns);
    if (tau != 0.0) {
      sp[0] = x[0];
      for (std::size_t r = 1; r < ns; ++r) sp[r] = 0.0;
      reflect_left(work, x.data() + 1, ns, tau, 0, 0, jw);
      reflect_right(work, x.data() + 1, ns, tau, 0, 0, ns);
      reflect_right(z, x.data() + 1, ns, tau, 0, 0, jw);
    }
    hessenberg_dense(work, &z, 0, ns, jw);
  }
  t = work;
  v = z;
  spike_col = sp;
  applied = true;
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Driver

struct SchurOptions {
  std::size_t shifts = 0;          // 0: automatic
  std::size_t aed_window = 0;      // 0: 3/2 of the shift count
  std::size_t window_size = 0;     // bulge-chasing window height, 0: max(tile size, 12)
  std::size_t max_sweeps = 0;      // 0: 30 n
  std::size_t base_cutoff = 64;    // active ranges up to this size use the dense solver
  double nibble = 0.14;            // skip the sweep when AED deflated more than this fraction
  std::size_t exceptional_every = 10;
  ExecPolicy policy{};
};

struct SchurStats {
  std::size_t aed_steps = 0;
  std::size_t sweeps = 0;
  std::size_t deflated_by_aed = 0;
  std::size_t deflated_by_dense = 0;
  std::size_t tasks = 0;
};

struct SchurResult {
  TiledMatrix s;
  TiledMatrix q2;
  SchurStructure structure;
  SchurStats stats;
};

/// Shift count for an active range of length `active`.
inline std::size_t default_shift_count(std::size_t active) {
  std::size_t ns = active / 6;
  ns -= ns % 2;
  return std::max<std::size_t>(2, std::min<std::size_t>(ns, 64));
}

inline bool is_hessenberg(const TiledMatrix& h) {
  const std::size_t n = h.order();
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t r = c + 2; r < n; ++r)
      if (h(r, c) != 0.0) return false;
  return true;
}

namespace detail {

struct SchurRun {
  TiledMatrix& s;
  TiledMatrix& q;
  const SchurOptions& opts;
  SchurStats& stats;
  double norm;

  void execute(TaskGraph& graph) {
    stats.tasks += graph.size();
    execute_or_throw(graph, opts.policy);
  }

  // Dense solve of the whole active range [lo, hi) as one task.
  void dense_step(std::size_t lo, std::size_t hi) {
    auto slot = std::make_shared<AccumulatorSlot>();
    auto ok = std::make_shared<bool>(true);
    const std::size_t k = hi - lo;
    TaskGraph graph;
    TaskNode t;
    t.kind = TaskKind::small_dense;
    t.priority = window_priority;
    t.writes = footprint(s, lo, lo, k, k);
    t.writes.push_back(HandleRef{&slot->handle, 0});
    t.body = [this, slot, ok, lo, hi, k] {
      Matrix local = s.read_block(lo, lo, k, k);
      slot->acc = Accumulator::identity(lo, hi);
      *ok = francis_double_shift(local, &slot->acc.q, 0, k);
      slot->identity = slot->acc.q == Matrix::identity(k);
      s.write_block(lo, lo, local);
    };
    graph.insert(std::move(t));
    insert_window_updates(graph, s, &q, slot, {lo, hi, lo, hi});
    execute(graph);
    if (!*ok) throw ConvergenceError(lo, hi);
    stats.deflated_by_dense += k;
  }

  AedOutcome aed_step(std::size_t lo, std::size_t hi, std::size_t jw) {
    const std::size_t top = hi - jw;
    auto slot = std::make_shared<AccumulatorSlot>();
    auto out = std::make_shared<AedOutcome>();
    TaskGraph graph;
    TaskNode t;
    t.kind = TaskKind::window;
    t.priority = window_priority;
    t.writes = footprint(s, top, top, jw, jw);
    if (top > lo) append(t.writes, footprint(s, top, top - 1, jw, 1));
    t.writes.push_back(HandleRef{&slot->handle, 0});
    t.body = [this, slot, out, lo, top, jw] {
      Matrix local = s.read_block(top, top, jw, jw);
      const double spike = top > lo ? s(top, top - 1) : 0.0;
      slot->acc = Accumulator::identity(top, top + jw);
      std::vector<double> spike_col;
      bool applied = false;
      *out = aed_dense(local, spike_col, spike, slot->acc.q, applied);
      slot->identity = !applied;
      if (!applied) return;
      s.write_block(top, top, local);
      if (top > lo)
        for (std::size_t r = 0; r < jw; ++r) s.set(top + r, top - 1, spike_col[r]);
    };
    graph.insert(std::move(t));
    insert_window_updates(graph, s, &q, slot, {top, hi, top, hi});
    execute(graph);
    ++stats.aed_steps;
    stats.deflated_by_aed += out->deflated;
    return *out;
  }

  ShiftSet exceptional_shifts(std::size_t lo, std::size_t hi, std::size_t wanted) {
    ShiftSet set;
    for (std::size_t i = hi - 1; i >= lo + 2 && set.count() < wanted; i -= 2) {
      const double ss = std::abs(s(i, i - 1)) + std::abs(s(i - 1, i - 2));
      double a = 0.75 * ss + s(i, i), b = ss, c = -0.4375 * ss, d = a;
      standardize_2x2(a, b, c, d);
      const BlockEigenvalue e = c == 0.0 ? BlockEigenvalue{a, 0.0} : block_eigenvalue(a, b, c, d);
      if (e.im != 0.0) {
        set.shifts.emplace_back(e.re, e.im);
        set.shifts.emplace_back(e.re, -e.im);
      } else {
        set.shifts.emplace_back(a, 0.0);
        set.shifts.emplace_back(d, 0.0);
      }
      if (i < lo + 4) break;
    }
    return set;
  }

  std::size_t active_start(std::size_t hi) {
    std::size_t k = hi - 1;
    for (; k > 0; --k) {
      const double sub = s(k, k - 1);
      if (sub == 0.0) break;
      if (negligible_subdiagonal(sub, s(k - 1, k - 1), s(k, k), norm)) {
        s.set(k, k - 1, 0.0);
        break;
      }
    }
    return k;
  }

  void run() {
    const std::size_t n = s.order();
    const std::size_t max_sweeps = opts.max_sweeps ? opts.max_sweeps : 30 * n;
    const std::size_t cutoff = std::max<std::size_t>(opts.base_cutoff, 4);
    const std::size_t window = opts.window_size ? opts.window_size : std::max<std::size_t>(s.tile_size(), 12);
    std::size_t hi = n;
    std::size_t stalled = 0;
    while (hi > 0) {
      const std::size_t lo = active_start(hi);
      const std::size_t active = hi - lo;
      if (active <= cutoff) {
        dense_step(lo, hi);
        hi = lo;
        stalled = 0;
        continue;
      }
      std::size_t ns = opts.shifts ? opts.shifts : default_shift_count(active);
      ns = std::min(ns - ns % 2, (active - 3) - (active - 3) % 2);
      ns = std::max<std::size_t>(ns, 2);
      std::size_t jw = opts.aed_window ? opts.aed_window : (3 * ns) / 2;
      jw = std::clamp<std::size_t>(jw, 2, active);

      AedOutcome aed = aed_step(lo, hi, jw);
      hi -= aed.deflated;
      if (aed.deflated > 0) stalled = 0;
      if (hi <= lo + cutoff) continue;
      if (aed.deflated > 0 && static_cast<double>(aed.deflated) > opts.nibble * static_cast<double>(jw)) continue;

      if (stats.sweeps >= max_sweeps) throw ConvergenceError(lo, hi);
      ++stats.sweeps;
      ++stalled;
      const std::size_t cur = hi - lo;
      ns = std::min(ns, (cur - 3) - (cur - 3) % 2);
      ShiftSet shifts;
      if (opts.exceptional_every && stalled % opts.exceptional_every == 0) {
        shifts = exceptional_shifts(lo, hi, ns);
      } else {
        shifts = shifts_from(aed.undeflated, ns);
        if (shifts.count() < 2) {
          const std::size_t k = std::min(ns, cur);
          DenseSchur tail = small_schur(s.read_block(hi - k, hi - k, k, k));
          shifts = shifts_from(tail.structure.eigen, ns);
        }
      }
      TaskGraph graph;
      std::vector<std::shared_ptr<AccumulatorSlot>> slots;
      insert_bulge_chase(graph, s, &q, lo, hi, shifts, plan_bulge_chase(lo, hi, shifts.bulges(), window), slots);
      execute(graph);
    }
  }

  // Standardizes any 2x2 block left in non-standard form.
  void finalize() {
    const std::size_t n = s.order();
    TaskGraph graph;
    std::vector<std::shared_ptr<AccumulatorSlot>> slots;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (s(i + 1, i) == 0.0) continue;
      double a = s(i, i), b = s(i, i + 1), c = s(i + 1, i), d = s(i + 1, i + 1);
      const GivensRotation g = standardize_2x2(a, b, c, d);
      if (g.c != 1.0 || g.s != 0.0 || a != s(i, i) || d != s(i + 1, i + 1)) {
        auto slot = std::make_shared<AccumulatorSlot>();
        slots.push_back(slot);
        TaskNode t;
        t.kind = TaskKind::window;
        t.priority = window_priority;
        t.writes = footprint(s, i, i, 2, 2);
        t.writes.push_back(HandleRef{&slot->handle, 0});
        t.body = [this, slot, i] {
          Matrix local = s.read_block(i, i, 2, 2);
          slot->acc = Accumulator::identity(i, i + 2);
          standardize_block(local, 0, 0, 2, &slot->acc.q);
          s.write_block(i, i, local);
        };
        graph.insert(std::move(t));
        insert_window_updates(graph, s, &q, slot, {i, i + 2, i, i + 2});
      }
      ++i;
    }
    if (graph.size()) execute(graph);
  }
};

}  // namespace detail

/// Real Schur decomposition of the upper Hessenberg matrix h (left untouched).
inline SchurResult multishift_qr(const TiledMatrix& h, const SchurOptions& opts = {}) {
  if (!is_hessenberg(h)) throw std::invalid_argument("multishift_qr: input is not upper Hessenberg");
  SchurResult res{h, TiledMatrix::identity(h.order(), h.tile_size()), {}, {}};
  const double norm = frobenius_norm(to_dense(h));
  detail::SchurRun run{res.s, res.q2, opts, res.stats, norm};
  run.run();
  run.finalize();
  res.structure = structure_of(res.s);
  return res;
}

}  // namespace taskeig

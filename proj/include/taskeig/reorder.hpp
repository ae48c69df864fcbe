#pragma once

// Reordering of a real Schur form: selected diagonal blocks are moved to the
// leading positions by chains of overlapping diagonal windows. Each window
// task performs a script of adjacent block swaps and hands its accumulated
// orthogonal transformation to right/left update tasks.

#include <atomic>
#include <optional>
#include <string>

#include "taskeig/schur_structure.hpp"
#include "taskeig/slab_tasks.hpp"

namespace taskeig {

// ---------------------------------------------------------------------------
// Adjacent swap

struct SwapOutcome {
  bool ok = false;
  Matrix q;  // (p+q2) x (p+q2) orthogonal, valid when ok
};

namespace detail {

// Solves K x = rhs (order <= 4) with complete pivoting. Fails when a pivot
// falls below `smin`.
inline bool solve_complete_pivoting(Matrix k, std::vector<double>& rhs, double smin) {
  const std::size_t n = k.rows();
  std::vector<std::size_t> colperm(n);
  for (std::size_t i = 0; i < n; ++i) colperm[i] = i;
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t pr = step, pc = step;
    double best = -1.0;
    for (std::size_t c = step; c < n; ++c)
      for (std::size_t r = step; r < n; ++r)
        if (std::abs(k(r, c)) > best) {
          best = std::abs(k(r, c));
          pr = r;
          pc = c;
        }
    if (best < smin) return false;
    if (pr != step) {
      for (std::size_t c = 0; c < n; ++c) std::swap(k(pr, c), k(step, c));
      std::swap(rhs[pr], rhs[step]);
    }
    if (pc != step) {
      for (std::size_t r = 0; r < n; ++r) std::swap(k(r, pc), k(r, step));
      std::swap(colperm[pc], colperm[step]);
    }
    for (std::size_t r = step + 1; r < n; ++r) {
      const double f = k(r, step) / k(step, step);
      if (f == 0.0) continue;
      for (std::size_t c = step; c < n; ++c) k(r, c) -= f * k(step, c);
      rhs[r] -= f * rhs[step];
    }
  }
  std::vector<double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    double s = rhs[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= k(r, c) * x[c];
    x[r] = s / k(r, r);
  }
  for (std::size_t i = 0; i < n; ++i) rhs[colperm[i]] = x[i];
  return true;
}

}  // namespace detail

/// Exchanges the leading p x p block B1 with the trailing q2 x q2 block B2 of
/// the (p+q2) square `window`. The exchange comes from the Sylvester equation
/// B1 X - X B2 = C (C the coupling block): the columns of [-X; I] span the
/// invariant subspace of B2, and an orthogonal basis of it moves B2 to the
/// front. On failure the window is left untouched.
inline SwapOutcome swap_adjacent(Matrix& window, std::size_t p, std::size_t q2) {
  const std::size_t k = p + q2;
  if (window.rows() != k || window.cols() != k || p < 1 || p > 2 || q2 < 1 || q2 > 2)
    throw std::invalid_argument("swap_adjacent: window must hold one 1x1/2x2 block pair");

  const Matrix original = window;
  const double tnorm = frobenius_norm(original);

  // Kronecker form of B1 X - X B2 = C, unknowns vec(X) column-major.
  const std::size_t m = p * q2;
  Matrix kron(m, m);
  std::vector<double> rhs(m);
  for (std::size_t j = 0; j < q2; ++j)
    for (std::size_t i = 0; i < p; ++i) {
      const std::size_t row = j * p + i;
      rhs[row] = original(i, p + j);
      for (std::size_t l = 0; l < p; ++l) kron(row, j * p + l) += original(i, l);
      for (std::size_t l = 0; l < q2; ++l) kron(row, l * p + i) -= original(p + l, p + j);
    }
  double bmax = 0.0;
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < k; ++c)
      if ((r < p) == (c < p)) bmax = std::max(bmax, std::abs(original(r, c)));
  const double smin = std::max(eps * bmax, safe_min);
  if (!detail::solve_complete_pivoting(kron, rhs, smin)) return {};

  // Orthogonal basis of span [-X; I] as the leading columns of Q.
  Matrix q = Matrix::identity(k);
  if (k == 2) {
    const GivensRotation g = make_givens(-rhs[0], 1.0, 0, 1);
    q(0, 0) = g.c;
    q(1, 0) = g.s;
    q(0, 1) = -g.s;
    q(1, 1) = g.c;
  } else {
    Matrix basis(k, q2);
    for (std::size_t j = 0; j < q2; ++j) {
      for (std::size_t i = 0; i < p; ++i) basis(i, j) = -rhs[j * p + i];
      basis(p + j, j) = 1.0;
    }
    for (std::size_t j = 0; j < q2; ++j) {
      std::array<double, 3> x{};
      const std::size_t len = k - j;
      Householder3 h;
      h.size = len;
      std::vector<double> col(basis.col(j) + j, basis.col(j) + k);
      h.tau = make_reflector(col.data(), len);
      if (h.tau == 0.0) continue;
      for (std::size_t i = 1; i < len; ++i) x[i - 1] = col[i];
      // apply H = I - tau v v^T (v = [1; x]) to the remaining basis columns and to Q from the right
      auto apply_cols = [&](Matrix& mtx, std::size_t first_row, std::size_t c0, std::size_t c1) {
        for (std::size_t c = c0; c < c1; ++c) {
          double s = mtx(first_row, c);
          for (std::size_t i = 1; i < len; ++i) s += x[i - 1] * mtx(first_row + i, c);
          s *= h.tau;
          mtx(first_row, c) -= s;
          for (std::size_t i = 1; i < len; ++i) mtx(first_row + i, c) -= s * x[i - 1];
        }
      };
      apply_cols(basis, j, j + 1, q2);
      for (std::size_t r = 0; r < k; ++r) {
        double s = q(r, j);
        for (std::size_t i = 1; i < len; ++i) s += x[i - 1] * q(r, j + i);
        s *= h.tau;
        q(r, j) -= s;
        for (std::size_t i = 1; i < len; ++i) q(r, j + i) -= s * x[i - 1];
      }
    }
  }

  Matrix swapped = multiply(multiply(q, original, Trans::yes, Trans::no), q);
  for (std::size_t r = q2; r < k; ++r)
    for (std::size_t c = 0; c < q2; ++c) swapped(r, c) = 0.0;
  if (p == 1 && q2 == 1) {
    swapped(0, 0) = original(1, 1);
    swapped(1, 1) = original(0, 0);
  }
  if (q2 == 2) standardize_block(swapped, 0, 0, k, &q);
  if (p == 2) standardize_block(swapped, q2, 0, k, &q);

  // Clean the entries below each block's subdiagonal that rounding left behind.
  if (q2 == 1 && p == 2) swapped(2, 0) = 0.0;
  if (q2 == 2 && p == 1) {
    swapped(2, 0) = 0.0;
    swapped(2, 1) = 0.0;
  }

  if (similarity_residual(original, q, swapped) > 100.0 * eps * tnorm) return {};
  window = swapped;
  return {true, std::move(q)};
}

/// Swaps the adjacent blocks starting at `pos` (sizes p then q2) inside a
/// dense quasi-triangular matrix, updating the full rows/columns and the
/// columns of `z` when given.
inline bool swap_blocks(Matrix& t, std::size_t pos, std::size_t p, std::size_t q2, Matrix* z) {
  const std::size_t k = p + q2;
  const std::size_t n = t.rows();
  Matrix window = t.block(pos, pos, k, k);
  SwapOutcome out = swap_adjacent(window, p, q2);
  if (!out.ok) return false;
  t.set_block(pos, pos, window);
  if (pos + k < n) t.set_block(pos, pos + k, multiply(out.q, t.block(pos, pos + k, k, n - pos - k), Trans::yes));
  if (pos > 0) t.set_block(0, pos, multiply(t.block(0, pos, pos, k), out.q));
  if (z) z->set_block(0, pos, multiply(z->block(0, pos, z->rows(), k), out.q));
  return true;
}

/// Moves block `from` upward to index `to` (< from) of `blocks` by adjacent
/// swaps. Stops at the first failed swap; `blocks` always reflects the state.
inline bool bubble_block_up(Matrix& t, Matrix* z, std::vector<DiagBlock>& blocks, std::size_t from, std::size_t to) {
  for (std::size_t b = from; b > to; --b) {
    DiagBlock& upper = blocks[b - 1];
    DiagBlock& lower = blocks[b];
    if (!swap_blocks(t, upper.start, upper.size, lower.size, z)) return false;
    const std::size_t start = upper.start;
    std::swap(upper.size, lower.size);
    upper.start = start;
    lower.start = start + upper.size;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Selection

struct EigenSelection {
  std::vector<bool> selected;  // per diagonal block
  bool promoted = false;       // a half-selected conjugate pair was promoted
};

/// Per-eigenvalue mask (one flag per row of S) to per-block selection.
inline EigenSelection select_eigenvalues(const SchurStructure& st, const std::vector<bool>& per_eigenvalue) {
  if (per_eigenvalue.size() != st.order()) throw std::invalid_argument("selection size does not match matrix order");
  EigenSelection sel;
  for (const auto& blk : st.blocks) {
    bool any = per_eigenvalue[blk.start];
    if (blk.size == 2) {
      const bool second = per_eigenvalue[blk.start + 1];
      if (any != second) sel.promoted = true;
      any = any || second;
    }
    sel.selected.push_back(any);
  }
  return sel;
}

/// Selection spec: a bitmask string over blocks ("0110..."), "all", "none",
/// or a predicate "abs_gt:R", "abs_lt:R", "re_gt:X", "re_lt:X".
inline EigenSelection parse_selection(const std::string& spec, const SchurStructure& st) {
  EigenSelection sel;
  const std::size_t nb = st.blocks.size();
  if (spec == "all" || spec == "none") {
    sel.selected.assign(nb, spec == "all");
    return sel;
  }
  const auto colon = spec.find(':');
  if (colon != std::string::npos) {
    const std::string name = spec.substr(0, colon);
    double value = 0.0;
    try {
      value = std::stod(spec.substr(colon + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("selection: bad threshold in '" + spec + "'");
    }
    for (const auto& e : st.eigen) {
      const double mag = std::hypot(e.re, e.im);
      if (name == "abs_gt") sel.selected.push_back(mag > value);
      else if (name == "abs_lt") sel.selected.push_back(mag < value);
      else if (name == "re_gt") sel.selected.push_back(e.re > value);
      else if (name == "re_lt") sel.selected.push_back(e.re < value);
      else throw std::invalid_argument("selection: unknown predicate '" + name + "'");
    }
    return sel;
  }
  if (spec.size() != nb) throw std::invalid_argument("selection: bitmask length must equal the number of blocks");
  for (char c : spec) {
    if (c != '0' && c != '1') throw std::invalid_argument("selection: bitmask must contain only 0/1");
    sel.selected.push_back(c == '1');
  }
  return sel;
}

// ---------------------------------------------------------------------------
// Window chains

struct ScriptedSwap {
  std::size_t pos = 0;  // global index of the upper block
  std::size_t upper = 1;
  std::size_t lower = 1;
};

struct ReorderWindow {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::vector<ScriptedSwap> swaps;
};

using WindowChain = std::vector<ReorderWindow>;

inline constexpr std::size_t reorder_window_overlap = 3;

/// Plans the windows that bubble every selected block to the front. Selected
/// blocks move in batches (at most half a window of rows); each batch gets
/// one chain of windows ordered bottom-up.
inline std::vector<WindowChain> build_chains(const SchurStructure& st, const EigenSelection& sel,
                                             std::size_t window_size) {
  if (window_size < 4) throw std::invalid_argument("build_chains: window size must be at least 4");
  if (sel.selected.size() != st.blocks.size()) throw std::invalid_argument("build_chains: selection size mismatch");

  struct Sim {
    std::size_t size;
    bool selected;
    std::size_t id;
  };
  std::vector<Sim> blocks;
  for (std::size_t i = 0; i < st.blocks.size(); ++i) blocks.push_back({st.blocks[i].size, sel.selected[i], i});
  const std::size_t n = st.order();
  auto start_of = [&](std::size_t idx) {
    std::size_t s = 0;
    for (std::size_t i = 0; i < idx; ++i) s += blocks[i].size;
    return s;
  };

  std::vector<WindowChain> chains;
  std::size_t lead = 0;  // blocks [0, lead) are selected and in place
  while (true) {
    while (lead < blocks.size() && blocks[lead].selected) ++lead;
    std::vector<std::size_t> batch;
    std::size_t batch_rows = 0;
    for (std::size_t i = lead; i < blocks.size(); ++i) {
      if (!blocks[i].selected) continue;
      if (!batch.empty() && batch_rows + blocks[i].size > window_size / 2) break;
      batch.push_back(blocks[i].id);
      batch_rows += blocks[i].size;
    }
    if (batch.empty()) break;
    auto in_batch = [&](std::size_t id) { return std::find(batch.begin(), batch.end(), id) != batch.end(); };
    auto index_of = [&](std::size_t id) {
      for (std::size_t i = 0; i < blocks.size(); ++i)
        if (blocks[i].id == id) return i;
      return blocks.size();
    };

    const std::size_t boundary = start_of(lead);
    std::size_t g_first = index_of(batch.back());  // group of collected batch blocks
    std::size_t g_count = 1;
    WindowChain chain;
    while (start_of(g_first) > boundary) {
      const std::size_t g_top = start_of(g_first);
      std::size_t g_rows = 0;
      for (std::size_t i = g_first; i < g_first + g_count; ++i) g_rows += blocks[i].size;
      const std::size_t g_bot = g_top + g_rows;
      const std::size_t stride = window_size - std::max(reorder_window_overlap, g_rows);
      const std::size_t target = g_top > boundary + stride ? g_top - stride : boundary;

      // window top: last block start <= target; window bottom: last block end <= top + w, but >= g_bot
      std::size_t first = lead;
      while (first + 1 < blocks.size() && start_of(first + 1) <= target) ++first;
      const std::size_t top = start_of(first);
      std::size_t last = g_first + g_count;  // one past
      while (last < blocks.size() && start_of(last) + blocks[last].size <= std::min(n, top + window_size)) ++last;
      const std::size_t bottom = start_of(last);

      ReorderWindow win{top, std::max(bottom, g_bot), {}};
      std::size_t insert_at = first;
      for (std::size_t i = first; i < last; ++i) {
        if (!in_batch(blocks[i].id)) continue;
        for (std::size_t j = i; j > insert_at; --j) {
          win.swaps.push_back({start_of(j - 1), blocks[j - 1].size, blocks[j].size});
          std::swap(blocks[j - 1], blocks[j]);
        }
        ++insert_at;
      }
      g_first = first;
      g_count = insert_at - first;
      chain.push_back(std::move(win));
    }
    chains.push_back(std::move(chain));
  }
  return chains;
}

// ---------------------------------------------------------------------------
// Task-based reordering

struct SwapFailure {
  std::size_t upper_start = 0;  // global row of the upper block
  std::size_t upper_size = 1;
  std::size_t lower_size = 1;
};

struct ReorderOptions {
  std::size_t window_size = 0;  // 0: tile size
  ExecPolicy policy{};
};

struct ReorderResult {
  SchurStructure structure;
  bool promoted = false;
  std::optional<SwapFailure> failure;
  std::size_t windows = 0;
  std::size_t swaps = 0;
};

inline void check_structure(const TiledMatrix& s, const SchurStructure& st) {
  const std::size_t n = s.order();
  if (st.order() != n || st.blocks.size() != st.eigen.size())
    throw std::invalid_argument("inconsistent structure: block sizes do not cover the matrix");
  std::size_t next = 0;
  for (const auto& b : st.blocks) {
    if (b.start != next || (b.size != 1 && b.size != 2)) throw std::invalid_argument("inconsistent structure");
    if (b.size == 2 && s(b.start + 1, b.start) == 0.0)
      throw std::invalid_argument("inconsistent structure: 2x2 block with zero subdiagonal");
    if (b.start > 0 && s(b.start, b.start - 1) != 0.0)
      throw std::invalid_argument("inconsistent structure: nonzero subdiagonal at block boundary");
    next += b.size;
  }
}

/// Reorders s in place so the selected blocks lead, and applies the same
/// transformation to the columns of q. On a failed swap the matrices stay a
/// valid Schur decomposition and `failure` names the block pair.
inline ReorderResult reorder_schur(TiledMatrix& s, TiledMatrix& q, const SchurStructure& st,
                                   const EigenSelection& sel, const ReorderOptions& opts = {}) {
  check_structure(s, st);
  if (q.order() != s.order()) throw std::invalid_argument("reorder_schur: dimension mismatch");
  const std::size_t w = opts.window_size ? opts.window_size : std::max<std::size_t>(s.tile_size(), 4);
  const auto chains = build_chains(st, sel, w);

  ReorderResult res;
  res.promoted = sel.promoted;
  struct Shared {
    std::atomic<bool> aborted{false};
    std::mutex mutex;
    std::optional<SwapFailure> failure;
    std::atomic<std::size_t> swaps{0};
  };
  auto shared = std::make_shared<Shared>();
  std::vector<std::shared_ptr<AccumulatorSlot>> slots;
  TaskGraph graph;

  for (const auto& chain : chains) {
    for (const auto& win : chain) {
      auto slot = std::make_shared<AccumulatorSlot>();
      slots.push_back(slot);
      ++res.windows;
      const std::size_t k = win.end - win.begin;

      TaskNode t;
      t.kind = TaskKind::window;
      t.priority = window_priority;
      t.writes = footprint(s, win.begin, win.begin, k, k);
      t.writes.push_back(HandleRef{&slot->handle, 0});
      t.body = [&s, slot, shared, win, k] {
        slot->acc = Accumulator::identity(win.begin, win.end);
        slot->identity = true;
        if (shared->aborted.load()) return;
        Matrix local = s.read_block(win.begin, win.begin, k, k);
        for (const auto& sw : win.swaps) {
          if (!swap_blocks(local, sw.pos - win.begin, sw.upper, sw.lower, &slot->acc.q)) {
            std::lock_guard lock(shared->mutex);
            if (!shared->failure) shared->failure = SwapFailure{sw.pos, sw.upper, sw.lower};
            shared->aborted = true;
            break;
          }
          slot->identity = false;
          ++shared->swaps;
        }
        if (!slot->identity) s.write_block(win.begin, win.begin, local);
      };
      graph.insert(std::move(t));
      insert_window_updates(graph, s, &q, slot, {win.begin, win.end, win.begin, win.end});
    }
  }

  execute_or_throw(graph, opts.policy);
  res.failure = shared->failure;
  res.swaps = shared->swaps.load();
  res.structure = structure_of(s);
  return res;
}

}  // namespace taskeig

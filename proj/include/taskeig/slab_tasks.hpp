#pragma once

// Right/left update tasks that carry a window's accumulator to the
// off-diagonal parts of a tiled matrix.

#include <memory>

#include "taskeig/runtime.hpp"
#include "taskeig/transform_kernels.hpp"

namespace taskeig {

/// Accumulator produced by one window task and consumed by its update tasks.
struct AccumulatorSlot {
  Accumulator acc;
  bool identity = false;  // set by the window task when nothing was applied
  DataHandle handle{1};
};

inline constexpr int window_priority = 2;
inline constexpr int update_priority = 1;
inline constexpr int q_update_priority = 0;

struct WindowUpdateSpec {
  std::size_t begin = 0;             // window [begin, end)
  std::size_t end = 0;
  std::size_t right_rows_end = 0;    // rows [0, right_rows_end) get  slab * q
  std::size_t left_cols_begin = 0;   // cols [left_cols_begin, n) get q^T * slab
};

/// Inserts right-update tasks (one per tile row) and left-update tasks (one
/// per tile column) on `s`, plus right updates on `q` when given.
inline void insert_window_updates(TaskGraph& graph, TiledMatrix& s, TiledMatrix* q,
                                  const std::shared_ptr<AccumulatorSlot>& slot, const WindowUpdateSpec& w) {
  const std::size_t n = s.order();
  const std::size_t k = w.end - w.begin;
  if (k == 0) return;

  auto right_tasks = [&](TiledMatrix& m, std::size_t rows_end, TaskKind kind, int priority) {
    const std::size_t b = m.tile_size();
    for (std::size_t r0 = 0; r0 < rows_end;) {
      const std::size_t r1 = std::min(rows_end, (r0 / b + 1) * b);
      TaskNode t;
      t.kind = kind;
      t.priority = priority;
      t.reads.push_back(HandleRef{&slot->handle, 0});
      t.writes = footprint(m, r0, w.begin, r1 - r0, k);
      t.body = [&m, slot, r0, r1, begin = w.begin, k] {
        if (slot->identity) return;
        m.write_block(r0, begin, apply_right(m.read_block(r0, begin, r1 - r0, k), slot->acc));
      };
      graph.insert(std::move(t));
      r0 = r1;
    }
  };

  right_tasks(s, w.right_rows_end, TaskKind::right_update, update_priority);

  const std::size_t b = s.tile_size();
  for (std::size_t c0 = w.left_cols_begin; c0 < n;) {
    const std::size_t c1 = std::min(n, (c0 / b + 1) * b);
    TaskNode t;
    t.kind = TaskKind::left_update;
    t.priority = update_priority;
    t.reads.push_back(HandleRef{&slot->handle, 0});
    t.writes = footprint(s, w.begin, c0, k, c1 - c0);
    t.body = [&s, slot, c0, c1, begin = w.begin, k] {
      if (slot->identity) return;
      s.write_block(begin, c0, apply_left(s.read_block(begin, c0, k, c1 - c0), slot->acc));
    };
    graph.insert(std::move(t));
    c0 = c1;
  }

  if (q != nullptr) right_tasks(*q, q->order(), TaskKind::right_update, q_update_priority);
}

}  // namespace taskeig

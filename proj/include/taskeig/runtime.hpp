#pragma once

// Task graph with dependencies derived from declared read/write sets, and a
// priority-aware worker pool that executes it in a sequentially consistent
// order.

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include "taskeig/tile_core.hpp"

namespace taskeig {

using TaskId = std::size_t;

enum class TaskKind { window, right_update, left_update, panel, small_dense, custom };

inline const char* to_string(TaskKind k) {
  switch (k) {
    case TaskKind::window: return "window";
    case TaskKind::right_update: return "right_update";
    case TaskKind::left_update: return "left_update";
    case TaskKind::panel: return "panel";
    case TaskKind::small_dense: return "small_dense";
    case TaskKind::custom: return "custom";
  }
  return "custom";
}

/// A tracked datum that is not a matrix tile: accumulators, panel factors,
/// vector segments. Split into `parts` independently tracked pieces.
class DataHandle {
public:
  explicit DataHandle(std::size_t parts = 1) : id_(detail::next_object_id()), generation_(parts, 0) {}
  DataHandle(const DataHandle&) = delete;
  DataHandle& operator=(const DataHandle&) = delete;

  std::uint64_t id() const noexcept { return id_; }
  std::size_t parts() const noexcept { return generation_.size(); }
  std::uint64_t& generation(std::size_t part) { return generation_.at(part); }

private:
  std::uint64_t id_;
  std::vector<std::uint64_t> generation_;
};

struct TileRef {
  TiledMatrix* matrix = nullptr;
  std::size_t row = 0;
  std::size_t col = 0;
};

struct HandleRef {
  DataHandle* handle = nullptr;
  std::size_t part = 0;
};

using DataRef = std::variant<TileRef, HandleRef>;

/// All tiles of `m` intersecting the region.
inline std::vector<DataRef> footprint(TiledMatrix& m, std::size_t r0, std::size_t c0, std::size_t rows,
                                      std::size_t cols) {
  std::vector<DataRef> out;
  for (auto t : m.tiles_covering(r0, c0, rows, cols)) out.push_back(TileRef{&m, t.row, t.col});
  return out;
}

inline void append(std::vector<DataRef>& dst, const std::vector<DataRef>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

struct TaskNode {
  TaskKind kind = TaskKind::custom;
  std::vector<DataRef> reads;
  std::vector<DataRef> writes;  // read-modify-write data belongs here
  int priority = 0;
  std::function<void()> body;
  std::uint64_t insertion_seq = 0;  // assigned by insert
};

struct TaskEdge {
  TaskId from = 0;
  TaskId to = 0;
  friend bool operator==(const TaskEdge&, const TaskEdge&) = default;
  friend auto operator<=>(const TaskEdge&, const TaskEdge&) = default;
};

struct TraceEvent {
  std::uint64_t task_id = 0;
  TaskKind kind = TaskKind::custom;
  int priority = 0;
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 0;
  std::size_t worker = 0;
};

/// Collects trace events across every graph run under one policy.
class TaskTrace {
public:
  void append(const std::vector<TraceEvent>& events, std::size_t task_count) {
    std::lock_guard lock(mutex_);
    for (auto e : events) {
      e.task_id += offset_;
      events_.push_back(e);
    }
    offset_ += task_count;
  }

  std::vector<TraceEvent> events() const {
    std::lock_guard lock(mutex_);
    return events_;
  }

  void write_csv(std::ostream& out) const {
    std::lock_guard lock(mutex_);
    out << "task_id,kind,priority,start_ns,end_ns,worker\n";
    for (const auto& e : events_)
      out << e.task_id << ',' << to_string(e.kind) << ',' << e.priority << ',' << e.start_ns << ',' << e.end_ns
          << ',' << e.worker << '\n';
  }

private:
  mutable std::mutex mutex_;
  std::vector<TraceEvent> events_;
  std::uint64_t offset_ = 0;
};

inline bool audit_from_env() {
  const char* v = std::getenv("TASKEIG_AUDIT");
  return v != nullptr && std::string(v) == "1";
}

/// Worker count, honoring the TASKEIG_WORKERS override.
inline std::size_t workers_from_env(std::size_t requested) {
  if (const char* v = std::getenv("TASKEIG_WORKERS")) {
    try {
      const long w = std::stol(v);
      if (w >= 1) return static_cast<std::size_t>(w);
    } catch (const std::exception&) {
    }
  }
  return requested;
}

struct ExecPolicy {
  std::size_t workers = 1;
  bool audit = audit_from_env();
  std::shared_ptr<TaskTrace> trace;
};

struct RunStatus {
  bool ok = true;
  std::optional<TaskId> failed_task;
  std::string message;
  std::size_t tasks_run = 0;
  std::size_t audit_violations = 0;
  std::vector<std::string> audit_messages;
};

class TaskFailure : public std::runtime_error {
public:
  TaskFailure(TaskId task, const std::string& what)
      : std::runtime_error("task " + std::to_string(task) + " failed: " + what), task_(task) {}
  TaskId task() const noexcept { return task_; }

private:
  TaskId task_;
};

class TaskGraph {
public:
  TaskGraph() = default;
  TaskGraph(const TaskGraph&) = delete;
  TaskGraph& operator=(const TaskGraph&) = delete;
  ~TaskGraph() {
    for (auto& t : threads_)
      if (t.joinable()) t.join();
  }

  /// Appends a task and derives RAW, WAR and WAW edges against earlier tasks.
  TaskId insert(TaskNode node) {
    if (started_) throw std::logic_error("TaskGraph: insert after run");
    const TaskId id = nodes_.size();
    node.insertion_seq = id;

    Task task;
    std::vector<Key> writes;
    for (const auto& r : node.writes) writes.push_back(resolve(r));
    std::sort(writes.begin(), writes.end());
    writes.erase(std::unique(writes.begin(), writes.end()), writes.end());
    std::vector<Key> reads;
    for (const auto& r : node.reads) {
      Key k = resolve(r);
      if (!std::binary_search(writes.begin(), writes.end(), k)) reads.push_back(k);
    }
    std::sort(reads.begin(), reads.end());
    reads.erase(std::unique(reads.begin(), reads.end()), reads.end());

    std::vector<TaskId> preds;
    for (const auto& k : reads) {
      auto& st = state_for(k);
      if (st.last_writer) preds.push_back(*st.last_writer);
      st.readers.push_back(id);
    }
    for (const auto& k : writes) {
      auto& st = state_for(k);
      if (!st.readers.empty()) {
        preds.insert(preds.end(), st.readers.begin(), st.readers.end());
      } else if (st.last_writer) {
        preds.push_back(*st.last_writer);
      }
      task.write_ordinals.push_back(st.base_generation + st.writes);
      ++st.writes;
      st.readers.clear();
      st.last_writer = id;
    }
    std::sort(preds.begin(), preds.end());
    preds.erase(std::unique(preds.begin(), preds.end()), preds.end());
    for (TaskId p : preds) {
      edges_.push_back({p, id});
      nodes_[p].successors.push_back(id);
    }
    task.pending = preds.size();
    task.reads = std::move(reads);
    task.writes = std::move(writes);
    task.node = std::move(node);
    nodes_.push_back(std::move(task));
    return id;
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<TaskEdge>& edges() const noexcept { return edges_; }
  const TaskNode& node(TaskId id) const { return nodes_.at(id).node; }

  /// Starts execution on `policy.workers` threads; returns immediately.
  void run(const ExecPolicy& policy) {
    if (started_) throw std::logic_error("TaskGraph: run called twice");
    if (policy.workers == 0) throw std::invalid_argument("TaskGraph: need at least one worker");
    started_ = true;
    policy_ = policy;
    for (TaskId id = 0; id < nodes_.size(); ++id)
      if (nodes_[id].pending == 0) ready_.push(ReadyEntry{nodes_[id].node.priority, id});
    if (nodes_.empty()) return;
    for (std::size_t w = 0; w < policy.workers; ++w) threads_.emplace_back([this, w] { worker_loop(w); });
  }

  void run(std::size_t workers) {
    ExecPolicy p;
    p.workers = workers;
    run(p);
  }

  /// Blocks until every task finished or the graph aborted.
  RunStatus wait_all() {
    if (!started_) throw std::logic_error("TaskGraph: wait_all before run");
    for (auto& t : threads_)
      if (t.joinable()) t.join();
    if (policy_.trace) policy_.trace->append(trace_, nodes_.size());
    return status_;
  }

  RunStatus execute(const ExecPolicy& policy) {
    run(policy);
    return wait_all();
  }

private:
  struct Key {
    std::uint64_t object = 0;
    std::size_t index = 0;
    std::uint64_t* generation = nullptr;
    friend bool operator==(const Key& a, const Key& b) { return a.object == b.object && a.index == b.index; }
    friend bool operator<(const Key& a, const Key& b) {
      return a.object != b.object ? a.object < b.object : a.index < b.index;
    }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      return std::hash<std::uint64_t>{}(k.object * 0x9E3779B97F4A7C15ull ^ k.index);
    }
  };
  struct DataState {
    std::optional<TaskId> last_writer;
    std::vector<TaskId> readers;
    std::uint64_t base_generation = 0;
    std::uint64_t writes = 0;
    // audit bookkeeping
    std::size_t active_readers = 0;
    std::size_t active_writers = 0;
    std::optional<TaskId> last_started_writer;
  };
  struct Task {
    TaskNode node;
    std::vector<Key> reads;
    std::vector<Key> writes;
    std::vector<std::uint64_t> write_ordinals;
    std::vector<TaskId> successors;
    std::size_t pending = 0;
  };
  struct ReadyEntry {
    int priority;
    TaskId id;
    // max-heap: higher priority first, then lower insertion sequence
    friend bool operator<(const ReadyEntry& a, const ReadyEntry& b) {
      return a.priority != b.priority ? a.priority < b.priority : a.id > b.id;
    }
  };

  static Key resolve(const DataRef& ref) {
    if (const auto* t = std::get_if<TileRef>(&ref)) {
      if (t->matrix == nullptr) throw std::invalid_argument("TaskGraph: null matrix reference");
      if (t->row >= t->matrix->grid() || t->col >= t->matrix->grid())
        throw std::out_of_range("TaskGraph: tile reference out of range");
      return Key{t->matrix->id(), t->col * t->matrix->grid() + t->row, &t->matrix->generation(t->row, t->col)};
    }
    const auto& h = std::get<HandleRef>(ref);
    if (h.handle == nullptr) throw std::invalid_argument("TaskGraph: null handle reference");
    if (h.part >= h.handle->parts()) throw std::out_of_range("TaskGraph: handle part out of range");
    return Key{h.handle->id(), h.part, &h.handle->generation(h.part)};
  }

  DataState& state_for(const Key& k) {
    auto [it, inserted] = state_.try_emplace(k);
    if (inserted) it->second.base_generation = *k.generation;
    return it->second;
  }

  static std::int64_t now_ns() {
    static const auto epoch = std::chrono::steady_clock::now();
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - epoch).count();
  }

  void audit_start(TaskId id) {
    auto& t = nodes_[id];
    auto violation = [&](std::string msg) {
      ++status_.audit_violations;
      if (status_.audit_messages.size() < 16) status_.audit_messages.push_back(std::move(msg));
    };
    for (const auto& k : t.reads) {
      auto& st = state_.at(k);
      if (st.active_writers) violation("task " + std::to_string(id) + " reads data under an active writer");
      ++st.active_readers;
    }
    for (std::size_t w = 0; w < t.writes.size(); ++w) {
      const auto& k = t.writes[w];
      auto& st = state_.at(k);
      if (st.active_writers || st.active_readers)
        violation("task " + std::to_string(id) + " writes data in concurrent use");
      if (st.last_started_writer && *st.last_started_writer > id)
        violation("task " + std::to_string(id) + " writes out of insertion order");
      if (*k.generation != t.write_ordinals[w])
        violation("task " + std::to_string(id) + " sees unexpected generation");
      st.last_started_writer = id;
      ++st.active_writers;
    }
  }

  void audit_finish(TaskId id) {
    auto& t = nodes_[id];
    for (const auto& k : t.reads) --state_.at(k).active_readers;
    for (const auto& k : t.writes) --state_.at(k).active_writers;
  }

  void worker_loop(std::size_t worker) {
    std::unique_lock lock(mutex_);
    while (true) {
      cv_.wait(lock, [&] { return !ready_.empty() || finished() || aborted_; });
      if (aborted_ || (ready_.empty() && finished())) break;
      const TaskId id = ready_.top().id;
      ready_.pop();
      ++running_;
      if (policy_.audit) audit_start(id);
      lock.unlock();

      TraceEvent ev{id, nodes_[id].node.kind, nodes_[id].node.priority, now_ns(), 0, worker};
      std::optional<std::string> error;
      try {
        if (nodes_[id].node.body) nodes_[id].node.body();
      } catch (const std::exception& e) {
        error = e.what();
      } catch (...) {
        error = "unknown exception";
      }
      ev.end_ns = now_ns();

      lock.lock();
      --running_;
      ++completed_;
      if (policy_.audit) audit_finish(id);
      if (policy_.trace) trace_.push_back(ev);
      if (error) {
        if (status_.ok) {
          status_.ok = false;
          status_.failed_task = id;
          status_.message = *error;
        }
        aborted_ = true;
      } else {
        ++status_.tasks_run;
        for (const auto& k : nodes_[id].writes) ++*k.generation;
        for (TaskId s : nodes_[id].successors)
          if (--nodes_[s].pending == 0) ready_.push(ReadyEntry{nodes_[s].node.priority, s});
      }
      cv_.notify_all();
    }
    cv_.notify_all();
  }

  bool finished() const { return completed_ == nodes_.size() || (aborted_ && running_ == 0); }

  std::vector<Task> nodes_;
  std::vector<TaskEdge> edges_;
  std::unordered_map<Key, DataState, KeyHash> state_;

  bool started_ = false;
  ExecPolicy policy_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::priority_queue<ReadyEntry> ready_;
  std::size_t running_ = 0;
  std::size_t completed_ = 0;
  bool aborted_ = false;
  RunStatus status_;
  std::vector<TraceEvent> trace_;
  std::vector<std::thread> threads_;
};

/// Runs the graph and converts failures into exceptions.
inline RunStatus execute_or_throw(TaskGraph& graph, const ExecPolicy& policy) {
  RunStatus st = graph.execute(policy);
  if (!st.ok) throw TaskFailure(*st.failed_task, st.message);
  if (st.audit_violations) throw std::logic_error("runtime audit: " + st.audit_messages.front());
  return st;
}

}  // namespace taskeig

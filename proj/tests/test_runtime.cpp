#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "taskeig/runtime.hpp"

using namespace taskeig;

namespace {

// Footprints over `tiles` tiles of a single matrix (tile id = col * g + row).
std::vector<oracle::Footprint> random_footprints(std::size_t count, std::size_t g, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(g * g) - 1);
  std::uniform_int_distribution<int> size(0, 3);
  std::vector<oracle::Footprint> out(count);
  for (auto& f : out) {
    const int nr = size(gen), nw = 1 + size(gen) % 2;
    for (int i = 0; i < nr; ++i) f.reads.insert(pick(gen));
    for (int i = 0; i < nw; ++i) f.writes.insert(pick(gen));
  }
  return out;
}

TaskNode node_for(const oracle::Footprint& f, TiledMatrix& m, std::function<void()> body = {}) {
  TaskNode n;
  const std::size_t g = m.grid();
  for (int t : f.reads) n.reads.push_back(TileRef{&m, t % g, t / g});
  for (int t : f.writes) n.writes.push_back(TileRef{&m, t % g, t / g});
  n.body = std::move(body);
  return n;
}

std::vector<std::vector<bool>> derived_closure(const TaskGraph& g) {
  std::set<std::pair<std::size_t, std::size_t>> e;
  for (const auto& edge : g.edges()) e.insert({edge.from, edge.to});
  return oracle::closure(g.size(), e);
}

}  // namespace

TEST(TaskGraph, DisjointWritersHaveNoEdge) {
  TiledMatrix m(4, 2);
  TaskGraph g;
  g.insert(node_for({{}, {0}}, m));
  g.insert(node_for({{}, {3}}, m));
  EXPECT_TRUE(g.edges().empty());
}

TEST(TaskGraph, WriteAfterWrite) {
  TiledMatrix m(4, 2);
  TaskGraph g;
  g.insert(node_for({{}, {1}}, m));
  g.insert(node_for({{}, {1}}, m));
  ASSERT_EQ(g.edges().size(), 1u);
  EXPECT_EQ(g.edges()[0], (TaskEdge{0, 1}));
}

TEST(TaskGraph, ReadAfterWriteAndWriteAfterRead) {
  TiledMatrix m(4, 2);
  TaskGraph g;
  g.insert(node_for({{}, {0}}, m));   // W
  g.insert(node_for({{0}, {1}}, m));  // R of 0
  g.insert(node_for({{}, {0}}, m));   // W again, after the reader
  auto c = derived_closure(g);
  EXPECT_TRUE(c[0][1]);
  EXPECT_TRUE(c[1][2]);
  EXPECT_TRUE(c[0][2]);
}

TEST(TaskGraph, InsertionSequenceIncreases) {
  TiledMatrix m(4, 2);
  TaskGraph g;
  for (int i = 0; i < 5; ++i) g.insert(node_for({{}, {i % 4}}, m));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g.node(i).insertion_seq, i);
}

TEST(TaskGraph, RejectsOutOfRangeTile) {
  TiledMatrix m(4, 2);
  TaskGraph g;
  TaskNode n;
  n.writes.push_back(TileRef{&m, 2, 0});
  EXPECT_THROW(g.insert(std::move(n)), std::out_of_range);
}

// Window tasks W1, W2 and their right/left updates over a 6x6 tile grid. The
// derived edges must reproduce the pairwise conflict relation up to closure.
TEST(TaskGraph, WindowPatternMatchesFootprintOracle) {
  const std::size_t g = 6;
  TiledMatrix m(g * 2, 2);
  auto id = [&](std::size_t r, std::size_t c) { return static_cast<int>(c * g + r); };
  std::vector<oracle::Footprint> f;
  for (std::size_t w = 0; w < 3; ++w) {
    const std::size_t lo = w * 2, hi = lo + 2;  // window tiles lo..hi-1 overlap the next one by a tile
    oracle::Footprint win, right, left;
    for (std::size_t r = lo; r < std::min(hi + 1, g); ++r)
      for (std::size_t c = lo; c < std::min(hi + 1, g); ++c) win.writes.insert(id(r, c));
    for (std::size_t r = 0; r < lo; ++r)
      for (std::size_t c = lo; c < std::min(hi + 1, g); ++c) right.writes.insert(id(r, c));
    for (std::size_t r = lo; r < std::min(hi + 1, g); ++r)
      for (std::size_t c = hi + 1; c < g; ++c) left.writes.insert(id(r, c));
    f.push_back(win);
    if (!right.writes.empty()) f.push_back(right);
    if (!left.writes.empty()) f.push_back(left);
  }
  TaskGraph graph;
  for (const auto& fp : f) graph.insert(node_for(fp, m));
  EXPECT_EQ(derived_closure(graph), oracle::closure(f.size(), oracle::conflict_edges(f)));
  // every derived edge is a real conflict
  const auto conflicts = oracle::conflict_edges(f);
  for (const auto& e : graph.edges()) EXPECT_TRUE(conflicts.count({e.from, e.to}));
}

TEST(TaskGraph, RandomFootprintsMatchOracle) {
  for (unsigned seed = 0; seed < 20; ++seed) {
    TiledMatrix m(12, 3);
    auto f = random_footprints(60, m.grid(), seed);
    TaskGraph g;
    for (const auto& fp : f) g.insert(node_for(fp, m));
    const auto conflicts = oracle::conflict_edges(f);
    for (const auto& e : g.edges()) ASSERT_TRUE(conflicts.count({e.from, e.to}));
    ASSERT_EQ(derived_closure(g), oracle::closure(f.size(), conflicts)) << seed;
  }
}

TEST(TaskGraph, EmptyGraph) {
  TaskGraph g;
  auto st = g.execute(ExecPolicy{4, false, nullptr});
  EXPECT_TRUE(st.ok);
  EXPECT_EQ(st.tasks_run, 0u);
}

TEST(TaskGraph, ChainRunsInInsertionOrder) {
  for (std::size_t workers : {1u, 3u, 8u}) {
    TiledMatrix m(2, 1);
    TaskGraph g;
    std::vector<int> order;
    std::mutex mu;
    for (int i = 0; i < 50; ++i)
      g.insert(node_for({{}, {0}}, m, [&, i] {
        std::lock_guard lock(mu);
        order.push_back(i);
      }));
    ASSERT_TRUE(g.execute(ExecPolicy{workers, true, nullptr}).ok);
    ASSERT_EQ(order.size(), 50u);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(order[i], i);
  }
}

TEST(TaskGraph, PriorityOrdersReadyTasks) {
  TaskGraph g;
  std::vector<int> order;
  for (int i = 0; i < 6; ++i) {
    TaskNode n;
    n.priority = i % 3;
    n.body = [&order, i] { order.push_back(i); };
    g.insert(std::move(n));
  }
  ASSERT_TRUE(g.execute(ExecPolicy{1, false, nullptr}).ok);
  EXPECT_EQ(order, (std::vector<int>{2, 5, 1, 4, 0, 3}));
}

TEST(TaskGraph, FailureAbortsAndReportsTask) {
  TiledMatrix m(2, 1);
  TaskGraph g;
  std::atomic<int> ran{0};
  g.insert(node_for({{}, {0}}, m, [&] { ++ran; }));
  g.insert(node_for({{}, {0}}, m, [] { throw std::runtime_error("boom"); }));
  for (int i = 0; i < 5; ++i) g.insert(node_for({{}, {0}}, m, [&] { ++ran; }));
  auto st = g.execute(ExecPolicy{2, false, nullptr});
  EXPECT_FALSE(st.ok);
  ASSERT_TRUE(st.failed_task);
  EXPECT_EQ(*st.failed_task, 1u);
  EXPECT_EQ(st.message, "boom");
  EXPECT_EQ(ran.load(), 1);
}

TEST(TaskGraph, ExecuteOrThrow) {
  TaskGraph g;
  TaskNode n;
  n.body = [] { throw std::runtime_error("bad"); };
  g.insert(std::move(n));
  EXPECT_THROW(execute_or_throw(g, ExecPolicy{1, false, nullptr}), TaskFailure);
}

TEST(TaskGraph, GenerationCountersMatchWriteCounts) {
  TiledMatrix m(16, 2);
  auto f = random_footprints(1000, m.grid(), 99);
  TaskGraph g;
  for (const auto& fp : f) g.insert(node_for(fp, m, [] {}));
  auto st = g.execute(ExecPolicy{4, true, nullptr});
  ASSERT_TRUE(st.ok);
  EXPECT_EQ(st.audit_violations, 0u);
  std::vector<std::uint64_t> writes(m.grid() * m.grid(), 0);
  for (const auto& fp : f)
    for (int t : fp.writes) ++writes[t];
  for (std::size_t i = 0; i < m.grid(); ++i)
    for (std::size_t j = 0; j < m.grid(); ++j) EXPECT_EQ(m.generation(i, j), writes[j * m.grid() + i]);
}

// Tasks accumulate into tiles in a non-commutative way; the result only
// matches across worker counts if dependencies serialize conflicting tasks.
TEST(TaskGraph, WorkerCountDoesNotChangeResults) {
  auto run = [](std::size_t workers) {
    TiledMatrix m(12, 3);
    auto f = random_footprints(300, m.grid(), 5);
    TaskGraph g;
    for (std::size_t t = 0; t < f.size(); ++t) {
      auto fp = f[t];
      g.insert(node_for(fp, m, [&m, fp, t] {
        double acc = 0.5 + t;
        for (int r : fp.reads) acc += m.tile(r % m.grid(), r / m.grid())[0];
        for (int w : fp.writes) {
          auto tile = m.tile(w % m.grid(), w / m.grid());
          tile[0] = tile[0] * 0.75 + acc;
        }
      }));
    }
    EXPECT_TRUE(g.execute(ExecPolicy{workers, false, nullptr}).ok);
    return to_dense(m);
  };
  const Matrix one = run(1);
  EXPECT_TRUE(run(8) == one);
  EXPECT_TRUE(run(3) == one);
}

TEST(TaskGraph, DataHandlesCarryDependencies) {
  DataHandle h(2);
  TaskGraph g;
  TaskNode a, b, c;
  a.writes.push_back(HandleRef{&h, 0});
  b.reads.push_back(HandleRef{&h, 0});
  c.writes.push_back(HandleRef{&h, 1});
  g.insert(std::move(a));
  g.insert(std::move(b));
  g.insert(std::move(c));
  ASSERT_EQ(g.edges().size(), 1u);
  EXPECT_EQ(g.edges()[0], (TaskEdge{0, 1}));
  ASSERT_TRUE(g.execute(ExecPolicy{2, true, nullptr}).ok);
  EXPECT_EQ(h.generation(0), 1u);
  EXPECT_EQ(h.generation(1), 1u);
}

TEST(TaskGraph, RunTwiceRejected) {
  TaskGraph g;
  g.insert(TaskNode{});
  g.run(1);
  EXPECT_THROW(g.run(1), std::logic_error);
  EXPECT_TRUE(g.wait_all().ok);
  EXPECT_THROW(g.insert(TaskNode{}), std::logic_error);
}

TEST(TaskTrace, RecordsEveryTask) {
  auto trace = std::make_shared<TaskTrace>();
  TiledMatrix m(4, 2);
  for (int pass = 0; pass < 2; ++pass) {
    TaskGraph g;
    for (int i = 0; i < 5; ++i) {
      auto n = node_for({{}, {i % 2}}, m, [] {});
      n.kind = TaskKind::window;
      n.priority = 2;
      g.insert(std::move(n));
    }
    ASSERT_TRUE(g.execute(ExecPolicy{2, false, trace}).ok);
  }
  auto ev = trace->events();
  ASSERT_EQ(ev.size(), 10u);
  std::set<std::uint64_t> ids;
  for (const auto& e : ev) {
    ids.insert(e.task_id);
    EXPECT_LE(e.start_ns, e.end_ns);
    EXPECT_LT(e.worker, 2u);
  }
  EXPECT_EQ(ids.size(), 10u);
  std::ostringstream out;
  trace->write_csv(out);
  const std::string csv = out.str();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "task_id,kind,priority,start_ns,end_ns,worker");
  EXPECT_NE(csv.find(",window,2,"), std::string::npos);
}

TEST(Environment, WorkersOverride) {
  ::setenv("TASKEIG_WORKERS", "6", 1);
  EXPECT_EQ(workers_from_env(1), 6u);
  ::setenv("TASKEIG_WORKERS", "junk", 1);
  EXPECT_EQ(workers_from_env(3), 3u);
  ::unsetenv("TASKEIG_WORKERS");
  EXPECT_EQ(workers_from_env(2), 2u);
}

TEST(Environment, AuditFlag) {
  ::setenv("TASKEIG_AUDIT", "1", 1);
  EXPECT_TRUE(audit_from_env());
  EXPECT_TRUE(ExecPolicy{}.audit);
  ::setenv("TASKEIG_AUDIT", "0", 1);
  EXPECT_FALSE(audit_from_env());
  ::unsetenv("TASKEIG_AUDIT");
}

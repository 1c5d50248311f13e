#pragma once

// Dynamic scheduler: unfolds a sequential task stream into a DAG from the
// data hazards between tile accesses (RAW, WAR, WAW) and runs it on a pool
// of worker threads.
//
// Every pair of tasks that touches a common tile with at least one writer is
// ordered, so each tile sees the same sequence of writes and every task sees
// the same inputs as in the sequential order. Results are therefore bitwise
// identical for any worker count and any interleaving.

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <queue>
#include <random>
#include <span>
#include <string_view>
#include <thread>
#include <vector>

#include "tilinv/error.hpp"
#include "tilinv/kernels.hpp"
#include "tilinv/taskgen.hpp"
#include "tilinv/tile_matrix.hpp"

namespace tilinv {

enum class HazardKind : std::uint8_t { RAW, WAR, WAW };

constexpr std::string_view to_string(HazardKind k) noexcept {
  switch (k) {
    case HazardKind::RAW: return "RAW";
    case HazardKind::WAR: return "WAR";
    case HazardKind::WAW: return "WAW";
  }
  return "?";
}

struct DagEdge {
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  HazardKind kind = HazardKind::RAW;
  TileId tile;
};

struct TaskDag {
  std::size_t t = 0;
  MatrixLabel result = MatrixLabel::A;
  std::vector<Task> tasks;  // indexed by task id
  /// One edge per (task pair, tile) hazard as found while unfolding. Kept
  /// intact by pruning so hazard statistics always describe the full set.
  std::vector<DagEdge> hazards;
  /// Ordering edges induced by barriers, excluding pairs already ordered by a
  /// hazard edge.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> barrier_edges;
  /// Deduplicated adjacency used for execution and path analysis.
  std::vector<std::vector<std::uint32_t>> preds;
  std::vector<std::vector<std::uint32_t>> succs;

  std::size_t size() const noexcept { return tasks.size(); }

  std::size_t edge_count() const noexcept {
    std::size_t n = 0;
    for (const auto& p : preds) n += p.size();
    return n;
  }
};

namespace detail {

inline void finish_adjacency(TaskDag& dag) {
  for (auto& p : dag.preds) {
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
  }
  dag.succs.assign(dag.size(), {});
  for (std::uint32_t v = 0; v < dag.size(); ++v)
    for (auto u : dag.preds[v]) dag.succs[u].push_back(v);
}

inline TaskDag empty_dag(const TaskStream& stream) {
  TaskDag dag;
  dag.t = stream.t;
  dag.result = stream.result;
  dag.tasks = stream.tasks;
  for (std::uint32_t id = 0; id < dag.tasks.size(); ++id)
    if (dag.tasks[id].id != id) throw ContractError("task ids must equal stream positions");
  dag.preds.assign(dag.size(), {});
  return dag;
}

/// Full ordering between consecutive barrier segments.
inline void add_barrier_edges(TaskDag& dag, std::span<const std::size_t> barriers) {
  std::size_t begin = 0;
  std::vector<std::size_t> cuts(barriers.begin(), barriers.end());
  cuts.push_back(dag.size());
  std::size_t prev_begin = 0;
  bool have_prev = false;
  for (std::size_t cut : cuts) {
    if (cut <= begin) continue;
    if (have_prev) {
      for (std::size_t v = begin; v < cut; ++v) {
        auto& p = dag.preds[v];
        std::sort(p.begin(), p.end());
        for (std::size_t u = prev_begin; u < begin; ++u) {
          const auto uu = static_cast<std::uint32_t>(u);
          if (!std::binary_search(p.begin(), p.end(), uu))
            dag.barrier_edges.emplace_back(uu, static_cast<std::uint32_t>(v));
        }
      }
    }
    prev_begin = begin;
    begin = cut;
    have_prev = true;
  }
  for (auto [u, v] : dag.barrier_edges) dag.preds[v].push_back(u);
}

inline HazardKind classify(AccessMode earlier, AccessMode later) noexcept {
  // a read-write on either side carries a true dependence when the earlier
  // task writes and the later one reads
  if (writes(earlier) && reads(later)) return HazardKind::RAW;
  if (writes(earlier)) return HazardKind::WAW;
  return HazardKind::WAR;
}

}  // namespace detail

/// Scoreboard unfolding: per tile, the last writer and the readers since.
/// A reader depends on the last writer (RAW); a writer depends on the
/// readers since the last write (WAR) and, when it does not read the tile
/// itself, on the last writer (WAW). A read-write after a write is RAW.
inline TaskDag build_dag(const TaskStream& stream) {
  TaskDag dag = detail::empty_dag(stream);
  struct Board {
    std::optional<std::uint32_t> writer;
    AccessMode writer_mode = AccessMode::ReadWrite;
    std::vector<std::uint32_t> readers;
  };
  std::map<TileId, Board> boards;

  for (const Task& task : dag.tasks) {
    const std::uint32_t v = task.id;
    for (const Access& acc : task.accesses) {
      Board& bd = boards[acc.tile];
      if (writes(acc.mode)) {
        for (auto r : bd.readers)
          if (r != v) dag.hazards.push_back({r, v, HazardKind::WAR, acc.tile});
        if (bd.writer)
          dag.hazards.push_back({*bd.writer, v, detail::classify(bd.writer_mode, acc.mode), acc.tile});
        bd.writer = v;
        bd.writer_mode = acc.mode;
        bd.readers.clear();
      } else {
        if (bd.writer) dag.hazards.push_back({*bd.writer, v, HazardKind::RAW, acc.tile});
        bd.readers.push_back(v);
      }
    }
  }
  for (const auto& e : dag.hazards) dag.preds[e.to].push_back(e.from);
  detail::add_barrier_edges(dag, stream.barriers);
  detail::finish_adjacency(dag);
  return dag;
}

/// Reference unfolding with one edge for every ordered pair of tasks sharing
/// a tile with at least one writer. Quadratic; used to validate build_dag.
inline TaskDag build_dag_all_pairs(const TaskStream& stream) {
  TaskDag dag = detail::empty_dag(stream);
  std::map<TileId, std::vector<std::pair<std::uint32_t, AccessMode>>> touched;
  for (const Task& task : dag.tasks)
    for (const Access& acc : task.accesses) {
      for (auto [u, mode] : touched[acc.tile])
        if (writes(mode) || writes(acc.mode))
          dag.hazards.push_back({u, task.id, detail::classify(mode, acc.mode), acc.tile});
      touched[acc.tile].emplace_back(task.id, acc.mode);
    }
  for (const auto& e : dag.hazards) dag.preds[e.to].push_back(e.from);
  detail::add_barrier_edges(dag, stream.barriers);
  detail::finish_adjacency(dag);
  return dag;
}

/// Drops transitively implied edges from the adjacency lists. `hazards`
/// and `barrier_edges` are left as recorded.
inline void prune_transitive(TaskDag& dag) {
  const std::size_t n = dag.size();
  const std::size_t words = (n + 63) / 64;
  // reach[v] = set of tasks v can reach, built in reverse id order
  std::vector<std::vector<std::uint64_t>> reach(n, std::vector<std::uint64_t>(words, 0));
  for (std::size_t vv = n; vv-- > 0;) {
    auto& s = dag.succs[vv];
    std::sort(s.begin(), s.end());
    std::vector<std::uint32_t> kept;
    // visiting successors nearest-first: a successor already reachable
    // through a kept one is redundant
    for (auto w : s) {
      if (reach[vv][w / 64] >> (w % 64) & 1U) continue;
      kept.push_back(w);
      reach[vv][w / 64] |= std::uint64_t{1} << (w % 64);
      for (std::size_t q = 0; q < words; ++q) reach[vv][q] |= reach[w][q];
    }
    s = std::move(kept);
  }
  dag.preds.assign(n, {});
  for (std::uint32_t u = 0; u < n; ++u)
    for (auto w : dag.succs[u]) dag.preds[w].push_back(u);
}

/// Tasks not yet completed whose predecessors all are.
inline std::vector<std::uint32_t> ready_set(const TaskDag& dag, const std::vector<bool>& completed) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t v = 0; v < dag.size(); ++v) {
    if (v < completed.size() && completed[v]) continue;
    bool ok = true;
    for (auto u : dag.preds[v])
      if (u >= completed.size() || !completed[u]) {
        ok = false;
        break;
      }
    if (ok) out.push_back(v);
  }
  return out;
}

// --- execution ---------------------------------------------------------------

/// The operand matrix plus whichever working arrays the stream touches.
class Workspace {
 public:
  Workspace(TileMatrix a, const TaskStream& stream) {
    a.set_label(MatrixLabel::A);
    if (a.tile_count() != stream.t)
      throw InvalidSize("matrix has " + std::to_string(a.tile_count()) + " tiles per side, stream expects " +
                        std::to_string(stream.t));
    for (auto label : {MatrixLabel::B, MatrixLabel::C})
      if (stream.uses(label)) slot(label).emplace(a.order(), a.tile_order(), label);
    slot(MatrixLabel::A).emplace(std::move(a));
  }

  Tile& tile(const TileId& id) { return matrix(id.label).tile(id.row, id.col); }

  TileMatrix& matrix(MatrixLabel label) {
    auto& m = slot(label);
    if (!m) throw ContractError(std::string("working array ") + to_char(label) + " not allocated");
    return *m;
  }

  /// The result matrix, relabelled A; working arrays are dropped.
  TileMatrix release(MatrixLabel result) {
    TileMatrix out = std::move(matrix(result));
    out.set_label(MatrixLabel::A);
    return out;
  }

 private:
  std::optional<TileMatrix>& slot(MatrixLabel l) { return mats_[static_cast<std::size_t>(l)]; }
  std::array<std::optional<TileMatrix>, 3> mats_;
};

inline std::string describe(const Task& task) {
  return std::string(kernel_name(task.kind)) + task_label(task).substr(kernel_family(task.kind).size()) +
         " [task " + std::to_string(task.id) + "]";
}

/// Runs one task against the workspace. Kernel errors are rethrown with the
/// task named in the message.
inline void run_task(const Task& task, Workspace& ws) {
  try {
    Tile& out = ws.tile(task.output().tile);
    auto in = [&](std::size_t q) -> const Tile& { return ws.tile(task.accesses.at(q).tile); };
    switch (task.kind) {
      case KernelKind::POTRF: potrf(out); break;
      case KernelKind::TRSM: trsm_right_lt(out, in(1)); break;
      case KernelKind::SYRK_SUB: syrk_sub(out, in(1)); break;
      case KernelKind::SYRK_ADD_T: syrk_add_t(out, in(1)); break;
      case KernelKind::GEMM: {
        const GemmShape shape = task.phase == 1   ? GemmShape::NT_Minus
                                : task.phase == 2 ? GemmShape::NN_Plus
                                                  : GemmShape::TN_Plus;
        gemm(out, in(1), in(2), shape);
        break;
      }
      case KernelKind::TRTRI: trtri(out); break;
      case KernelKind::TRMM_LEFT: trmm(out, in(1), TrmmVariant::Left); break;
      case KernelKind::TRMM_RIGHT_NEG: trmm(out, in(1), TrmmVariant::RightNeg); break;
      case KernelKind::TRMM_LEFT_T: trmm(out, in(1), TrmmVariant::LeftTrans); break;
      case KernelKind::LAUUM: lauum(out); break;
      case KernelKind::COPY: copy_tile(out, in(1)); break;
    }
  } catch (const NotPositiveDefinite& e) {
    throw NotPositiveDefinite(e.index(), describe(task));
  } catch (const SingularTile& e) {
    throw SingularTile(e.index(), describe(task));
  }
}

/// Plain in-order execution, the reference semantics of a stream.
inline TileMatrix execute_sequential(const TaskStream& stream, TileMatrix a) {
  Workspace ws(std::move(a), stream);
  for (const Task& task : stream.tasks) run_task(task, ws);
  return ws.release(stream.result);
}

/// Sequential replay in a caller-chosen order, which must be a topological
/// order of `dag`.
inline TileMatrix execute_in_order(const TaskDag& dag, TileMatrix a, std::span<const std::uint32_t> order) {
  TaskStream shape;
  shape.t = dag.t;
  shape.tasks = dag.tasks;
  Workspace ws(std::move(a), shape);
  std::vector<bool> done(dag.size(), false);
  if (order.size() != dag.size()) throw ContractError("replay order must list every task once");
  for (auto v : order) {
    if (v >= dag.size() || done[v]) throw ContractError("replay order must list every task once");
    for (auto u : dag.preds[v])
      if (!done[u]) throw ContractError("replay order is not topological");
    run_task(dag.tasks[v], ws);
    done[v] = true;
  }
  return ws.release(dag.result);
}

/// Uniformly picks among ready tasks at each step.
template <class Rng>
std::vector<std::uint32_t> random_topological_order(const TaskDag& dag, Rng& rng) {
  std::vector<std::size_t> missing(dag.size());
  std::vector<std::uint32_t> ready, order;
  for (std::uint32_t v = 0; v < dag.size(); ++v)
    if ((missing[v] = dag.preds[v].size()) == 0) ready.push_back(v);
  while (!ready.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, ready.size() - 1);
    const std::size_t at = pick(rng);
    const auto v = ready[at];
    ready[at] = ready.back();
    ready.pop_back();
    order.push_back(v);
    for (auto w : dag.succs[v])
      if (--missing[w] == 0) ready.push_back(w);
  }
  return order;
}

struct TraceRecord {
  std::uint32_t task = 0;
  std::uint32_t worker = 0;
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 0;
};

struct ExecOptions {
  std::size_t workers = 1;
  /// When set, receives one record per executed task (indexed by task id).
  std::vector<TraceRecord>* trace = nullptr;
};

/// Runs the DAG of `stream` on `opts.workers` threads. Ready tasks are
/// dispatched lowest id first. If a kernel fails, tasks with a larger id than
/// the earliest failure are not started, tasks with a smaller id still run,
/// and the failure of the earliest task in stream order is rethrown.
inline TileMatrix execute(const TaskDag& dag, TileMatrix a, const ExecOptions& opts = {}) {
  if (opts.workers == 0) throw ContractError("workers must be >= 1");
  TaskStream shape;
  shape.t = dag.t;
  shape.tasks = dag.tasks;
  Workspace ws(std::move(a), shape);

  const std::size_t n = dag.size();
  constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::size_t> missing(n);
  std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, std::greater<>> ready;
  for (std::uint32_t v = 0; v < n; ++v)
    if ((missing[v] = dag.preds[v].size()) == 0) ready.push(v);

  std::vector<std::exception_ptr> errors(n);
  if (opts.trace) opts.trace->assign(n, TraceRecord{});
  std::mutex mu;
  std::condition_variable cv;
  std::size_t running = 0;
  std::uint32_t first_error = kNone;
  const auto t0 = std::chrono::steady_clock::now();
  auto since = [&t0] {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
  };

  auto eligible = [&] { return !ready.empty() && ready.top() < first_error; };

  auto worker = [&](std::uint32_t me) {
    std::unique_lock lk(mu);
    for (;;) {
      cv.wait(lk, [&] { return eligible() || running == 0; });
      if (!eligible()) {
        // nothing runnable and nothing in flight that could release work
        cv.notify_all();
        return;
      }
      const auto v = ready.top();
      ready.pop();
      ++running;
      lk.unlock();

      const std::int64_t start = opts.trace ? since() : 0;
      std::exception_ptr err;
      try {
        run_task(dag.tasks[v], ws);
      } catch (...) {
        err = std::current_exception();
      }
      if (opts.trace) (*opts.trace)[v] = {v, me, start, since()};

      lk.lock();
      --running;
      if (err) {
        errors[v] = err;
        first_error = std::min(first_error, v);
      } else {
        for (auto w : dag.succs[v])
          if (--missing[w] == 0) ready.push(w);
      }
      cv.notify_all();
    }
  };

  {
    std::vector<std::jthread> pool;
    pool.reserve(opts.workers);
    for (std::uint32_t w = 0; w < opts.workers; ++w) pool.emplace_back(worker, w);
  }

  if (first_error != kNone) std::rethrow_exception(errors[first_error]);
  return ws.release(dag.result);
}

inline TileMatrix execute(const TaskStream& stream, TileMatrix a, const ExecOptions& opts = {}) {
  return execute(build_dag(stream), std::move(a), opts);
}

/// CSV: task,kind,indices,worker,start_ns,end_ns (indices separated by ';').
inline void write_trace_csv(std::ostream& os, const TaskDag& dag, std::span<const TraceRecord> trace) {
  os << "task,kind,indices,worker,start_ns,end_ns\n";
  for (const auto& r : trace) {
    const Task& task = dag.tasks.at(r.task);
    os << r.task << ',' << kernel_name(task.kind) << ',';
    for (std::uint8_t q = 0; q < task.arity; ++q) os << (q ? ";" : "") << task.index[q];
    os << ',' << r.worker << ',' << r.start_ns << ',' << r.end_ns << '\n';
  }
}

}  // namespace tilinv

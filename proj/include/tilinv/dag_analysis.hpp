#pragma once

// Critical paths, hazard statistics and DOT export of task DAGs, plus the
// closed-form critical-path lengths the three inversion steps are expected
// to hit under each variant.
//
// Path lengths count tasks (nodes). COPY tasks order execution but are
// weightless: they are not counted in path lengths or node counts.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tilinv/scheduler.hpp"
#include "tilinv/taskgen.hpp"

namespace tilinv {

/// Which part of the inversion a DAG covers.
enum class StepSelection : std::uint8_t { Step1, Step2, Step3, Full };

struct Variant {
  StepSelection steps = StepSelection::Full;
  Placement placement = Placement::InPlace;
  LoopOrder loops{};
  bool pipelined = true;

  std::string name() const {
    std::string s;
    switch (steps) {
      case StepSelection::Step1: s = "step1"; break;
      case StepSelection::Step2: s = "step2"; break;
      case StepSelection::Step3: s = "step3"; break;
      case StepSelection::Full: s = pipelined ? "full-pipelined" : "full-barriered"; break;
    }
    s += '/';
    s += to_string(placement);
    s += '/';
    s += loops.str();
    return s;
  }
};

inline TaskStream build_stream(const Variant& v, std::size_t t) {
  switch (v.steps) {
    case StepSelection::Step1: return gen_step1(t, v.loops.dir[0]);
    case StepSelection::Step2: return gen_step2(t, v.loops.dir[1], v.placement);
    case StepSelection::Step3: return gen_step3(t, v.loops.dir[2], v.placement);
    case StepSelection::Full: break;
  }
  VariantConfig cfg;
  cfg.placement = v.placement;
  cfg.loops = v.loops;
  cfg.pipelined = v.pipelined;
  return gen_inversion(t, cfg);
}

struct EdgeCounts {
  std::size_t raw = 0;
  std::size_t war = 0;
  std::size_t waw = 0;

  std::size_t& operator[](HazardKind k) noexcept {
    return k == HazardKind::RAW ? raw : k == HazardKind::WAR ? war : waw;
  }
  std::size_t total() const noexcept { return raw + war + waw; }
  friend bool operator==(const EdgeCounts&, const EdgeCounts&) = default;
};

struct PathReport {
  std::string variant;
  std::size_t t = 0;
  std::size_t critical_path = 0;              // kernel tasks on the longest chain
  std::size_t critical_path_with_copies = 0;  // same DAG, copies weighted 1
  std::size_t node_count = 0;                 // kernel tasks
  std::size_t copy_count = 0;
  EdgeCounts edge_counts;                     // recorded hazard edges
  std::size_t barrier_edges = 0;
  std::vector<std::uint32_t> witness;         // kernel task ids along one longest chain
};

namespace detail {

// Longest weighted chain ending at each node, ids are a topological order.
inline std::vector<std::size_t> longest_to(const TaskDag& dag, bool weigh_copies,
                                           std::vector<std::int64_t>* parent = nullptr) {
  std::vector<std::size_t> len(dag.size(), 0);
  if (parent) parent->assign(dag.size(), -1);
  for (std::uint32_t v = 0; v < dag.size(); ++v) {
    std::size_t best = 0;
    std::int64_t from = -1;
    for (auto u : dag.preds[v])
      if (from < 0 || len[u] > best) {
        best = len[u];
        from = u;
      }
    len[v] = best + (weigh_copies || !dag.tasks[v].is_copy() ? 1 : 0);
    if (parent) (*parent)[v] = from;
  }
  return len;
}

}  // namespace detail

inline PathReport critical_path(const TaskDag& dag) {
  PathReport r;
  r.t = dag.t;
  for (const auto& task : dag.tasks) (task.is_copy() ? r.copy_count : r.node_count)++;
  for (const auto& e : dag.hazards) r.edge_counts[e.kind]++;
  r.barrier_edges = dag.barrier_edges.size();
  if (dag.size() == 0) return r;

  std::vector<std::int64_t> parent;
  const auto len = detail::longest_to(dag, false, &parent);
  const auto end = static_cast<std::uint32_t>(std::max_element(len.begin(), len.end()) - len.begin());
  r.critical_path = len[end];
  for (std::int64_t v = end; v >= 0; v = parent[static_cast<std::size_t>(v)])
    if (!dag.tasks[static_cast<std::size_t>(v)].is_copy()) r.witness.push_back(static_cast<std::uint32_t>(v));
  std::reverse(r.witness.begin(), r.witness.end());

  const auto all = detail::longest_to(dag, true);
  r.critical_path_with_copies = *std::max_element(all.begin(), all.end());
  return r;
}

inline PathReport analyze(const Variant& v, std::size_t t) {
  PathReport r = critical_path(build_dag(build_stream(v, t)));
  r.variant = v.name();
  return r;
}

// --- hazard census -------------------------------------------------------------

struct HazardCensus {
  EdgeCounts intra_step;  // both ends are kernels of the same step
  EdgeCounts cross_step;  // kernels of different steps
  EdgeCounts copy;        // at least one end is a COPY

  EdgeCounts kernel_only() const noexcept {
    return {intra_step.raw + cross_step.raw, intra_step.war + cross_step.war,
            intra_step.waw + cross_step.waw};
  }
};

inline HazardCensus hazard_census(const TaskDag& dag) {
  HazardCensus c;
  for (const auto& e : dag.hazards) {
    const Task& a = dag.tasks[e.from];
    const Task& b = dag.tasks[e.to];
    if (a.is_copy() || b.is_copy())
      c.copy[e.kind]++;
    else if (a.phase == b.phase)
      c.intra_step[e.kind]++;
    else
      c.cross_step[e.kind]++;
  }
  return c;
}

/// True when the DAG has a hazard edge from -> to of the given kind.
inline bool has_hazard(const TaskDag& dag, std::uint32_t from, std::uint32_t to, HazardKind kind) {
  return std::any_of(dag.hazards.begin(), dag.hazards.end(),
                     [&](const DagEdge& e) { return e.from == from && e.to == to && e.kind == kind; });
}

/// First task with the given kind and indices, if any.
inline std::optional<std::uint32_t> find_task(const TaskDag& dag, KernelKind kind,
                                              std::initializer_list<std::uint32_t> idx) {
  for (const auto& task : dag.tasks) {
    if (task.kind != kind || task.arity != idx.size()) continue;
    if (std::equal(idx.begin(), idx.end(), task.index.begin())) return task.id;
  }
  return std::nullopt;
}

/// Weakly-connected components among kernel tasks; paths through COPY tasks
/// connect their endpoints.
inline std::size_t kernel_components(const TaskDag& dag) {
  std::vector<std::uint32_t> parent(dag.size());
  std::iota(parent.begin(), parent.end(), 0U);
  std::function<std::uint32_t(std::uint32_t)> find = [&](std::uint32_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  for (std::uint32_t v = 0; v < dag.size(); ++v)
    for (auto u : dag.preds[v]) parent[find(u)] = find(v);
  std::vector<bool> root_has_kernel(dag.size(), false);
  for (std::uint32_t v = 0; v < dag.size(); ++v)
    if (!dag.tasks[v].is_copy()) root_has_kernel[find(v)] = true;
  return static_cast<std::size_t>(std::count(root_has_kernel.begin(), root_has_kernel.end(), true));
}

// --- closed forms ----------------------------------------------------------------

struct Formula {
  std::string text;
  long value = 0;
};

/// Expected critical path for the variant, when a closed form is known:
/// Step 1 (U) 3t-2; Step 2 (D) 3t-3 in place, 2t-1 out of place; Step 2 (U)
/// t^2-2t+3 in place, t^2/2-t/2+2 out of place; Step 3 (U) 3t-2 in place,
/// t out of place; whole inversion under UDU 9t-7 / 9t-9 in place and
/// 6t-3 / 5t-2 out of place (barriered / pipelined).
inline std::optional<Formula> expected_critical_path(const Variant& v, std::size_t tt) {
  const long t = static_cast<long>(tt);
  const bool in = v.placement == Placement::InPlace;
  const auto up = [&](std::size_t s) { return v.loops.dir[s] == LoopDirection::Up; };
  switch (v.steps) {
    case StepSelection::Step1:
      if (up(0)) return Formula{"3t-2", 3 * t - 2};
      return std::nullopt;
    case StepSelection::Step2:
      if (!up(1)) return in ? Formula{"3t-3", 3 * t - 3} : Formula{"2t-1", 2 * t - 1};
      return in ? Formula{"t^2-2t+3", t * t - 2 * t + 3} : Formula{"t^2/2-t/2+2", (t * t - t) / 2 + 2};
    case StepSelection::Step3:
      if (!in) return Formula{"t", t};
      if (up(2)) return Formula{"3t-2", 3 * t - 2};
      return std::nullopt;
    case StepSelection::Full:
      if (v.loops != LoopOrder::parse("UDU")) return std::nullopt;
      if (in) return v.pipelined ? Formula{"9t-9", 9 * t - 9} : Formula{"9t-7", 9 * t - 7};
      return v.pipelined ? Formula{"5t-2", 5 * t - 2} : Formula{"6t-3", 6 * t - 3};
  }
  return std::nullopt;
}

struct FormulaRow {
  std::string variant;
  std::size_t t = 0;
  std::size_t measured = 0;
  std::size_t measured_with_copies = 0;
  std::optional<Formula> formula;
  /// Unset when there is no formula or t < 2 (closed forms hold from t = 2).
  std::optional<bool> match;
};

inline std::vector<FormulaRow> formula_table(std::size_t t_from, std::size_t t_to,
                                             const std::vector<Variant>& variants) {
  std::vector<FormulaRow> rows;
  for (const auto& v : variants)
    for (std::size_t t = t_from; t <= t_to; ++t) {
      const PathReport rep = analyze(v, t);
      FormulaRow row{v.name(), t, rep.critical_path, rep.critical_path_with_copies,
                     expected_critical_path(v, t), std::nullopt};
      if (row.formula && t >= 2) row.match = static_cast<long>(row.measured) == row.formula->value;
      rows.push_back(std::move(row));
    }
  return rows;
}

/// The six per-step entries (step x placement) under `loops`.
inline std::vector<Variant> per_step_variants(LoopOrder loops) {
  std::vector<Variant> out;
  out.push_back({StepSelection::Step1, Placement::InPlace, loops, true});
  for (auto p : {Placement::InPlace, Placement::OutOfPlace}) out.push_back({StepSelection::Step2, p, loops, true});
  for (auto p : {Placement::InPlace, Placement::OutOfPlace}) out.push_back({StepSelection::Step3, p, loops, true});
  return out;
}

/// Whole inversion, both placements, pipelined and barriered.
inline std::vector<Variant> full_variants(LoopOrder loops) {
  std::vector<Variant> out;
  for (auto p : {Placement::InPlace, Placement::OutOfPlace})
    for (bool pipe : {false, true}) out.push_back({StepSelection::Full, p, loops, pipe});
  return out;
}

inline bool all_match(const std::vector<FormulaRow>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const FormulaRow& r) { return r.match.value_or(true); });
}

inline void write_formula_csv(std::ostream& os, const std::vector<FormulaRow>& rows) {
  os << "variant,t,measured,formula,match\n";
  for (const auto& r : rows) {
    os << r.variant << ',' << r.t << ',' << r.measured << ',' << (r.formula ? r.formula->text : "-") << ','
       << (r.match ? (*r.match ? "yes" : "no") : "n/a") << '\n';
  }
}

/// Per-step critical path of every loop order at one t. result[step][order]
/// with orders as in LoopOrder::all().
struct LoopSweep {
  std::size_t t = 0;
  Placement placement = Placement::InPlace;
  std::array<std::array<std::size_t, 8>, 3> measured{};

  std::size_t minimum(std::size_t step) const {
    return *std::min_element(measured[step].begin(), measured[step].end());
  }
  std::size_t of(std::size_t step, const LoopOrder& o) const {
    const auto all = LoopOrder::all();
    return measured[step][static_cast<std::size_t>(std::find(all.begin(), all.end(), o) - all.begin())];
  }
};

inline LoopSweep sweep_loop_orders(std::size_t t, Placement placement) {
  LoopSweep sw{t, placement, {}};
  const auto orders = LoopOrder::all();
  const StepSelection steps[3] = {StepSelection::Step1, StepSelection::Step2, StepSelection::Step3};
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t o = 0; o < orders.size(); ++o)
      sw.measured[s][o] = analyze({steps[s], placement, orders[o], true}, t).critical_path;
  return sw;
}

// --- DOT ---------------------------------------------------------------------------

struct DotOptions {
  bool show_copies = false;
  bool show_barriers = false;
  std::string name = "tasks";
};

/// Graphviz digraph. Nodes are labelled KIND(i,j[,k]); RAW edges solid,
/// WAR dashed red, WAW dotted blue, barrier edges grey. With copies hidden,
/// a path through COPY nodes is drawn as one dotted grey edge.
inline std::string export_dot(const TaskDag& dag, const DotOptions& opt = {}) {
  std::ostringstream os;
  os << "digraph " << opt.name << " {\n  node [shape=box, fontname=\"Helvetica\"];\n";
  auto visible = [&](std::uint32_t v) { return opt.show_copies || !dag.tasks[v].is_copy(); };
  for (const auto& task : dag.tasks)
    if (visible(task.id))
      os << "  t" << task.id << " [label=\"" << task_label(task) << "\"];\n";

  // one style per ordered pair, the first recorded hazard wins
  std::map<std::pair<std::uint32_t, std::uint32_t>, HazardKind> kinds;
  for (const auto& e : dag.hazards) kinds.emplace(std::pair{e.from, e.to}, e.kind);
  auto style = [](HazardKind k) -> std::string_view {
    switch (k) {
      case HazardKind::RAW: return "";
      case HazardKind::WAR: return " [style=dashed, color=red]";
      case HazardKind::WAW: return " [style=dotted, color=blue]";
    }
    return "";
  };

  std::vector<std::pair<std::uint32_t, std::uint32_t>> through_copy;
  for (std::uint32_t v = 0; v < dag.size(); ++v) {
    if (!visible(v)) continue;
    for (auto u : dag.preds[v]) {
      auto it = kinds.find({u, v});
      if (visible(u)) {
        if (it != kinds.end())
          os << "  t" << u << " -> t" << v << style(it->second) << ";\n";
        else if (opt.show_barriers)
          os << "  t" << u << " -> t" << v << " [color=gray];\n";
        continue;
      }
      // u is a hidden copy: connect v to the visible ancestors reached through copies
      std::vector<std::uint32_t> stack{u};
      std::vector<bool> seen(dag.size(), false);
      while (!stack.empty()) {
        auto x = stack.back();
        stack.pop_back();
        for (auto y : dag.preds[x]) {
          if (seen[y]) continue;
          seen[y] = true;
          if (visible(y))
            through_copy.emplace_back(y, v);
          else
            stack.push_back(y);
        }
      }
    }
  }
  std::sort(through_copy.begin(), through_copy.end());
  through_copy.erase(std::unique(through_copy.begin(), through_copy.end()), through_copy.end());
  for (auto [u, v] : through_copy) os << "  t" << u << " -> t" << v << " [style=dotted, color=gray];\n";
  os << "}\n";
  return os.str();
}

}  // namespace tilinv

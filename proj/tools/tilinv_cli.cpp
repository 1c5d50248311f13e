// tilinv: invert SPD matrices with the tile algorithm, benchmark variants and
// inspect task DAGs.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tilinv/tilinv.hpp"

namespace ti = tilinv;

namespace {

enum Exit : int { Ok = 0, Mismatch = 1, Validation = 2, Numerical = 3, Io = 4 };

struct Common {
  std::size_t n = 0;
  std::size_t b = 200;
  std::size_t t = 0;
  std::uint64_t seed = 1;
  std::string placement = "in";
  std::string loops = "UDU";
  bool no_pipeline = false;
  std::vector<std::size_t> workers{1};
  std::string input;
  std::string out;
  std::string trace;
};

void add_variant_flags(CLI::App* cmd, Common& c, bool placement_both) {
  cmd->add_option("--placement", c.placement, "in or out (array renaming)")
      ->check(CLI::IsMember(placement_both ? std::vector<std::string>{"in", "out", "both"}
                                           : std::vector<std::string>{"in", "out"}));
  cmd->add_option("--loops", c.loops, "loop directions for steps 1-3, e.g. UDU");
  cmd->add_flag("--no-pipeline", c.no_pipeline, "barrier between steps");
}

void add_size_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--n", c.n, "matrix order");
  cmd->add_option("--b", c.b, "tile order")->check(CLI::PositiveNumber);
  cmd->add_option("--t", c.t, "tiles per side; n = b*t");
  cmd->add_option("--seed", c.seed, "generator seed");
}

ti::Placement placement_of(const std::string& s) {
  return s == "out" ? ti::Placement::OutOfPlace : ti::Placement::InPlace;
}

ti::VariantConfig config_of(const Common& c, ti::Placement p, bool pipelined, std::size_t workers) {
  ti::VariantConfig cfg;
  cfg.placement = p;
  cfg.loops = ti::LoopOrder::parse(c.loops);
  cfg.pipelined = pipelined;
  cfg.workers = workers;
  cfg.validate();
  return cfg;
}

std::size_t order_of(const Common& c) {
  if (c.t && c.n && c.n != c.b * c.t)
    throw ti::InvalidSize("--n " + std::to_string(c.n) + " disagrees with --b * --t");
  const std::size_t n = c.t ? c.b * c.t : c.n;
  if (n == 0) throw ti::InvalidSize("give --n or --t");
  if (n % c.b) throw ti::InvalidSize("n = " + std::to_string(n) + " is not divisible by b = " + std::to_string(c.b));
  return n;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ti::IoError("cannot write " + path);
  return f;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double gflops(std::size_t n, double s) {
  const double nn = static_cast<double>(n);
  return s > 0 ? nn * nn * nn / (s * 1e9) : 0.0;
}

// --- invert ------------------------------------------------------------------

int cmd_invert(const Common& c) {
  if (c.workers.size() != 1) throw ti::ContractError("invert takes a single --workers value");
  ti::DenseMatrix a;
  if (!c.input.empty()) {
    a = ti::read_csv_file(c.input);
    if (a.rows() != a.cols()) throw ti::InvalidSize("input matrix is not square");
    if (c.n && c.n != a.rows()) throw ti::InvalidSize("--n disagrees with the input matrix");
    if (a.rows() % c.b)
      throw ti::InvalidSize("n = " + std::to_string(a.rows()) + " is not divisible by b = " + std::to_string(c.b));
  } else {
    a = ti::generate_spd(order_of(c), c.seed);
  }
  const std::size_t n = a.rows();
  const ti::VariantConfig cfg = config_of(c, placement_of(c.placement), !c.no_pipeline, c.workers.front());

  std::vector<ti::TraceRecord> trace;
  ti::TileMatrix tiles = ti::from_dense(a, c.b);
  const auto t0 = std::chrono::steady_clock::now();
  ti::TileMatrix result = ti::invert(std::move(tiles), cfg, c.trace.empty() ? nullptr : &trace);
  const double elapsed = seconds_since(t0);

  ti::DenseMatrix inv = ti::to_dense(result);
  ti::symmetrize_lower(inv);
  const double residual = ti::inverse_residual(a, inv);
  const double tol = 1e-9 * static_cast<double>(n);

  std::cout << "n=" << n << " b=" << c.b << " t=" << n / c.b << " placement=" << ti::to_string(cfg.placement)
            << " loops=" << cfg.loops.str() << " pipelined=" << (cfg.pipelined ? "yes" : "no")
            << " workers=" << cfg.workers << '\n'
            << std::setprecision(3) << "residual=" << residual << " tolerance=" << tol << '\n'
            << std::fixed << std::setprecision(6) << "time_s=" << elapsed << '\n'
            << std::setprecision(3) << "gflops=" << gflops(n, elapsed) << '\n';

  if (!c.out.empty()) ti::write_csv_file(c.out, inv);
  if (!c.trace.empty()) {
    auto f = open_out(c.trace);
    const ti::TaskDag dag = ti::build_dag(ti::gen_inversion(n / c.b, cfg));
    ti::write_trace_csv(f, dag, trace);
  }
  if (!(residual <= tol)) {
    std::cerr << "error: residual exceeds tolerance\n";
    return Numerical;
  }
  return Ok;
}

// --- bench -------------------------------------------------------------------

struct BenchOptions {
  std::vector<std::size_t> sizes;
  bool compare_pipeline = false;
  int reps = 3;
};

int cmd_bench(const Common& c, const BenchOptions& bo) {
  std::vector<std::size_t> sizes = bo.sizes;
  if (sizes.empty()) sizes.push_back(order_of(c));
  std::vector<ti::Placement> placements;
  if (c.placement != "out") placements.push_back(ti::Placement::InPlace);
  if (c.placement != "in") placements.push_back(ti::Placement::OutOfPlace);
  std::vector<bool> pipes;
  if (bo.compare_pipeline) pipes = {true, false};
  else pipes = {!c.no_pipeline};
  for (auto n : sizes)
    if (n == 0 || n % c.b) throw ti::InvalidSize("n = " + std::to_string(n) + " is not divisible by b = " + std::to_string(c.b));
  for (auto w : c.workers)
    if (w == 0) throw ti::ContractError("workers must be >= 1");

  std::optional<std::ofstream> file;
  if (!c.out.empty()) file = open_out(c.out);
  const std::string header = "variant,n,b,workers,loops,pipelined,time_s,gflops";
  std::cout << header << '\n';
  if (file) *file << header << '\n';

  for (auto n : sizes) {
    const ti::DenseMatrix a = ti::generate_spd(n, c.seed);
    const ti::TileMatrix tiles = ti::from_dense(a, c.b);
    for (auto p : placements)
      for (bool pipe : pipes)
        for (auto w : c.workers) {
          const ti::VariantConfig cfg = config_of(c, p, pipe, w);
          const ti::TaskStream stream = ti::gen_inversion(n / c.b, cfg);
          const ti::TaskDag dag = ti::build_dag(stream);
          const ti::ExecOptions opts{w, nullptr};
          (void)ti::execute(dag, tiles, opts);  // warm-up
          std::vector<double> times;
          for (int r = 0; r < bo.reps; ++r) {
            ti::TileMatrix copy = tiles;
            const auto t0 = std::chrono::steady_clock::now();
            (void)ti::execute(dag, std::move(copy), opts);
            times.push_back(seconds_since(t0));
          }
          std::sort(times.begin(), times.end());
          const double med = times[times.size() / 2];
          std::ostringstream row;
          row << ti::to_string(p) << ',' << n << ',' << c.b << ',' << w << ',' << cfg.loops.str() << ','
              << (pipe ? "yes" : "no") << ',' << std::fixed << std::setprecision(6) << med << ','
              << std::setprecision(3) << gflops(n, med);
          std::cout << row.str() << std::endl;
          if (file) *file << row.str() << '\n';
        }
  }
  return Ok;
}

// --- dag ---------------------------------------------------------------------

struct DagOptions {
  std::string step = "full";
  std::string tasks;
  bool show_copies = false;
  bool show_barriers = false;
};

ti::StepSelection step_of(const std::string& s) {
  if (s == "1") return ti::StepSelection::Step1;
  if (s == "2") return ti::StepSelection::Step2;
  if (s == "3") return ti::StepSelection::Step3;
  return ti::StepSelection::Full;
}

void print_report(std::ostream& os, const ti::PathReport& r, const std::optional<ti::Formula>& f) {
  os << "variant=" << r.variant << " t=" << r.t << '\n'
     << "critical_path=" << r.critical_path << '\n'
     << "critical_path_with_copies=" << r.critical_path_with_copies << '\n'
     << "tasks=" << r.node_count << " copies=" << r.copy_count << '\n'
     << "edges RAW=" << r.edge_counts.raw << " WAR=" << r.edge_counts.war << " WAW=" << r.edge_counts.waw
     << " barrier=" << r.barrier_edges << '\n';
  if (f) {
    os << "formula=" << f->text << " expected=" << f->value;
    if (r.t >= 2) os << " match=" << (static_cast<long>(r.critical_path) == f->value ? "yes" : "no");
    os << '\n';
  }
}

int cmd_dag(const Common& c, const DagOptions& d) {
  if (c.t == 0) throw ti::InvalidSize("dag needs --t >= 1");
  ti::Variant v{step_of(d.step), placement_of(c.placement), ti::LoopOrder::parse(c.loops), !c.no_pipeline};
  const ti::TaskStream stream = ti::build_stream(v, c.t);
  const ti::TaskDag dag = ti::build_dag(stream);
  ti::PathReport r = ti::critical_path(dag);
  r.variant = v.name();
  print_report(std::cout, r, ti::expected_critical_path(v, c.t));

  std::cout << "path=";
  for (std::size_t q = 0; q < r.witness.size(); ++q) {
    const auto& task = dag.tasks[r.witness[q]];
    std::cout << (q ? " " : "") << ti::kernel_name(task.kind) << ti::task_label(task).substr(ti::kernel_family(task.kind).size());
  }
  std::cout << '\n';

  if (!c.out.empty()) {
    auto f = open_out(c.out);
    f << ti::export_dot(dag, {d.show_copies, d.show_barriers, "tasks"});
  }
  if (d.tasks == "-") {
    ti::write_text(std::cout, stream);
  } else if (!d.tasks.empty()) {
    auto f = open_out(d.tasks);
    ti::write_text(f, stream);
  }
  return Ok;
}

// --- table -------------------------------------------------------------------

struct TableOptions {
  std::size_t t_from = 2;
  std::size_t t_to = 8;
  bool full = false;
  bool sweep = false;
};

int cmd_table(const Common& c, const TableOptions& o) {
  if (o.t_from < 2 || o.t_to > 12 || o.t_from > o.t_to) throw ti::ContractError("t range must lie within 2..12");
  std::optional<std::ofstream> file;
  if (!c.out.empty()) file = open_out(c.out);
  std::ostream& os = file ? static_cast<std::ostream&>(*file) : std::cout;

  if (o.sweep) {
    const auto orders = ti::LoopOrder::all();
    os << "placement,step,t";
    for (const auto& ord : orders) os << ',' << ord.str();
    os << ",min,argmin\n";
    for (auto p : {ti::Placement::InPlace, ti::Placement::OutOfPlace})
      for (std::size_t t = o.t_from; t <= o.t_to; ++t) {
        const ti::LoopSweep sw = ti::sweep_loop_orders(t, p);
        for (std::size_t s = 0; s < 3; ++s) {
          os << ti::to_string(p) << ",step" << s + 1 << ',' << t;
          for (auto m : sw.measured[s]) os << ',' << m;
          os << ',' << sw.minimum(s) << ',';
          bool first = true;
          for (std::size_t k = 0; k < orders.size(); ++k)
            if (sw.measured[s][k] == sw.minimum(s)) {
              os << (first ? "" : ";") << orders[k].str();
              first = false;
            }
          os << '\n';
        }
      }
    return Ok;
  }

  const ti::LoopOrder loops = ti::LoopOrder::parse(c.loops);
  std::vector<ti::Variant> variants = ti::per_step_variants(loops);
  if (o.full) {
    const auto more = ti::full_variants(loops);
    variants.insert(variants.end(), more.begin(), more.end());
  }
  const auto rows = ti::formula_table(o.t_from, o.t_to, variants);
  ti::write_formula_csv(os, rows);
  if (!ti::all_match(rows)) {
    for (const auto& r : rows)
      if (r.match == false)
        std::cerr << "mismatch: " << r.variant << " t=" << r.t << " measured " << r.measured << ", "
                  << r.formula->text << " = " << r.formula->value << '\n';
    return Mismatch;
  }
  return Ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tile inversion of SPD matrices on a dynamic task scheduler"};
  app.require_subcommand(1);
  Common c;
  BenchOptions bo;
  DagOptions dopt;
  TableOptions topt;

  auto* inv = app.add_subcommand("invert", "invert a generated or given SPD matrix and check the residual");
  add_size_flags(inv, c);
  add_variant_flags(inv, c, false);
  inv->add_option("--workers", c.workers, "worker threads")->expected(1);
  inv->add_option("--input", c.input, "dense CSV input instead of a generated matrix");
  inv->add_option("--out", c.out, "write the inverse as dense CSV");
  inv->add_option("--trace", c.trace, "write a per-task execution trace CSV");

  auto* bench = app.add_subcommand("bench", "time variants; median of 3 after a warm-up run");
  add_size_flags(bench, c);
  add_variant_flags(bench, c, true);
  bench->add_option("--workers", c.workers, "worker counts")->delimiter(',');
  bench->add_option("--sizes", bo.sizes, "matrix orders (overrides --n/--t)")->delimiter(',');
  bench->add_flag("--compare-pipeline", bo.compare_pipeline, "run pipelined and barriered");
  bench->add_option("--reps", bo.reps, "timed repetitions")->check(CLI::PositiveNumber);
  bench->add_option("--out", c.out, "also write the CSV rows here");

  auto* dag = app.add_subcommand("dag", "critical path report and DOT export");
  dag->add_option("--t", c.t, "tiles per side")->required();
  add_variant_flags(dag, c, false);
  dag->add_option("--step", dopt.step, "1, 2, 3 or full")->check(CLI::IsMember({"1", "2", "3", "full"}));
  dag->add_option("--out", c.out, "DOT output file");
  dag->add_option("--tasks", dopt.tasks, "task stream text output ('-' for stdout)");
  dag->add_flag("--show-copies", dopt.show_copies, "draw COPY tasks");
  dag->add_flag("--show-barriers", dopt.show_barriers, "draw barrier edges");

  auto* table = app.add_subcommand("table", "measured critical paths against the closed forms");
  table->add_option("--t-from", topt.t_from, "smallest t (>= 2)");
  table->add_option("--t-to", topt.t_to, "largest t (<= 12)");
  table->add_option("--loops", c.loops, "loop directions");
  table->add_flag("--full", topt.full, "add whole-inversion rows");
  table->add_flag("--sweep", topt.sweep, "critical path of every loop order");
  table->add_option("--out", c.out, "CSV output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return Validation;
  }

  try {
    if (*inv) return cmd_invert(c);
    if (*bench) return cmd_bench(c, bo);
    if (*dag) return cmd_dag(c, dopt);
    if (*table) return cmd_table(c, topt);
  } catch (const ti::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return Io;
  } catch (const ti::NotPositiveDefinite& e) {
    std::cerr << "error: " << e.what() << '\n';
    return Numerical;
  } catch (const ti::SingularTile& e) {
    std::cerr << "error: " << e.what() << '\n';
    return Numerical;
  } catch (const ti::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return Validation;
  }
  return Validation;
}

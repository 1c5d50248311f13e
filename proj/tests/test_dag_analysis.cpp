#include <gtest/gtest.h>

#include <regex>
#include <sstream>

#include "tilinv/dag_analysis.hpp"

using namespace tilinv;

namespace {

Variant step(StepSelection s, Placement p, std::string_view loops = "UDU") {
  return {s, p, LoopOrder::parse(loops), true};
}

Variant full(Placement p, bool pipelined, std::string_view loops = "UDU") {
  return {StepSelection::Full, p, LoopOrder::parse(loops), pipelined};
}

std::size_t cp(const Variant& v, std::size_t t) { return analyze(v, t).critical_path; }

std::size_t count_matches(const std::string& s, const std::regex& re) {
  return static_cast<std::size_t>(std::distance(std::sregex_iterator(s.begin(), s.end(), re), std::sregex_iterator()));
}

}  // namespace

TEST(CriticalPath, SingleTile) {
  const PathReport r = analyze(full(Placement::InPlace, true), 1);
  EXPECT_EQ(r.critical_path, 3U);
  EXPECT_EQ(r.node_count, 3U);
  EXPECT_EQ(r.witness, (std::vector<std::uint32_t>{0, 1, 2}));
}

TEST(CriticalPath, PerStepExamples) {
  EXPECT_EQ(cp(step(StepSelection::Step1, Placement::InPlace), 4), 10U);
  EXPECT_EQ(cp(step(StepSelection::Step2, Placement::InPlace), 4), 9U);
  EXPECT_EQ(cp(step(StepSelection::Step2, Placement::OutOfPlace), 4), 7U);
  EXPECT_EQ(cp(step(StepSelection::Step3, Placement::InPlace), 4), 10U);
  EXPECT_EQ(cp(step(StepSelection::Step3, Placement::OutOfPlace), 4), 4U);
}

TEST(CriticalPath, StepTwoForwardLoop) {
  EXPECT_EQ(cp(step(StepSelection::Step2, Placement::InPlace, "UUU"), 4), 11U);
  EXPECT_EQ(cp(step(StepSelection::Step2, Placement::OutOfPlace, "UUU"), 4), 8U);
}

// Witness is a chain of kernel tasks whose length is the critical path.
TEST(CriticalPath, WitnessIsAChain) {
  for (std::size_t t = 2; t <= 6; ++t)
    for (const auto& v : full_variants(LoopOrder{})) {
      const TaskStream s = build_stream(v, t);
      const TaskDag dag = build_dag(s);
      const PathReport r = critical_path(dag);
      ASSERT_EQ(r.witness.size(), r.critical_path);
      for (std::size_t q = 1; q < r.witness.size(); ++q) EXPECT_LT(r.witness[q - 1], r.witness[q]);
      for (auto v2 : r.witness) EXPECT_FALSE(dag.tasks[v2].is_copy());
      EXPECT_GE(r.critical_path_with_copies, r.critical_path);
    }
}

TEST(CriticalPath, CopiesCountedSeparately) {
  const PathReport r = analyze(full(Placement::OutOfPlace, true), 4);
  EXPECT_EQ(r.node_count, 60U);
  EXPECT_EQ(r.copy_count, 20U);
  EXPECT_GT(r.critical_path_with_copies, r.critical_path);
  const PathReport in = analyze(full(Placement::InPlace, true), 4);
  EXPECT_EQ(in.copy_count, 0U);
  EXPECT_EQ(in.critical_path_with_copies, in.critical_path);
}

// Per-step closed forms under UDU for t = 2..8.
TEST(Formulas, PerStepTableUDU) {
  const auto rows = formula_table(2, 8, per_step_variants(LoopOrder{}));
  EXPECT_EQ(rows.size(), 5U * 7U);
  for (const auto& r : rows) {
    ASSERT_TRUE(r.formula) << r.variant;
    EXPECT_EQ(static_cast<long>(r.measured), r.formula->value) << r.variant << " t=" << r.t;
  }
  EXPECT_TRUE(all_match(rows));
}

TEST(Formulas, StepTwoForwardLoopPenalty) {
  for (std::size_t t = 2; t <= 8; ++t) {
    const long tt = static_cast<long>(t);
    EXPECT_EQ(static_cast<long>(cp(step(StepSelection::Step2, Placement::InPlace, "UUU"), t)), tt * tt - 2 * tt + 3);
    EXPECT_EQ(static_cast<long>(cp(step(StepSelection::Step2, Placement::OutOfPlace, "UUU"), t)),
              (tt * tt - tt) / 2 + 2);
  }
}

TEST(Formulas, WholeInversion) {
  for (std::size_t t = 2; t <= 8; ++t) {
    EXPECT_EQ(cp(full(Placement::InPlace, false), t), 9 * t - 7) << t;
    EXPECT_EQ(cp(full(Placement::OutOfPlace, false), t), 6 * t - 3) << t;
    EXPECT_EQ(cp(full(Placement::OutOfPlace, true), t), 5 * t - 2) << t;
  }
}

// Formulas are not asserted at t = 1.
TEST(Formulas, SingleTileRowsUnasserted) {
  const auto rows = formula_table(1, 1, per_step_variants(LoopOrder{}));
  for (const auto& r : rows) EXPECT_FALSE(r.match.has_value());
  EXPECT_TRUE(all_match(rows));
}

TEST(Formulas, CsvLayout) {
  const auto rows = formula_table(2, 2, {step(StepSelection::Step3, Placement::OutOfPlace)});
  std::ostringstream os;
  write_formula_csv(os, rows);
  EXPECT_EQ(os.str(), "variant,t,measured,formula,match\nstep3/out-of-place/UDU,2,2,t,yes\n");
  const auto none = formula_table(2, 2, {step(StepSelection::Step1, Placement::InPlace, "DUU")});
  std::ostringstream os2;
  write_formula_csv(os2, none);
  EXPECT_NE(os2.str().find(",-,n/a"), std::string::npos);
}

// Property: barriers concatenate the per-step chains; pipelining never hurts.
TEST(Properties, BarrieredIsSumPipelinedIsNotLonger) {
  for (std::size_t t = 1; t <= 7; ++t)
    for (auto p : {Placement::InPlace, Placement::OutOfPlace})
      for (const auto& o : LoopOrder::all()) {
        const std::size_t sum = cp({StepSelection::Step1, p, o, true}, t) + cp({StepSelection::Step2, p, o, true}, t) +
                                cp({StepSelection::Step3, p, o, true}, t);
        const std::size_t barriered = cp({StepSelection::Full, p, o, false}, t);
        const std::size_t pipelined = cp({StepSelection::Full, p, o, true}, t);
        EXPECT_EQ(barriered, sum) << t << " " << o.str();
        EXPECT_LE(pipelined, barriered) << t << " " << o.str();
      }
}

TEST(LoopSweep, UduAttainsMinimaAtSix) {
  for (auto p : {Placement::InPlace, Placement::OutOfPlace}) {
    const LoopSweep sw = sweep_loop_orders(6, p);
    for (std::size_t s = 0; s < 3; ++s) EXPECT_EQ(sw.of(s, LoopOrder{}), sw.minimum(s)) << s;
  }
  const LoopSweep in = sweep_loop_orders(6, Placement::InPlace);
  EXPECT_EQ(in.of(1, LoopOrder::parse("UUU")), 27U);
  EXPECT_EQ(in.of(1, LoopOrder::parse("UDU")), 15U);
}

TEST(Census, OutOfPlaceRemovesKernelWar) {
  for (std::size_t t = 1; t <= 8; ++t)
    for (auto s : {StepSelection::Step2, StepSelection::Step3})
      for (const auto& o : LoopOrder::all()) {
        const HazardCensus c = hazard_census(build_dag(build_stream({s, Placement::OutOfPlace, o, true}, t)));
        EXPECT_EQ(c.kernel_only().war, 0U) << t << " " << o.str();
      }
}

TEST(Census, InPlaceHasWar) {
  const TaskDag dag = build_dag(build_stream(step(StepSelection::Step3, Placement::InPlace), 2));
  const HazardCensus c = hazard_census(dag);
  EXPECT_EQ(c.kernel_only().war, 2U);  // A(1,0) before TRMM, A(1,1) before LAUUM(1)
  EXPECT_EQ(c.copy.total(), 0U);
  EXPECT_TRUE(has_hazard(dag, *find_task(dag, KernelKind::SYRK_ADD_T, {0, 1}),
                         *find_task(dag, KernelKind::TRMM_LEFT_T, {1, 0}), HazardKind::WAR));
}

TEST(Census, CrossStepEdgesOnlyWhenMerged) {
  const TaskDag dag = build_dag(build_stream(full(Placement::InPlace, true), 3));
  const HazardCensus c = hazard_census(dag);
  EXPECT_GT(c.cross_step.total(), 0U);
  EXPECT_GT(c.intra_step.total(), 0U);
  const PathReport r = critical_path(dag);
  EdgeCounts sum = c.kernel_only();
  sum.raw += c.copy.raw;
  sum.war += c.copy.war;
  sum.waw += c.copy.waw;
  EXPECT_EQ(sum, r.edge_counts);
}

TEST(Dot, SingleTilePipeline) {
  const std::string dot = export_dot(build_dag(gen_inversion(1, {})));
  EXPECT_EQ(dot.rfind("digraph tasks {", 0), 0U);
  EXPECT_EQ(count_matches(dot, std::regex(R"(t\d+ \[label)")), 3U);
  EXPECT_EQ(count_matches(dot, std::regex(R"(t\d+ -> t\d+)")), 2U);
  EXPECT_NE(dot.find("label=\"POTRF(0)\""), std::string::npos);
  EXPECT_EQ(dot.back(), '\n');
}

TEST(Dot, StepThreeInPlaceConnected) {
  const TaskDag dag = build_dag(build_stream(step(StepSelection::Step3, Placement::InPlace), 4));
  const std::string dot = export_dot(dag);
  EXPECT_EQ(count_matches(dot, std::regex(R"(t\d+ \[label)")), 20U);
  EXPECT_EQ(count_matches(dot, std::regex(R"(label="TRMM\()")), 6U);
  EXPECT_EQ(count_matches(dot, std::regex(R"(label="LAUUM\()")), 4U);
  EXPECT_EQ(count_matches(dot, std::regex(R"(label="GEMM\()")), 4U);
  EXPECT_EQ(count_matches(dot, std::regex(R"(label="SYRK\()")), 6U);
  EXPECT_NE(dot.find("style=dashed, color=red"), std::string::npos);
  EXPECT_EQ(kernel_components(dag), 1U);
}

TEST(Dot, StepThreeOutOfPlaceSplits) {
  const TaskDag dag = build_dag(build_stream(step(StepSelection::Step3, Placement::OutOfPlace), 4));
  const std::string dot = export_dot(dag);
  EXPECT_EQ(count_matches(dot, std::regex(R"(t\d+ \[label)")), 20U);
  EXPECT_EQ(dot.find("color=red"), std::string::npos);
  EXPECT_GT(kernel_components(dag), 1U);
  EXPECT_EQ(kernel_components(dag), 10U);
  const std::string with = export_dot(dag, {true, false, "s3"});
  EXPECT_EQ(count_matches(with, std::regex(R"(t\d+ \[label)")), 30U);
  EXPECT_EQ(with.rfind("digraph s3 {", 0), 0U);
}

TEST(Dot, Deterministic) {
  const TaskDag dag = build_dag(build_stream(full(Placement::OutOfPlace, false), 3));
  EXPECT_EQ(export_dot(dag, {false, true, "x"}), export_dot(dag, {false, true, "x"}));
  EXPECT_NE(export_dot(dag, {false, true, "x"}).find("color=gray]"), std::string::npos);
}

TEST(Variant, Names) {
  EXPECT_EQ(step(StepSelection::Step2, Placement::InPlace).name(), "step2/in-place/UDU");
  EXPECT_EQ(full(Placement::OutOfPlace, true).name(), "full-pipelined/out-of-place/UDU");
  EXPECT_EQ(full(Placement::InPlace, false, "UUU").name(), "full-barriered/in-place/UUU");
}

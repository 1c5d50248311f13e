#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "tilinv/taskgen.hpp"

using namespace tilinv;

namespace {

std::vector<std::string> labels(const TaskStream& s) {
  std::vector<std::string> out;
  for (const auto& task : s.tasks) out.push_back(std::string(kernel_name(task.kind)) + task_label(task).substr(kernel_family(task.kind).size()));
  return out;
}

std::size_t count(const TaskStream& s, KernelKind k) {
  return static_cast<std::size_t>(
      std::count_if(s.tasks.begin(), s.tasks.end(), [k](const Task& task) { return task.kind == k; }));
}

using Signature = std::tuple<KernelKind, std::array<std::uint32_t, 3>, std::vector<std::tuple<MatrixLabel, std::uint32_t, std::uint32_t, AccessMode>>>;

std::multiset<Signature> content(const TaskStream& s) {
  std::multiset<Signature> out;
  for (const auto& task : s.tasks) {
    std::vector<std::tuple<MatrixLabel, std::uint32_t, std::uint32_t, AccessMode>> acc;
    for (const auto& a : task.accesses) acc.emplace_back(a.tile.label, a.tile.row, a.tile.col, a.mode);
    out.emplace(task.kind, task.index, acc);
  }
  return out;
}

VariantConfig config(Placement p, std::string_view loops, bool pipelined) {
  VariantConfig c;
  c.placement = p;
  c.loops = LoopOrder::parse(loops);
  c.pipelined = pipelined;
  return c;
}

}  // namespace

TEST(LoopOrder, ParseAndPrint) {
  EXPECT_EQ(LoopOrder::parse("UDU").str(), "UDU");
  EXPECT_EQ(LoopOrder{}.str(), "UDU");
  EXPECT_EQ(LoopOrder::parse("ddu").str(), "DDU");
  EXPECT_THROW(LoopOrder::parse("UD"), ContractError);
  EXPECT_THROW(LoopOrder::parse("UXU"), ContractError);
  std::set<std::string> all;
  for (const auto& o : LoopOrder::all()) all.insert(o.str());
  EXPECT_EQ(all.size(), 8U);
  EXPECT_EQ(LoopOrder::all().front().str(), "UUU");
}

TEST(Step1, Degenerate) {
  EXPECT_EQ(labels(gen_step1(1)), std::vector<std::string>{"POTRF(0)"});
  EXPECT_THROW(gen_step1(0), InvalidSize);
}

TEST(Step1, TwoTiles) {
  EXPECT_EQ(labels(gen_step1(2)),
            (std::vector<std::string>{"POTRF(0)", "TRSM(1,0)", "SYRK_SUB(1,0)", "POTRF(1)"}));
}

TEST(Step1, TaskCountMatchesClosedForm) {
  for (std::size_t t = 1; t <= 9; ++t) {
    std::size_t gemm = 0;
    for (std::size_t j = 0; j < t; ++j) gemm += (t - 1 - j) * j;
    const TaskStream s = gen_step1(t);
    EXPECT_EQ(s.tasks.size(), t + t * (t - 1) + gemm) << t;
  }
  const TaskStream s4 = gen_step1(4);
  EXPECT_EQ(s4.tasks.size(), 20U);
  EXPECT_EQ(count(s4, KernelKind::POTRF), 4U);
  EXPECT_EQ(count(s4, KernelKind::TRSM), 6U);
  EXPECT_EQ(count(s4, KernelKind::SYRK_SUB), 6U);
  EXPECT_EQ(count(s4, KernelKind::GEMM), 4U);
}

TEST(Step1, Accesses) {
  const TaskStream s = gen_step1(4);
  for (const auto& task : s.tasks) {
    const auto i = task.index[0], j = task.index[1], k = task.index[2];
    std::vector<Access> want;
    switch (task.kind) {
      case KernelKind::SYRK_SUB:
        want = {{{MatrixLabel::A, i, i}, AccessMode::ReadWrite}, {{MatrixLabel::A, i, j}, AccessMode::Read}};
        break;
      case KernelKind::POTRF: want = {{{MatrixLabel::A, i, i}, AccessMode::ReadWrite}}; break;
      case KernelKind::GEMM:
        want = {{{MatrixLabel::A, i, j}, AccessMode::ReadWrite},
                {{MatrixLabel::A, i, k}, AccessMode::Read},
                {{MatrixLabel::A, j, k}, AccessMode::Read}};
        break;
      case KernelKind::TRSM:
        want = {{{MatrixLabel::A, i, j}, AccessMode::ReadWrite}, {{MatrixLabel::A, j, j}, AccessMode::Read}};
        break;
      default: FAIL() << "unexpected kernel in step 1";
    }
    EXPECT_EQ(task.accesses, want) << task_label(task);
  }
}

TEST(Step1, DirectionOrdersInnerLoop) {
  const TaskStream up = gen_step1(4, LoopDirection::Up), down = gen_step1(4, LoopDirection::Down);
  std::vector<std::uint32_t> ku, kd;
  for (const auto& task : up.tasks)
    if (task.kind == KernelKind::GEMM && task.index[0] == 3 && task.index[1] == 2) ku.push_back(task.index[2]);
  for (const auto& task : down.tasks)
    if (task.kind == KernelKind::GEMM && task.index[0] == 3 && task.index[1] == 2) kd.push_back(task.index[2]);
  EXPECT_EQ(ku, (std::vector<std::uint32_t>{0, 1}));
  EXPECT_EQ(kd, (std::vector<std::uint32_t>{1, 0}));
}

TEST(Step2, Degenerate) {
  for (auto p : {Placement::InPlace, Placement::OutOfPlace}) {
    const TaskStream s = gen_step2(1, LoopDirection::Down, p);
    EXPECT_EQ(labels(s), std::vector<std::string>{"TRTRI(0)"});
  }
}

// TRTRI(j) opens column j, before that column's row loop.
TEST(Step2, TwoTilesInPlace) {
  EXPECT_EQ(labels(gen_step2(2)),
            (std::vector<std::string>{"TRTRI(1)", "TRTRI(0)", "TRMM_LEFT(1,0)", "TRMM_RIGHT_NEG(1,0)"}));
}

TEST(Step2, GemmCount) {
  for (std::size_t t = 1; t <= 8; ++t) {
    std::size_t want = 0;
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < i; ++j) want += i - 1 - j;
    EXPECT_EQ(count(gen_step2(t), KernelKind::GEMM), want) << t;
  }
  EXPECT_EQ(count(gen_step2(4), KernelKind::GEMM), 4U);
}

TEST(Step2, OutOfPlaceReadsSnapshot) {
  const TaskStream s = gen_step2(4, LoopDirection::Down, Placement::OutOfPlace);
  EXPECT_EQ(count(s, KernelKind::COPY), 10U);
  bool kernels_started = false;
  for (const auto& task : s.tasks) {
    if (task.is_copy()) {
      EXPECT_FALSE(kernels_started) << "copies must precede the step's kernels";
      EXPECT_EQ(task.output().tile.label, MatrixLabel::B);
      EXPECT_EQ(task.output().mode, AccessMode::Write);
      continue;
    }
    kernels_started = true;
    EXPECT_EQ(task.output().tile.label, MatrixLabel::A);
    if (task.kind == KernelKind::GEMM) {
      EXPECT_EQ(task.accesses[1].tile, (TileId{MatrixLabel::A, task.index[0], task.index[2]}));
      EXPECT_EQ(task.accesses[2].tile, (TileId{MatrixLabel::B, task.index[2], task.index[1]}));
    }
    if (task.kind == KernelKind::TRMM_RIGHT_NEG) {
      EXPECT_EQ(task.accesses[1].tile, (TileId{MatrixLabel::A, task.index[1], task.index[1]}));
    }
    if (task.kind == KernelKind::TRMM_LEFT) {
      EXPECT_EQ(task.accesses[1].tile, (TileId{MatrixLabel::A, task.index[0], task.index[0]}));
    }
  }
}

TEST(Step3, Degenerate) {
  for (auto p : {Placement::InPlace, Placement::OutOfPlace}) {
    const TaskStream s = gen_step3(1, LoopDirection::Up, p);
    EXPECT_EQ(labels(s), std::vector<std::string>{"LAUUM(0)"});
    EXPECT_EQ(s.result, MatrixLabel::A);
  }
}

TEST(Step3, FourTilesInPlace) {
  const TaskStream s = gen_step3(4);
  EXPECT_EQ(s.tasks.size(), 20U);
  EXPECT_EQ(count(s, KernelKind::TRMM_LEFT_T), 6U);
  EXPECT_EQ(count(s, KernelKind::LAUUM), 4U);
  EXPECT_EQ(count(s, KernelKind::GEMM), 4U);
  EXPECT_EQ(count(s, KernelKind::SYRK_ADD_T), 6U);
}

// SYRK(0,1) reads A(1,0) before TRMM(1,0) overwrites it.
TEST(Step3, InPlaceTwoTilesReadThenOverwrite) {
  const TaskStream s = gen_step3(2);
  const auto syrk = std::find_if(s.tasks.begin(), s.tasks.end(), [](const Task& t) { return t.kind == KernelKind::SYRK_ADD_T; });
  const auto trmm = std::find_if(s.tasks.begin(), s.tasks.end(), [](const Task& t) { return t.kind == KernelKind::TRMM_LEFT_T; });
  ASSERT_NE(syrk, s.tasks.end());
  ASSERT_NE(trmm, s.tasks.end());
  EXPECT_LT(syrk->id, trmm->id);
  EXPECT_EQ(syrk->accesses[1], (Access{{MatrixLabel::A, 1, 0}, AccessMode::Read}));
  EXPECT_EQ(trmm->output(), (Access{{MatrixLabel::A, 1, 0}, AccessMode::ReadWrite}));
}

TEST(Step3, OutOfPlaceWritesWorkingArray) {
  const TaskStream s = gen_step3(4, LoopDirection::Up, Placement::OutOfPlace);
  EXPECT_EQ(s.result, MatrixLabel::C);
  EXPECT_EQ(count(s, KernelKind::COPY), 10U);
  for (const auto& task : s.tasks) {
    EXPECT_EQ(task.output().tile.label, MatrixLabel::C);
    for (std::size_t q = 1; q < task.accesses.size(); ++q) EXPECT_EQ(task.accesses[q].tile.label, MatrixLabel::A);
  }
}

TEST(Inversion, SingleTile) {
  const TaskStream s = gen_inversion(1, {});
  EXPECT_EQ(labels(s), (std::vector<std::string>{"POTRF(0)", "TRTRI(0)", "LAUUM(0)"}));
  EXPECT_TRUE(s.barriers.empty());
}

TEST(Inversion, Sizes) {
  const TaskStream in = gen_inversion(4, config(Placement::InPlace, "UDU", true));
  EXPECT_EQ(in.tasks.size(), 60U);
  EXPECT_TRUE(in.barriers.empty());
  const TaskStream out = gen_inversion(4, config(Placement::OutOfPlace, "UDU", true));
  EXPECT_EQ(out.kernel_task_count(), 60U);
  EXPECT_EQ(count(out, KernelKind::COPY), 20U);
  EXPECT_EQ(out.result, MatrixLabel::C);
  const TaskStream barriered = gen_inversion(4, config(Placement::OutOfPlace, "UDU", false));
  EXPECT_EQ(barriered.barriers, (std::vector<std::size_t>{20, 50}));
  for (std::size_t p = 0; p < barriered.tasks.size(); ++p) EXPECT_EQ(barriered.tasks[p].id, p);
}

TEST(Inversion, RejectsZeroWorkers) {
  VariantConfig c;
  c.workers = 0;
  EXPECT_THROW(gen_inversion(2, c), ContractError);
}

// Property: loop direction permutes tasks, never changes them.
TEST(Inversion, DirectionsOnlyReorder) {
  for (std::size_t t = 1; t <= 6; ++t)
    for (auto p : {Placement::InPlace, Placement::OutOfPlace}) {
      const auto ref = content(gen_inversion(t, config(p, "UUU", true)));
      for (const auto& o : LoopOrder::all()) {
        VariantConfig c = config(p, "UUU", true);
        c.loops = o;
        EXPECT_EQ(content(gen_inversion(t, c)), ref) << t << " " << o.str();
      }
    }
}

// Property: working-array tiles are written before they are read, and every
// read of A is of the input or of an earlier write.
TEST(Inversion, NoReadOfUninitializedWorkingTile) {
  for (std::size_t t = 1; t <= 6; ++t)
    for (const auto& o : LoopOrder::all()) {
      VariantConfig c = config(Placement::OutOfPlace, "UDU", false);
      c.loops = o;
      std::set<TileId> written;
      for (const auto& task : gen_inversion(t, c).tasks) {
        for (const auto& a : task.accesses) {
          if (a.tile.label == MatrixLabel::A) {
            EXPECT_GE(a.tile.row, a.tile.col) << "strictly-upper tile touched";
            continue;
          }
          if (reads(a.mode)) {
            EXPECT_TRUE(written.count(a.tile)) << to_string(a.tile) << " read before written";
          }
        }
        const Access& out = task.output();
        if (writes(out.mode)) written.insert(out.tile);
      }
    }
}

TEST(TextForm, InPlacePipelinedTwoTiles) {
  const std::string want =
      "0 1 POTRF(0) R:- RW:A(0,0)\n"
      "1 1 TRSM(1,0) R:A(0,0) RW:A(1,0)\n"
      "2 1 SYRK_SUB(1,0) R:A(1,0) RW:A(1,1)\n"
      "3 1 POTRF(1) R:- RW:A(1,1)\n"
      "4 2 TRTRI(1) R:- RW:A(1,1)\n"
      "5 2 TRTRI(0) R:- RW:A(0,0)\n"
      "6 2 TRMM_LEFT(1,0) R:A(1,1) RW:A(1,0)\n"
      "7 2 TRMM_RIGHT_NEG(1,0) R:A(0,0) RW:A(1,0)\n"
      "8 3 LAUUM(0) R:- RW:A(0,0)\n"
      "9 3 SYRK_ADD_T(0,1) R:A(1,0) RW:A(0,0)\n"
      "10 3 TRMM_LEFT_T(1,0) R:A(1,1) RW:A(1,0)\n"
      "11 3 LAUUM(1) R:- RW:A(1,1)\n";
  EXPECT_EQ(to_text(gen_inversion(2, config(Placement::InPlace, "UDU", true))), want);
}

TEST(TextForm, OutOfPlaceBarrieredTwoTiles) {
  const std::string want =
      "0 1 POTRF(0) R:- RW:A(0,0)\n"
      "1 1 TRSM(1,0) R:A(0,0) RW:A(1,0)\n"
      "2 1 SYRK_SUB(1,0) R:A(1,0) RW:A(1,1)\n"
      "3 1 POTRF(1) R:- RW:A(1,1)\n"
      "BARRIER\n"
      "4 copy COPY(0,0) R:A(0,0) W:B(0,0)\n"
      "5 copy COPY(1,0) R:A(1,0) W:B(1,0)\n"
      "6 copy COPY(1,1) R:A(1,1) W:B(1,1)\n"
      "7 2 TRTRI(1) R:- RW:A(1,1)\n"
      "8 2 TRTRI(0) R:- RW:A(0,0)\n"
      "9 2 TRMM_LEFT(1,0) R:A(1,1) RW:A(1,0)\n"
      "10 2 TRMM_RIGHT_NEG(1,0) R:A(0,0) RW:A(1,0)\n"
      "BARRIER\n"
      "11 copy COPY(0,0) R:A(0,0) W:C(0,0)\n"
      "12 copy COPY(1,0) R:A(1,0) W:C(1,0)\n"
      "13 copy COPY(1,1) R:A(1,1) W:C(1,1)\n"
      "14 3 LAUUM(0) R:- RW:C(0,0)\n"
      "15 3 SYRK_ADD_T(0,1) R:A(1,0) RW:C(0,0)\n"
      "16 3 TRMM_LEFT_T(1,0) R:A(1,1) RW:C(1,0)\n"
      "17 3 LAUUM(1) R:- RW:C(1,1)\n";
  EXPECT_EQ(to_text(gen_inversion(2, config(Placement::OutOfPlace, "UDU", false))), want);
}

#pragma once

// Sequential task streams for the three steps of the tile SPD inversion.
//
// A stream is the algorithm written as an ordered list of tile-kernel
// invocations, each declaring which tiles it reads and which single tile
// it writes. The scheduler derives the DAG from those declarations.
//
// Placement:
//   InPlace     every step updates A.
//   OutOfPlace  Step 2 reads its column operand L_kj from working array B
//               (snapshot of L); Step 3 reads L^-1 from A and accumulates the
//               result in working array C (per-tile snapshot of L^-1). No
//               kernel task then overwrites a tile another kernel of the same
//               step still has to read.

#include <array>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tilinv/error.hpp"
#include "tilinv/kernels.hpp"
#include "tilinv/tile_matrix.hpp"

namespace tilinv {

enum class AccessMode : std::uint8_t { Read, Write, ReadWrite };

constexpr bool reads(AccessMode m) noexcept { return m != AccessMode::Write; }
constexpr bool writes(AccessMode m) noexcept { return m != AccessMode::Read; }

struct Access {
  TileId tile;
  AccessMode mode = AccessMode::Read;

  friend bool operator==(const Access&, const Access&) = default;
};

enum class Step : std::uint8_t { Factorize = 1, Invert = 2, Multiply = 3, Copy = 4 };

struct Task {
  std::uint32_t id = 0;
  KernelKind kind = KernelKind::POTRF;
  std::array<std::uint32_t, 3> index{};
  std::uint8_t arity = 0;  // number of meaningful entries in `index`
  Step step = Step::Factorize;
  std::uint8_t phase = 1;  // step the task belongs to; copies join the step they feed
  // accesses[0] is the output; the rest are inputs in kernel operand order
  std::vector<Access> accesses;

  bool is_copy() const noexcept { return kind == KernelKind::COPY; }
  const Access& output() const noexcept { return accesses.front(); }

  friend bool operator==(const Task&, const Task&) = default;
};

enum class LoopDirection : std::uint8_t { Up, Down };

/// Direction of the innermost GEMM loop of Steps 1, 2 and 3.
struct LoopOrder {
  std::array<LoopDirection, 3> dir{LoopDirection::Up, LoopDirection::Down, LoopDirection::Up};

  static LoopOrder parse(std::string_view s) {
    if (s.size() != 3) throw ContractError("loop order must be three of U/D, got '" + std::string(s) + "'");
    LoopOrder o;
    for (std::size_t i = 0; i < 3; ++i) {
      if (s[i] == 'U' || s[i] == 'u')
        o.dir[i] = LoopDirection::Up;
      else if (s[i] == 'D' || s[i] == 'd')
        o.dir[i] = LoopDirection::Down;
      else
        throw ContractError("loop order must be three of U/D, got '" + std::string(s) + "'");
    }
    return o;
  }

  /// All eight orders, UUU first, D counting as the set bit (step 1 most significant).
  static std::array<LoopOrder, 8> all() {
    std::array<LoopOrder, 8> out{};
    for (std::size_t m = 0; m < 8; ++m)
      for (std::size_t s = 0; s < 3; ++s)
        out[m].dir[s] = (m >> (2 - s)) & 1U ? LoopDirection::Down : LoopDirection::Up;
    return out;
  }

  std::string str() const {
    std::string s;
    for (auto d : dir) s += d == LoopDirection::Up ? 'U' : 'D';
    return s;
  }

  friend bool operator==(const LoopOrder&, const LoopOrder&) = default;
};

enum class Placement : std::uint8_t { InPlace, OutOfPlace };

inline std::string_view to_string(Placement p) noexcept {
  return p == Placement::InPlace ? "in-place" : "out-of-place";
}

struct VariantConfig {
  Placement placement = Placement::InPlace;
  LoopOrder loops{};
  bool pipelined = true;
  std::size_t workers = 1;

  void validate() const {
    if (workers == 0) throw ContractError("workers must be >= 1");
  }
};

struct TaskStream {
  std::size_t t = 0;
  std::vector<Task> tasks;
  /// A barrier at position p orders tasks[0, p) before tasks[p, ...).
  std::vector<std::size_t> barriers;
  /// Matrix that holds the final result once the stream has run.
  MatrixLabel result = MatrixLabel::A;

  std::size_t kernel_task_count() const noexcept {
    std::size_t n = 0;
    for (const auto& task : tasks) n += task.is_copy() ? 0 : 1;
    return n;
  }

  bool uses(MatrixLabel label) const noexcept {
    for (const auto& task : tasks)
      for (const auto& a : task.accesses)
        if (a.tile.label == label) return true;
    return false;
  }
};

namespace detail {

class StreamBuilder {
 public:
  StreamBuilder(std::size_t t, Step step) : t_(t), step_(step) {
    if (t == 0) throw InvalidSize("task generation needs at least one tile");
    stream_.t = t;
  }

  void add(KernelKind kind, std::initializer_list<std::uint32_t> idx, Access out,
           std::initializer_list<Access> in) {
    Task task;
    task.id = static_cast<std::uint32_t>(stream_.tasks.size());
    task.kind = kind;
    task.arity = static_cast<std::uint8_t>(idx.size());
    std::size_t p = 0;
    for (auto v : idx) task.index[p++] = v;
    task.step = kind == KernelKind::COPY ? Step::Copy : step_;
    task.phase = static_cast<std::uint8_t>(step_);
    task.accesses.reserve(1 + in.size());
    task.accesses.push_back(out);
    task.accesses.insert(task.accesses.end(), in.begin(), in.end());
    stream_.tasks.push_back(std::move(task));
  }

  /// One COPY per lower tile: dst(r,c) <- A(r,c).
  void add_snapshot(MatrixLabel dst) {
    for (std::uint32_t c = 0; c < t_; ++c)
      for (std::uint32_t r = c; r < t_; ++r)
        add(KernelKind::COPY, {r, c}, {{dst, r, c}, AccessMode::Write},
            {{{MatrixLabel::A, r, c}, AccessMode::Read}});
  }

  TaskStream take(MatrixLabel result = MatrixLabel::A) {
    stream_.result = result;
    return std::move(stream_);
  }

 private:
  std::size_t t_;
  Step step_;
  TaskStream stream_;
};

inline Access rd(MatrixLabel l, std::uint32_t r, std::uint32_t c) {
  return {{l, r, c}, AccessMode::Read};
}
inline Access rw(MatrixLabel l, std::uint32_t r, std::uint32_t c) {
  return {{l, r, c}, AccessMode::ReadWrite};
}

/// Indices lo..hi-1 in the requested direction.
inline std::vector<std::uint32_t> range(std::uint32_t lo, std::uint32_t hi, LoopDirection dir) {
  std::vector<std::uint32_t> v;
  if (hi <= lo) return v;
  v.reserve(hi - lo);
  if (dir == LoopDirection::Up)
    for (std::uint32_t k = lo; k < hi; ++k) v.push_back(k);
  else
    for (std::uint32_t k = hi; k-- > lo;) v.push_back(k);
  return v;
}

}  // namespace detail

/// Step 1, tile Cholesky factorization A = L L^T (left-looking).
inline TaskStream gen_step1(std::size_t t, LoopDirection dir = LoopDirection::Up) {
  using detail::rd;
  using detail::rw;
  constexpr auto A = MatrixLabel::A;
  detail::StreamBuilder sb(t, Step::Factorize);
  const auto tt = static_cast<std::uint32_t>(t);
  for (std::uint32_t j = 0; j < tt; ++j) {
    for (std::uint32_t k = 0; k < j; ++k) sb.add(KernelKind::SYRK_SUB, {j, k}, rw(A, j, j), {rd(A, j, k)});
    sb.add(KernelKind::POTRF, {j}, rw(A, j, j), {});
    for (std::uint32_t i = j + 1; i < tt; ++i)
      for (auto k : detail::range(0, j, dir))
        sb.add(KernelKind::GEMM, {i, j, k}, rw(A, i, j), {rd(A, i, k), rd(A, j, k)});
    for (std::uint32_t i = j + 1; i < tt; ++i) sb.add(KernelKind::TRSM, {i, j}, rw(A, i, j), {rd(A, j, j)});
  }
  return sb.take();
}

/// Step 2, L <- L^-1. Column j is finished right to left; within a column
/// rows go bottom up so that GEMM(i,j,k) still sees the original L_kj.
inline TaskStream gen_step2(std::size_t t, LoopDirection dir = LoopDirection::Down,
                            Placement placement = Placement::InPlace) {
  using detail::rd;
  using detail::rw;
  constexpr auto A = MatrixLabel::A;
  detail::StreamBuilder sb(t, Step::Invert);
  const bool renamed = placement == Placement::OutOfPlace && t > 1;
  const MatrixLabel col_src = renamed ? MatrixLabel::B : A;
  if (renamed) sb.add_snapshot(MatrixLabel::B);
  const auto tt = static_cast<std::uint32_t>(t);
  for (std::uint32_t j = tt; j-- > 0;) {
    sb.add(KernelKind::TRTRI, {j}, rw(A, j, j), {});
    for (std::uint32_t i = tt; i-- > j + 1;) {
      sb.add(KernelKind::TRMM_LEFT, {i, j}, rw(A, i, j), {rd(A, i, i)});
      for (auto k : detail::range(j + 1, i, dir))
        sb.add(KernelKind::GEMM, {i, j, k}, rw(A, i, j), {rd(A, i, k), rd(col_src, k, j)});
      sb.add(KernelKind::TRMM_RIGHT_NEG, {i, j}, rw(A, i, j), {rd(A, j, j)});
    }
  }
  return sb.take();
}

/// Step 3, A^-1 = L^-T L^-1 computed from L^-1 stored in A. Out of place
/// the products accumulate in C, which starts as a per-tile copy of A.
inline TaskStream gen_step3(std::size_t t, LoopDirection dir = LoopDirection::Up,
                            Placement placement = Placement::InPlace) {
  using detail::rd;
  using detail::rw;
  constexpr auto A = MatrixLabel::A;
  detail::StreamBuilder sb(t, Step::Multiply);
  const bool renamed = placement == Placement::OutOfPlace && t > 1;
  const MatrixLabel dst = renamed ? MatrixLabel::C : A;
  if (renamed) sb.add_snapshot(MatrixLabel::C);
  const auto tt = static_cast<std::uint32_t>(t);
  for (std::uint32_t i = 0; i < tt; ++i) {
    for (std::uint32_t j = 0; j < i; ++j)
      sb.add(KernelKind::TRMM_LEFT_T, {i, j}, rw(dst, i, j), {rd(A, i, i)});
    sb.add(KernelKind::LAUUM, {i}, rw(dst, i, i), {});
    for (std::uint32_t j = 0; j < i; ++j)
      for (auto k : detail::range(i + 1, tt, dir))
        sb.add(KernelKind::GEMM, {i, j, k}, rw(dst, i, j), {rd(A, k, i), rd(A, k, j)});
    for (std::uint32_t k = i + 1; k < tt; ++k)
      sb.add(KernelKind::SYRK_ADD_T, {i, k}, rw(dst, i, i), {rd(A, k, i)});
  }
  return sb.take(dst);
}

/// Appends `tail` to `head`, renumbering ids, optionally behind a barrier.
inline void append(TaskStream& head, TaskStream tail, bool barrier) {
  if (head.t != tail.t) throw ContractError("append: streams have different tile counts");
  const auto offset = static_cast<std::uint32_t>(head.tasks.size());
  if (barrier && !head.tasks.empty() && !tail.tasks.empty()) head.barriers.push_back(offset);
  for (auto b : tail.barriers) head.barriers.push_back(b + offset);
  for (auto& task : tail.tasks) {
    task.id += offset;
    head.tasks.push_back(std::move(task));
  }
  head.result = tail.result;
}

/// All three steps; barriers between steps unless pipelined.
inline TaskStream gen_inversion(std::size_t t, const VariantConfig& config) {
  config.validate();
  TaskStream s = gen_step1(t, config.loops.dir[0]);
  append(s, gen_step2(t, config.loops.dir[1], config.placement), !config.pipelined);
  append(s, gen_step3(t, config.loops.dir[2], config.placement), !config.pipelined);
  return s;
}

// --- text form -------------------------------------------------------------

inline std::string task_label(const Task& task) {
  std::string s(kernel_family(task.kind));
  s += '(';
  for (std::uint8_t p = 0; p < task.arity; ++p) {
    if (p) s += ',';
    s += std::to_string(task.index[p]);
  }
  return s + ')';
}

/// `<id> <step> <KIND>(<indices>) R:<tiles> RW:<tile>`; copies print their
/// destination as `W:`; `BARRIER` lines mark barrier positions.
inline void write_text(std::ostream& os, const TaskStream& stream) {
  std::size_t next_barrier = 0;
  for (std::size_t p = 0; p < stream.tasks.size(); ++p) {
    while (next_barrier < stream.barriers.size() && stream.barriers[next_barrier] == p) {
      os << "BARRIER\n";
      ++next_barrier;
    }
    const Task& task = stream.tasks[p];
    os << task.id << ' ';
    if (task.is_copy())
      os << "copy";
    else
      os << static_cast<int>(task.step);
    os << ' ' << kernel_name(task.kind) << '(';
    for (std::uint8_t q = 0; q < task.arity; ++q) os << (q ? "," : "") << task.index[q];
    os << ") R:";
    if (task.accesses.size() == 1) os << '-';
    for (std::size_t q = 1; q < task.accesses.size(); ++q)
      os << (q > 1 ? "," : "") << to_string(task.accesses[q].tile);
    const Access& out = task.output();
    os << ' ' << (out.mode == AccessMode::Write ? "W:" : "RW:") << to_string(out.tile) << '\n';
  }
}

inline std::string to_text(const TaskStream& stream) {
  std::ostringstream os;
  write_text(os, stream);
  return os.str();
}

}  // namespace tilinv

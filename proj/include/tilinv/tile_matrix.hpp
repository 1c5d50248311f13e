#pragma once

// Tiled storage of symmetric matrices, SPD test-matrix generation and
// dense <-> tile conversion.
//
// Everything is column-major. A TileMatrix of order n is a t x t grid of
// b x b tiles with n == b * t; for symmetric operands only tiles (i, j)
// with i >= j carry meaning.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tilinv/error.hpp"

namespace tilinv {

/// Dense column-major real matrix. Used for inputs, results and oracles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[j * rows_ + i]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[j * rows_ + i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// One b x b block.
class Tile {
 public:
  Tile() = default;
  explicit Tile(std::size_t order, double fill = 0.0) : order_(order), data_(order * order, fill) {}

  static Tile identity(std::size_t order) {
    Tile t(order);
    for (std::size_t i = 0; i < order; ++i) t(i, i) = 1.0;
    return t;
  }

  /// Builds a tile from row-major nested initializer data; handy in tests.
  static Tile from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Tile t(rows.size());
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != t.order()) throw InvalidSize("tile rows must form a square");
      std::size_t j = 0;
      for (double v : row) t(i, j++) = v;
      ++i;
    }
    return t;
  }

  std::size_t order() const noexcept { return order_; }
  std::size_t rows() const noexcept { return order_; }
  std::size_t cols() const noexcept { return order_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[j * order_ + i]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[j * order_ + i]; }

  /// Column j as a contiguous span.
  std::span<double> col(std::size_t j) noexcept { return {data_.data() + j * order_, order_}; }
  std::span<const double> col(std::size_t j) const noexcept {
    return {data_.data() + j * order_, order_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const Tile&, const Tile&) = default;

 private:
  std::size_t order_ = 0;
  std::vector<double> data_;
};

/// Identity of a matrix in a task stream: the operand A and the working
/// arrays B and C introduced by array renaming.
enum class MatrixLabel : std::uint8_t { A, B, C };

inline char to_char(MatrixLabel l) noexcept {
  switch (l) {
    case MatrixLabel::A: return 'A';
    case MatrixLabel::B: return 'B';
    case MatrixLabel::C: return 'C';
  }
  return '?';
}

struct TileId {
  MatrixLabel label = MatrixLabel::A;
  std::uint32_t row = 0;
  std::uint32_t col = 0;

  friend auto operator<=>(const TileId&, const TileId&) = default;
};

inline std::string to_string(const TileId& id) {
  return std::string(1, to_char(id.label)) + "(" + std::to_string(id.row) + "," +
         std::to_string(id.col) + ")";
}

class TileMatrix {
 public:
  TileMatrix() = default;

  /// Zero-filled matrix of order n split into tiles of order b.
  TileMatrix(std::size_t n, std::size_t b, MatrixLabel label = MatrixLabel::A)
      : n_(n), b_(b), t_(checked_tile_count(n, b)), label_(label), tiles_(t_ * t_, Tile(b)) {}

  std::size_t order() const noexcept { return n_; }
  std::size_t tile_order() const noexcept { return b_; }
  std::size_t tile_count() const noexcept { return t_; }
  MatrixLabel label() const noexcept { return label_; }
  void set_label(MatrixLabel label) noexcept { label_ = label; }

  Tile& tile(std::size_t i, std::size_t j) noexcept { return tiles_[j * t_ + i]; }
  const Tile& tile(std::size_t i, std::size_t j) const noexcept { return tiles_[j * t_ + i]; }

  /// Element access through the tile grid.
  double operator()(std::size_t i, std::size_t j) const noexcept {
    return tile(i / b_, j / b_)(i % b_, j % b_);
  }

  friend bool operator==(const TileMatrix&, const TileMatrix&) = default;

  static std::size_t checked_tile_count(std::size_t n, std::size_t b) {
    if (n == 0 || b == 0) throw InvalidSize("matrix and tile order must be positive");
    if (n % b != 0)
      throw InvalidSize("matrix order " + std::to_string(n) + " is not divisible by tile order " +
                        std::to_string(b));
    return n / b;
  }

 private:
  std::size_t n_ = 0;
  std::size_t b_ = 0;
  std::size_t t_ = 0;
  MatrixLabel label_ = MatrixLabel::A;
  std::vector<Tile> tiles_;
};

/// M * M^T + n * I with M uniform on [0, 1). Deterministic in (n, seed).
inline DenseMatrix generate_spd(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidSize("generate_spd: n must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  DenseMatrix m(n, n);
  for (double& v : m.data()) v = unit(rng);

  DenseMatrix a(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      const double mjk = m(j, k);
      for (std::size_t i = j; i < n; ++i) a(i, j) += m(i, k) * mjk;
    }
    a(j, j) += static_cast<double>(n);
    for (std::size_t i = j + 1; i < n; ++i) a(j, i) = a(i, j);
  }
  return a;
}

inline TileMatrix from_dense(const DenseMatrix& m, std::size_t b,
                             MatrixLabel label = MatrixLabel::A) {
  if (m.rows() != m.cols()) throw InvalidSize("from_dense: matrix must be square");
  TileMatrix tm(m.rows(), b, label);
  const std::size_t t = tm.tile_count();
  for (std::size_t tj = 0; tj < t; ++tj)
    for (std::size_t ti = 0; ti < t; ++ti) {
      Tile& tile = tm.tile(ti, tj);
      for (std::size_t j = 0; j < b; ++j)
        for (std::size_t i = 0; i < b; ++i) tile(i, j) = m(ti * b + i, tj * b + j);
    }
  return tm;
}

/// Copies every tile verbatim; callers of symmetric algorithms mirror the
/// lower part themselves (see symmetrize_lower).
inline DenseMatrix to_dense(const TileMatrix& tm) {
  const std::size_t b = tm.tile_order();
  const std::size_t t = tm.tile_count();
  DenseMatrix m(tm.order(), tm.order());
  for (std::size_t tj = 0; tj < t; ++tj)
    for (std::size_t ti = 0; ti < t; ++ti) {
      const Tile& tile = tm.tile(ti, tj);
      for (std::size_t j = 0; j < b; ++j)
        for (std::size_t i = 0; i < b; ++i) m(ti * b + i, tj * b + j) = tile(i, j);
    }
  return m;
}

/// Overwrites the strictly-upper triangle with the mirror of the lower one.
inline void symmetrize_lower(DenseMatrix& m) {
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = 0; i < j; ++i) m(i, j) = m(j, i);
}

/// Deep copy of the lower tiles (i >= j) under a new label. Strictly-upper
/// tiles of the copy are zero.
inline TileMatrix copy_lower(const TileMatrix& src, MatrixLabel dst_label) {
  TileMatrix dst(src.order(), src.tile_order(), dst_label);
  for (std::size_t j = 0; j < src.tile_count(); ++j)
    for (std::size_t i = j; i < src.tile_count(); ++i) dst.tile(i, j) = src.tile(i, j);
  return dst;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidSize("max_abs_diff: shape mismatch");
  double worst = 0.0;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t k = 0; k < x.size(); ++k) worst = std::max(worst, std::abs(x[k] - y[k]));
  return worst;
}

// --- CSV fixtures ----------------------------------------------------------

inline void write_csv(std::ostream& os, const DenseMatrix& m) {
  os << std::setprecision(17);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << m(i, j);
    }
    os << '\n';
  }
}

inline DenseMatrix parse_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw IoError("csv: not a number: '" + cell + "'");
      }
      if (cell.find_first_not_of(" \t", used) != std::string::npos)
        throw IoError("csv: trailing characters in '" + cell + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("csv: empty matrix");
  const std::size_t cols = rows.front().size();
  for (const auto& r : rows)
    if (r.size() != cols) throw IoError("csv: ragged rows");
  DenseMatrix m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
  return m;
}

inline DenseMatrix read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_csv(in);
}

inline void write_csv_file(const std::string& path, const DenseMatrix& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_csv(out, m);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace tilinv

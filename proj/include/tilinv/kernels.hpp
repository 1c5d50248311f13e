#pragma once

// Sequential tile kernels used by the three steps of the inversion:
// Cholesky factorization (POTRF, TRSM, SYRK, GEMM), triangular inversion
// (TRTRI, TRMM, GEMM) and the product L^-T L^-1 (TRMM, LAUUM, GEMM, SYRK).
//
// All kernels update their output tile in place and take every other
// operand by const reference. Triangular operands are lower triangular;
// their strictly-upper part is never read.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tilinv/error.hpp"
#include "tilinv/tile_matrix.hpp"

namespace tilinv {

enum class KernelKind : std::uint8_t {
  POTRF,           // A_jj <- chol(A_jj)
  TRSM,            // A_ij <- A_ij / A_jj^T
  SYRK_SUB,        // A_jj <- A_jj - A_jk A_jk^T
  SYRK_ADD_T,      // A_ii <- A_ii + A_ki^T A_ki
  GEMM,            // three shapes, see GemmShape
  TRTRI,           // A_jj <- A_jj^-1
  TRMM_LEFT,       // A_ij <- A_ii A_ij
  TRMM_RIGHT_NEG,  // A_ij <- -A_ij A_jj
  TRMM_LEFT_T,     // A_ij <- A_ii^T A_ij
  LAUUM,           // A_ii <- A_ii^T A_ii
  COPY,            // working-array snapshot of one tile
};

/// Enumerant spelling, used by the text serialization of task streams.
constexpr std::string_view kernel_name(KernelKind k) noexcept {
  switch (k) {
    case KernelKind::POTRF: return "POTRF";
    case KernelKind::TRSM: return "TRSM";
    case KernelKind::SYRK_SUB: return "SYRK_SUB";
    case KernelKind::SYRK_ADD_T: return "SYRK_ADD_T";
    case KernelKind::GEMM: return "GEMM";
    case KernelKind::TRTRI: return "TRTRI";
    case KernelKind::TRMM_LEFT: return "TRMM_LEFT";
    case KernelKind::TRMM_RIGHT_NEG: return "TRMM_RIGHT_NEG";
    case KernelKind::TRMM_LEFT_T: return "TRMM_LEFT_T";
    case KernelKind::LAUUM: return "LAUUM";
    case KernelKind::COPY: return "COPY";
  }
  return "?";
}

/// BLAS/LAPACK family name (SYRK, TRMM, ...), used for DAG node labels.
constexpr std::string_view kernel_family(KernelKind k) noexcept {
  switch (k) {
    case KernelKind::SYRK_SUB:
    case KernelKind::SYRK_ADD_T: return "SYRK";
    case KernelKind::TRMM_LEFT:
    case KernelKind::TRMM_RIGHT_NEG:
    case KernelKind::TRMM_LEFT_T: return "TRMM";
    default: return kernel_name(k);
  }
}

enum class Trans : std::uint8_t { No, Yes };

/// The three GEMM forms the inversion needs.
enum class GemmShape : std::uint8_t {
  NT_Minus,  // C <- C - A B^T   (Cholesky update)
  NN_Plus,   // C <- C + A B     (triangular inversion)
  TN_Plus,   // C <- C + A^T B   (triangular product)
};

enum class TrmmVariant : std::uint8_t {
  Left,       // a <- tri a
  RightNeg,   // a <- -a tri
  LeftTrans,  // a <- tri^T a
};

namespace detail {

inline void require_same_order(const Tile& x, const Tile& y, const char* who) {
  if (x.order() != y.order())
    throw InvalidSize(std::string(who) + ": tile orders differ (" + std::to_string(x.order()) +
                      " vs " + std::to_string(y.order()) + ")");
}

inline void require_nonzero_diagonal(const Tile& l) {
  for (std::size_t j = 0; j < l.order(); ++j)
    if (l(j, j) == 0.0) throw SingularTile(j);
}

inline double dot(std::span<const double> x, std::span<const double> y, std::size_t from) noexcept {
  double s = 0.0;
  for (std::size_t i = from; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

// y[from..] += alpha * x[from..]
inline void axpy(double alpha, std::span<const double> x, std::span<double> y,
                 std::size_t from = 0) noexcept {
  for (std::size_t i = from; i < y.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace detail

/// Lower Cholesky factor in place. The strictly-upper part is zeroed.
/// Throws NotPositiveDefinite carrying the failing pivot.
inline void potrf(Tile& a) {
  const std::size_t n = a.order();
  for (std::size_t j = 0; j < n; ++j) {
    const double d = a(j, j);
    if (!(d > 0.0) || !std::isfinite(d)) throw NotPositiveDefinite(j);
    const double ljj = std::sqrt(d);
    a(j, j) = ljj;
    auto colj = a.col(j);
    for (std::size_t i = j + 1; i < n; ++i) colj[i] /= ljj;
    // right-looking update of the trailing lower triangle
    for (std::size_t c = j + 1; c < n; ++c) detail::axpy(-colj[c], colj, a.col(c), c);
  }
  for (std::size_t j = 1; j < n; ++j)
    for (std::size_t i = 0; i < j; ++i) a(i, j) = 0.0;
}

/// a <- a * l^-T, i.e. solves X l^T = a.
inline void trsm_right_lt(Tile& a, const Tile& l) {
  detail::require_same_order(a, l, "trsm");
  detail::require_nonzero_diagonal(l);
  const std::size_t n = a.order();
  for (std::size_t j = 0; j < n; ++j) {
    auto xj = a.col(j);
    for (std::size_t k = 0; k < j; ++k) detail::axpy(-l(j, k), a.col(k), xj);
    const double inv = 1.0 / l(j, j);
    for (double& v : xj) v *= inv;
  }
}

/// c <- c - a a^T on the lower triangle.
inline void syrk_sub(Tile& c, const Tile& a) {
  detail::require_same_order(c, a, "syrk");
  const std::size_t n = c.order();
  for (std::size_t j = 0; j < n; ++j) {
    auto cj = c.col(j);
    for (std::size_t k = 0; k < n; ++k) detail::axpy(-a(j, k), a.col(k), cj, j);
  }
}

/// c <- c + a^T a on the lower triangle.
inline void syrk_add_t(Tile& c, const Tile& a) {
  detail::require_same_order(c, a, "syrk");
  const std::size_t n = c.order();
  for (std::size_t j = 0; j < n; ++j) {
    auto aj = a.col(j);
    for (std::size_t i = j; i < n; ++i) c(i, j) += detail::dot(a.col(i), aj, 0);
  }
}

inline void gemm(Tile& c, const Tile& a, const Tile& b, GemmShape shape) {
  detail::require_same_order(c, a, "gemm");
  detail::require_same_order(c, b, "gemm");
  const std::size_t n = c.order();
  switch (shape) {
    case GemmShape::NT_Minus:
      for (std::size_t j = 0; j < n; ++j) {
        auto cj = c.col(j);
        for (std::size_t k = 0; k < n; ++k) detail::axpy(-b(j, k), a.col(k), cj);
      }
      return;
    case GemmShape::NN_Plus:
      for (std::size_t j = 0; j < n; ++j) {
        auto cj = c.col(j);
        for (std::size_t k = 0; k < n; ++k) detail::axpy(b(k, j), a.col(k), cj);
      }
      return;
    case GemmShape::TN_Plus:
      for (std::size_t j = 0; j < n; ++j) {
        auto bj = b.col(j);
        for (std::size_t i = 0; i < n; ++i) c(i, j) += detail::dot(a.col(i), bj, 0);
      }
      return;
  }
}

/// Flag-based entry point; only the (N,T,-), (N,N,+) and (T,N,+) forms exist.
inline void gemm(Tile& c, const Tile& a, const Tile& b, Trans trans_a, Trans trans_b,
                 int sign) {
  if (trans_a == Trans::No && trans_b == Trans::Yes && sign == -1)
    return gemm(c, a, b, GemmShape::NT_Minus);
  if (trans_a == Trans::No && trans_b == Trans::No && sign == +1)
    return gemm(c, a, b, GemmShape::NN_Plus);
  if (trans_a == Trans::Yes && trans_b == Trans::No && sign == +1)
    return gemm(c, a, b, GemmShape::TN_Plus);
  throw ContractError("gemm: unsupported transpose/sign combination");
}

/// Inverse of a lower-triangular tile, in place (unblocked, column by column
/// from the right). The strictly-upper part is left untouched.
inline void trtri(Tile& l) {
  const std::size_t n = l.order();
  detail::require_nonzero_diagonal(l);
  std::vector<double> work(n);
  for (std::size_t jj = n; jj-- > 0;) {
    l(jj, jj) = 1.0 / l(jj, jj);
    const double ajj = -l(jj, jj);
    // x = X(jj+1:, jj+1:) * l(jj+1:, jj), X already inverted
    auto colj = l.col(jj);
    for (std::size_t i = jj + 1; i < n; ++i) work[i] = 0.0;
    for (std::size_t k = jj + 1; k < n; ++k) {
      const double s = colj[k];
      auto xk = l.col(k);
      for (std::size_t i = k; i < n; ++i) work[i] += xk[i] * s;
    }
    for (std::size_t i = jj + 1; i < n; ++i) colj[i] = ajj * work[i];
  }
}

inline void trmm(Tile& a, const Tile& tri, TrmmVariant variant) {
  detail::require_same_order(a, tri, "trmm");
  const std::size_t n = a.order();
  switch (variant) {
    case TrmmVariant::Left:
      for (std::size_t c = 0; c < n; ++c) {
        auto ac = a.col(c);
        for (std::size_t k = n; k-- > 0;) {
          const double s = ac[k];
          ac[k] = tri(k, k) * s;
          detail::axpy(s, tri.col(k), ac, k + 1);
        }
      }
      return;
    case TrmmVariant::RightNeg:
      for (std::size_t c = 0; c < n; ++c) {
        auto ac = a.col(c);
        const double d = tri(c, c);
        for (double& v : ac) v *= d;
        for (std::size_t k = c + 1; k < n; ++k) detail::axpy(tri(k, c), a.col(k), ac);
        for (double& v : ac) v = -v;
      }
      return;
    case TrmmVariant::LeftTrans:
      for (std::size_t c = 0; c < n; ++c) {
        auto ac = a.col(c);
        for (std::size_t i = 0; i < n; ++i) ac[i] = detail::dot(tri.col(i), ac, i);
      }
      return;
  }
}

/// l <- l^T l on the lower triangle; the strictly-upper part is untouched.
inline void lauum(Tile& l) {
  const std::size_t n = l.order();
  for (std::size_t j = 0; j < n; ++j) {
    auto lj = l.col(j);
    for (std::size_t i = j; i < n; ++i) lj[i] = detail::dot(l.col(i), lj, i);
  }
}

inline void copy_tile(Tile& dst, const Tile& src) { dst = src; }

}  // namespace tilinv

#pragma once

// Tile inversion of symmetric positive definite matrices on a dynamic,
// hazard-driven task scheduler.

#include <cstddef>
#include <vector>

#include "tilinv/dag_analysis.hpp"
#include "tilinv/error.hpp"
#include "tilinv/kernels.hpp"
#include "tilinv/scheduler.hpp"
#include "tilinv/taskgen.hpp"
#include "tilinv/tile_matrix.hpp"

namespace tilinv {

/// Inverts the SPD matrix held (lower part) in `a` with the given variant.
/// The lower tiles of the returned matrix hold the lower part of A^-1.
inline TileMatrix invert(TileMatrix a, const VariantConfig& config,
                         std::vector<TraceRecord>* trace = nullptr) {
  config.validate();
  const TaskStream stream = gen_inversion(a.tile_count(), config);
  return execute(build_dag(stream), std::move(a), ExecOptions{config.workers, trace});
}

/// Dense convenience wrapper; returns the full symmetric inverse.
inline DenseMatrix invert_dense(const DenseMatrix& a, std::size_t b, const VariantConfig& config) {
  DenseMatrix inv = to_dense(invert(from_dense(a, b), config));
  symmetrize_lower(inv);
  return inv;
}

/// x * y for dense matrices.
inline DenseMatrix multiply(const DenseMatrix& x, const DenseMatrix& y) {
  if (x.cols() != y.rows()) throw InvalidSize("multiply: inner dimensions differ");
  DenseMatrix z(x.rows(), y.cols());
  const std::size_t m = x.rows();
  for (std::size_t j = 0; j < y.cols(); ++j) {
    double* zj = z.data().data() + j * m;
    for (std::size_t k = 0; k < x.cols(); ++k) {
      const double s = y(k, j);
      const double* xk = x.data().data() + k * m;
      for (std::size_t i = 0; i < m; ++i) zj[i] += s * xk[i];
    }
  }
  return z;
}

/// max |a * a_inv - I|.
inline double inverse_residual(const DenseMatrix& a, const DenseMatrix& a_inv) {
  return max_abs_diff(multiply(a, a_inv), DenseMatrix::identity(a.rows()));
}

}  // namespace tilinv

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tilinv {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix order / tile order mismatch, zero sizes, shape mismatch.
class InvalidSize : public Error {
 public:
  using Error::Error;
};

/// Caller broke an API contract (unsupported kernel shape, malformed config).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Cholesky hit a non-positive pivot. `index()` is the 0-based pivot
/// within the tile (LAPACK's info - 1).
class NotPositiveDefinite : public Error {
 public:
  explicit NotPositiveDefinite(std::size_t index, const std::string& where = {})
      : Error("matrix is not positive definite: pivot " + std::to_string(index) +
              (where.empty() ? std::string{} : " in " + where)),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Zero on the diagonal of a triangular operand.
class SingularTile : public Error {
 public:
  explicit SingularTile(std::size_t index, const std::string& where = {})
      : Error("singular triangular tile: zero diagonal at " + std::to_string(index) +
              (where.empty() ? std::string{} : " in " + where)),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tilinv

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace kernelctrl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent vector/matrix dimensions or an invalid argument value.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A numerical failure: factorization breakdown, non-finite values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Cholesky factorization broke down at `pivot` (zero-based).
class FactorizationError : public NumericalError {
 public:
  FactorizationError(const std::string& what, std::size_t pivot)
      : NumericalError(what + " (pivot " + std::to_string(pivot) + ")"),
        pivot_(pivot) {}

  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

/// The policy-weight linear program has no point in the simplex satisfying
/// the constraint rows.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, std::vector<std::size_t> violated)
      : Error(what), violated_(std::move(violated)) {}

  /// Indices of the constraint rows that cannot be satisfied simultaneously.
  const std::vector<std::size_t>& violated() const noexcept { return violated_; }

 private:
  std::vector<std::size_t> violated_;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace detail
}  // namespace kernelctrl

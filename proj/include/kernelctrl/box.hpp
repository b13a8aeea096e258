#pragma once

#include <limits>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "kernelctrl/errors.hpp"

namespace kernelctrl {

/// Closed axis-aligned box [lower, upper].
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Box() = default;
  Box(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
    detail::require(lower.size() == upper.size(), "box bounds differ in dimension");
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
      detail::require(lower[i] <= upper[i], "box lower bound exceeds upper bound in coordinate " +
                                                std::to_string(i));
    }
  }

  /// [lo, hi]^dim
  static Box cube(Eigen::Index dim, double lo, double hi) {
    return {Eigen::VectorXd::Constant(dim, lo), Eigen::VectorXd::Constant(dim, hi)};
  }

  /// All of R^dim.
  static Box everywhere(Eigen::Index dim) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return cube(dim, -inf, inf);
  }

  Eigen::Index dim() const noexcept { return lower.size(); }

  bool contains(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    detail::require(x.size() == dim(), "point dimension " + std::to_string(x.size()) +
                                           " does not match box dimension " +
                                           std::to_string(dim()));
    return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
  }
};

}  // namespace kernelctrl

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "kernelctrl/errors.hpp"
#include "kernelctrl/parallel.hpp"

namespace kernelctrl {

/// A set of points, one point per row.
using PointSet = Eigen::MatrixXd;

enum class KernelFamily { GaussianRBF, Abel };

inline std::string_view to_string(KernelFamily family) {
  return family == KernelFamily::GaussianRBF ? "gaussian" : "abel";
}

/// Radial kernel with a scalar bandwidth.
///
///   GaussianRBF: k(x, x') = exp(-|x - x'|^2 / (2 sigma^2))
///   Abel:        k(x, x') = exp(-|x - x'| / sigma)
///
/// Both satisfy k(x, x) = 1 and 0 < k <= 1. The Abel kernel is separating and
/// is the one to use for support estimation.
struct KernelSpec {
  KernelFamily family = KernelFamily::GaussianRBF;
  double bandwidth = 1.0;

  KernelSpec() = default;
  KernelSpec(KernelFamily f, double sigma) : family(f), bandwidth(sigma) {
    detail::require(std::isfinite(sigma) && sigma > 0.0,
                    "kernel bandwidth must be positive and finite, got " + std::to_string(sigma));
  }

  static KernelSpec gaussian(double sigma) { return {KernelFamily::GaussianRBF, sigma}; }
  static KernelSpec abel(double sigma) { return {KernelFamily::Abel, sigma}; }
};

namespace detail {

// Two-pass squared distance; no |a|^2 + |b|^2 - 2ab expansion.
inline double kernel_value(const KernelSpec& spec, const double* a, const double* b,
                           std::size_t dim) {
  double sq = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = a[d] - b[d];
    sq += diff * diff;
  }
  if (spec.family == KernelFamily::GaussianRBF) {
    return std::exp(-sq / (2.0 * spec.bandwidth * spec.bandwidth));
  }
  return std::exp(-std::sqrt(sq) / spec.bandwidth);
}

}  // namespace detail

inline double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& y) {
  detail::require(x.size() == y.size(), "kernel arguments differ in dimension: " +
                                            std::to_string(x.size()) + " vs " +
                                            std::to_string(y.size()));
  const Eigen::VectorXd a = x;
  const Eigen::VectorXd b = y;
  return detail::kernel_value(spec, a.data(), b.data(), static_cast<std::size_t>(a.size()));
}

/// G(i, j) = k(A_i, B_j) for row-points A and B. Rows of G are filled in
/// parallel; each entry is computed identically regardless of scheduling.
inline Eigen::MatrixXd gram(const KernelSpec& spec, const PointSet& A, const PointSet& B) {
  detail::require(A.rows() > 0 && B.rows() > 0, "gram: point sets must be non-empty");
  detail::require(A.cols() == B.cols(), "gram: point sets differ in dimension: " +
                                            std::to_string(A.cols()) + " vs " +
                                            std::to_string(B.cols()));
  // Column-major transposes keep each point contiguous.
  const Eigen::MatrixXd at = A.transpose();
  const Eigen::MatrixXd bt = B.transpose();
  const auto dim = static_cast<std::size_t>(A.cols());
  Eigen::MatrixXd g(A.rows(), B.rows());
  parallel_for(static_cast<std::size_t>(B.rows()), [&](std::size_t j) {
    const double* b = bt.col(static_cast<Eigen::Index>(j)).data();
    for (Eigen::Index i = 0; i < at.cols(); ++i) {
      g(i, static_cast<Eigen::Index>(j)) = detail::kernel_value(spec, at.col(i).data(), b, dim);
    }
  });
  return g;
}

/// Median pairwise Euclidean distance over at most `limit` leading points.
inline double median_pairwise_distance(const PointSet& points, Eigen::Index limit = 500) {
  const Eigen::Index n = std::min(points.rows(), limit);
  detail::require(n >= 2, "median heuristic needs at least two points");
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((points.row(i) - points.row(j)).norm());
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

}  // namespace kernelctrl

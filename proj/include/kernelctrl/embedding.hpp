#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "kernelctrl/errors.hpp"
#include "kernelctrl/kernels.hpp"

namespace kernelctrl {

namespace detail {

// Unblocked Cholesky run only to locate the first non-positive pivot.
inline std::size_t failing_pivot(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - a.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) return static_cast<std::size_t>(j);
    d = std::sqrt(d);
    a(j, j) = d;
    for (Eigen::Index i = j + 1; i < n; ++i)
      a(i, j) = (a(i, j) - a.row(i).head(j).dot(a.row(j).head(j))) / d;
  }
  return static_cast<std::size_t>(n);
}

/// Factors gram + shift I into `llt`. On failure retries once with an extra
/// 1e-10 * trace(gram) / n on the diagonal and returns that jitter.
inline double factor_regularized(Eigen::MatrixXd& gram, double shift,
                                 Eigen::LLT<Eigen::MatrixXd>& llt, const std::string& context) {
  const double trace_mean = gram.trace() / static_cast<double>(gram.rows());
  gram.diagonal().array() += shift;
  llt.compute(gram);
  if (llt.info() == Eigen::Success) return 0.0;
  const double jitter = 1e-10 * trace_mean;
  gram.diagonal().array() += jitter;
  llt.compute(gram);
  if (llt.info() != Eigen::Success) {
    throw FactorizationError(context + ": regularized Gram matrix is not positive definite",
                             failing_pivot(gram));
  }
  return jitter;
}

}  // namespace detail

/// Observed transitions (x_i, u_i, y_i), one per row of each matrix.
struct TransitionSample {
  PointSet states;
  PointSet actions;
  PointSet successors;

  Eigen::Index size() const noexcept { return states.rows(); }
  Eigen::Index state_dim() const noexcept { return states.cols(); }
  Eigen::Index action_dim() const noexcept { return actions.cols(); }

  void validate() const {
    detail::require(states.rows() >= 1, "transition sample is empty");
    detail::require(actions.rows() == states.rows() && successors.rows() == states.rows(),
                    "transition sample: states, actions and successors differ in count");
    detail::require(successors.cols() == states.cols(),
                    "transition sample: successors differ in dimension from states");
    detail::require(actions.cols() >= 1 && states.cols() >= 1,
                    "transition sample: zero-dimensional states or actions");
  }
};

/// Kernel weights evaluated once for a set of state queries and a set of
/// actions; reused when many expectations share the same query points.
struct QueryGrid {
  Eigen::MatrixXd state_weights;   ///< M x Q, k(x_i, s_q)
  Eigen::MatrixXd action_weights;  ///< M x P, l(u_i, a_j)
};

/// Empirical conditional distribution embedding fitted by regularized least
/// squares.
///
/// With G = K_x .* K_u (Hadamard product of the state and action Gram
/// matrices) the weight vector at a query (x, u) is
///
///   beta(x, u) = (G + lambda M I)^{-1} z,   z_i = k(x_i, x) l(u_i, u),
///
/// and sum_i f(y_i) beta_i(x, u) approximates E[f(y) | x, u]. The regularized
/// Gram matrix is Cholesky-factored once at fit time; nothing is inverted.
class Embedding {
 public:
  /// Fits with lambda = 1/M when no lambda is given.
  static Embedding fit(TransitionSample sample, const KernelSpec& state_kernel,
                       const KernelSpec& action_kernel, std::optional<double> lambda = {}) {
    sample.validate();
    const auto m = static_cast<double>(sample.size());
    const double reg = lambda.value_or(1.0 / m);
    detail::require(std::isfinite(reg) && reg > 0.0,
                    "regularization lambda must be positive, got " + std::to_string(reg));

    Eigen::MatrixXd g = gram(state_kernel, sample.states, sample.states)
                            .cwiseProduct(gram(action_kernel, sample.actions, sample.actions));
    Embedding emb(std::move(sample), state_kernel, action_kernel, reg);
    emb.jitter_ = detail::factor_regularized(g, reg * m, emb.llt_, "embedding fit");
    return emb;
  }

  /// Same kernel on states and actions.
  static Embedding fit(TransitionSample sample, const KernelSpec& kernel,
                       std::optional<double> lambda = {}) {
    return fit(std::move(sample), kernel, kernel, lambda);
  }

  const TransitionSample& sample() const noexcept { return sample_; }
  const KernelSpec& state_kernel() const noexcept { return state_kernel_; }
  const KernelSpec& action_kernel() const noexcept { return action_kernel_; }
  double lambda() const noexcept { return lambda_; }
  /// Extra diagonal added by the retry path, 0 if the first factorization succeeded.
  double jitter() const noexcept { return jitter_; }
  Eigen::Index size() const noexcept { return sample_.size(); }

  /// Lower-triangular L with L L^T = G + lambda M I (+ jitter I).
  Eigen::MatrixXd factor() const { return llt_.matrixL(); }

  /// Solves (G + lambda M I) X = rhs.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const {
    detail::require(rhs.rows() == size(), "embedding solve: right-hand side has " +
                                              std::to_string(rhs.rows()) + " rows, expected " +
                                              std::to_string(size()));
    return llt_.solve(rhs);
  }

  /// Columns z(states_q, actions_q) for paired queries.
  Eigen::MatrixXd weights(const PointSet& states, const PointSet& actions) const {
    check_queries(states, actions);
    return gram(state_kernel_, sample_.states, states)
        .cwiseProduct(gram(action_kernel_, sample_.actions, actions));
  }

  Eigen::VectorXd beta(const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& u) const {
    return beta_batch(x.transpose(), u.transpose(), 1).col(0);
  }

  /// Column q holds beta(states_q, actions_q). Queries are processed in blocks
  /// of at most max_chunk columns.
  Eigen::MatrixXd beta_batch(const PointSet& states, const PointSet& actions,
                             Eigen::Index max_chunk) const {
    detail::require(max_chunk >= 1, "beta_batch: max_chunk must be at least 1");
    detail::require(states.rows() == actions.rows(),
                    "beta_batch: state and action query counts differ");
    const Eigen::Index q = states.rows();
    Eigen::MatrixXd out(size(), q);
    for (Eigen::Index begin = 0; begin < q; begin += max_chunk) {
      const Eigen::Index len = std::min(max_chunk, q - begin);
      out.middleCols(begin, len) =
          solve(weights(states.middleRows(begin, len), actions.middleRows(begin, len)));
    }
    return out;
  }

  /// fvals . beta(x, u), where fvals_i = f(y_i).
  double expectation(const Eigen::Ref<const Eigen::VectorXd>& fvals,
                     const Eigen::Ref<const Eigen::VectorXd>& x,
                     const Eigen::Ref<const Eigen::VectorXd>& u) const {
    check_fvals(fvals);
    return fvals.dot(beta(x, u));
  }

  /// Dual coefficients alpha = (G + lambda M I)^{-1} fvals. Since the
  /// regularized Gram matrix is symmetric, fvals . beta(x, u) = alpha . z(x, u).
  Eigen::VectorXd dual(const Eigen::Ref<const Eigen::VectorXd>& fvals) const {
    check_fvals(fvals);
    return llt_.solve(Eigen::VectorXd(fvals));
  }

  QueryGrid query_grid(const PointSet& states, const PointSet& actions) const {
    detail::require(states.cols() == sample_.state_dim(), "query states have wrong dimension");
    detail::require(actions.cols() == sample_.action_dim(), "query actions have wrong dimension");
    return {gram(state_kernel_, sample_.states, states),
            gram(action_kernel_, sample_.actions, actions)};
  }

  /// E(q, j) = fvals . beta(s_q, a_j) for every state query and every action.
  Eigen::MatrixXd expectation_grid(const Eigen::Ref<const Eigen::VectorXd>& fvals,
                                   const QueryGrid& grid) const {
    const Eigen::VectorXd alpha = dual(fvals);
    return grid.state_weights.transpose() * (alpha.asDiagonal() * grid.action_weights);
  }

  /// Chunked variant that never holds more than max_chunk state columns.
  Eigen::MatrixXd expectation_grid(const Eigen::Ref<const Eigen::VectorXd>& fvals,
                                   const PointSet& states, const PointSet& actions,
                                   Eigen::Index max_chunk) const {
    detail::require(max_chunk >= 1, "expectation_grid: max_chunk must be at least 1");
    detail::require(states.cols() == sample_.state_dim(), "query states have wrong dimension");
    const Eigen::VectorXd alpha = dual(fvals);
    const Eigen::MatrixXd weighted =
        alpha.asDiagonal() * gram(action_kernel_, sample_.actions, actions);
    Eigen::MatrixXd out(states.rows(), actions.rows());
    for (Eigen::Index begin = 0; begin < states.rows(); begin += max_chunk) {
      const Eigen::Index len = std::min(max_chunk, states.rows() - begin);
      out.middleRows(begin, len) =
          gram(state_kernel_, sample_.states, states.middleRows(begin, len)).transpose() *
          weighted;
    }
    return out;
  }

 private:
  Embedding(TransitionSample sample, const KernelSpec& k, const KernelSpec& l, double lambda)
      : sample_(std::move(sample)), state_kernel_(k), action_kernel_(l), lambda_(lambda) {}

  void check_queries(const PointSet& states, const PointSet& actions) const {
    detail::require(states.rows() == actions.rows(), "query state and action counts differ");
    detail::require(states.cols() == sample_.state_dim(),
                    "query state has dimension " + std::to_string(states.cols()) + ", expected " +
                        std::to_string(sample_.state_dim()));
    detail::require(actions.cols() == sample_.action_dim(),
                    "query action has dimension " + std::to_string(actions.cols()) +
                        ", expected " + std::to_string(sample_.action_dim()));
  }

  void check_fvals(const Eigen::Ref<const Eigen::VectorXd>& fvals) const {
    detail::require(fvals.size() == size(), "function values have length " +
                                                std::to_string(fvals.size()) + ", expected " +
                                                std::to_string(size()));
  }

  TransitionSample sample_;
  KernelSpec state_kernel_;
  KernelSpec action_kernel_;
  double lambda_ = 0.0;
  double jitter_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

}  // namespace kernelctrl

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "kernelctrl/errors.hpp"

namespace kernelctrl {

/// minimize c . g  subject to  D g <= 0,  sum(g) = 1,  g >= 0.
///
/// The simplex constraints are implicit; D may have zero rows.
struct SimplexLP {
  Eigen::VectorXd c;
  Eigen::MatrixXd D;
};

struct LpSolution {
  Eigen::VectorXd weights;  ///< point of the probability simplex
  double objective = 0.0;
};

namespace lp_detail {

constexpr double kPivotTol = 1e-11;
constexpr double kFeasTol = 1e-9;

// Dense tableau in canonical form: the basic columns form an identity.
class Tableau {
 public:
  Tableau(Eigen::MatrixXd a, Eigen::VectorXd b, std::vector<Eigen::Index> basis)
      : a_(std::move(a)), b_(std::move(b)), basis_(std::move(basis)) {}

  // Bland's rule: lowest-index improving column enters, lowest-index basic
  // variable leaves on ratio ties. Returns false if unbounded.
  bool minimize(const Eigen::VectorXd& cost, Eigen::Index usable_cols) {
    const double scale = cost.head(usable_cols).cwiseAbs().maxCoeff();
    if (scale == 0.0) return true;
    const double tol = kPivotTol * scale;
    for (std::size_t iter = 0; iter < 100000; ++iter) {
      Eigen::VectorXd cb(rows());
      for (Eigen::Index i = 0; i < rows(); ++i) cb[i] = cost[basis_[i]];
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < usable_cols; ++j) {
        if (is_basic(j)) continue;
        const double reduced = cost[j] - cb.dot(a_.col(j));
        if (reduced < -tol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < rows(); ++i) {
        if (a_(i, enter) <= kPivotTol) continue;
        const double ratio = b_[i] / a_(i, enter);
        if (ratio < best - 1e-15) {
          best = ratio;
          leave = i;
        } else if (ratio <= best + 1e-15 && basis_[i] < basis_[leave]) {
          leave = i;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    throw NumericalError("simplex: iteration limit exceeded");
  }

  void pivot(Eigen::Index row, Eigen::Index col) {
    const double p = a_(row, col);
    a_.row(row) /= p;
    b_[row] /= p;
    for (Eigen::Index i = 0; i < rows(); ++i) {
      if (i == row) continue;
      const double f = a_(i, col);
      if (f == 0.0) continue;
      a_.row(i) -= f * a_.row(row);
      b_[i] -= f * b_[row];
      if (b_[i] < 0.0 && b_[i] > -1e-13) b_[i] = 0.0;
    }
    a_.col(col).setZero();
    a_(row, col) = 1.0;
    basis_[row] = col;
  }

  void drop_row(Eigen::Index row) {
    const Eigen::Index n = rows() - 1;
    for (Eigen::Index i = row; i < n; ++i) {
      a_.row(i) = a_.row(i + 1);
      b_[i] = b_[i + 1];
      basis_[i] = basis_[i + 1];
    }
    a_.conservativeResize(n, Eigen::NoChange);
    b_.conservativeResize(n);
    basis_.pop_back();
  }

  bool is_basic(Eigen::Index j) const {
    for (auto v : basis_)
      if (v == j) return true;
    return false;
  }

  Eigen::Index rows() const { return a_.rows(); }
  const Eigen::MatrixXd& a() const { return a_; }
  const Eigen::VectorXd& b() const { return b_; }
  const std::vector<Eigen::Index>& basis() const { return basis_; }

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  std::vector<Eigen::Index> basis_;
};

}  // namespace lp_detail

/// Two-phase dense primal simplex. Returns std::nullopt when no simplex point
/// satisfies D g <= 0.
inline std::optional<LpSolution> solve_lp(const SimplexLP& lp) {
  const Eigen::Index P = lp.c.size();
  const Eigen::Index p = lp.D.rows();
  detail::require(P >= 1, "solve_lp: need at least one variable");
  detail::require(p == 0 || lp.D.cols() == P, "solve_lp: constraint matrix has wrong width");
  detail::require(lp.c.allFinite() && lp.D.allFinite(), "solve_lp: non-finite coefficients");

  // Columns: g (P), slacks (p), artificial (1). Rows: D g + s = 0, 1.g + a = 1.
  const Eigen::Index cols = P + p + 1;
  const Eigen::Index artificial = P + p;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p + 1, cols);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p + 1);
  std::vector<Eigen::Index> basis;
  for (Eigen::Index r = 0; r < p; ++r) {
    a.row(r).head(P) = lp.D.row(r);
    a(r, P + r) = 1.0;
    basis.push_back(P + r);
  }
  a.row(p).head(P).setOnes();
  a(p, artificial) = 1.0;
  b[p] = 1.0;
  basis.push_back(artificial);
  lp_detail::Tableau tab(std::move(a), std::move(b), std::move(basis));

  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(cols);
  phase1[artificial] = 1.0;
  if (!tab.minimize(phase1, cols)) throw NumericalError("simplex: phase 1 reported unbounded");

  for (Eigen::Index i = 0; i < tab.rows(); ++i) {
    if (tab.basis()[i] == artificial && tab.b()[i] > lp_detail::kFeasTol) return std::nullopt;
  }
  // Drive a zero-level artificial out of the basis, or drop its redundant row.
  for (Eigen::Index i = 0; i < tab.rows(); ++i) {
    if (tab.basis()[i] != artificial) continue;
    Eigen::Index col = -1;
    for (Eigen::Index j = 0; j < artificial; ++j) {
      if (std::abs(tab.a()(i, j)) > lp_detail::kPivotTol) {
        col = j;
        break;
      }
    }
    if (col >= 0) {
      tab.pivot(i, col);
    } else {
      tab.drop_row(i);
    }
    break;
  }

  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(cols);
  phase2.head(P) = lp.c;
  if (!tab.minimize(phase2, artificial)) {
    throw NumericalError("simplex: phase 2 reported unbounded over a compact feasible set");
  }

  LpSolution sol;
  sol.weights = Eigen::VectorXd::Zero(P);
  for (Eigen::Index i = 0; i < tab.rows(); ++i) {
    if (tab.basis()[i] < P) sol.weights[tab.basis()[i]] = tab.b()[i];
  }
  sol.objective = lp.c.dot(sol.weights);
  return sol;
}

}  // namespace kernelctrl

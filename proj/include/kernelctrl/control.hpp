#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kernelctrl/embedding.hpp"
#include "kernelctrl/errors.hpp"
#include "kernelctrl/lp.hpp"
#include "kernelctrl/rng.hpp"
#include "kernelctrl/sampling.hpp"

namespace kernelctrl {

/// f(t, x, u) = state(t, x) + action(t, u). Either part may be empty (zero).
struct CostTerm {
  std::function<double(int t, const Eigen::VectorXd& state)> state;
  std::function<double(int t, const Eigen::VectorXd& action)> action;
};

/// Objective plus constraints of the form E[f_i] <= 0.
struct CostSpec {
  CostTerm objective;
  std::vector<CostTerm> constraints;
};

enum class ControlMode { Forward, Backward };

/// Outcome of one policy-weight LP.
struct Decision {
  Eigen::Index index = 0;   ///< selected action (argmax of weights, lowest index on ties)
  Eigen::VectorXd weights;  ///< simplex weights over the action grid
  Eigen::VectorXd cost;     ///< objective row c
  Eigen::MatrixXd constraints;  ///< constraint rows D
};

namespace control_detail {

inline Eigen::VectorXd state_values(const CostTerm& term, int t, const PointSet& points) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(points.rows());
  if (!term.state) return v;
  for (Eigen::Index i = 0; i < points.rows(); ++i) v[i] = term.state(t, points.row(i).transpose());
  return v;
}

inline Eigen::VectorXd action_values(const CostTerm& term, int t, const ActionGrid& grid) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(grid.size());
  if (!term.action) return v;
  for (Eigen::Index j = 0; j < grid.size(); ++j) v[j] = term.action(t, grid[j]);
  return v;
}

inline void require_finite(const Eigen::VectorXd& v, const std::string& what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i]))
      throw NumericalError(what + " is not finite at index " + std::to_string(i));
  }
}

inline Eigen::Index argmax_lowest(const Eigen::VectorXd& w) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < w.size(); ++j)
    if (w[j] > w[best]) best = j;
  return best;
}

inline Eigen::Index argmin_lowest(const Eigen::VectorXd& w) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < w.size(); ++j)
    if (w[j] < w[best]) best = j;
  return best;
}

}  // namespace control_detail

/// Coefficient row of the policy-weight LP at state x:
///   v_j = fvals_x . beta(x, a_j) + fu_vals_j.
inline Eigen::VectorXd stage_matrices(const Embedding& emb, const ActionGrid& actions,
                                      const Eigen::Ref<const Eigen::VectorXd>& fvals_x,
                                      const Eigen::Ref<const Eigen::VectorXd>& fu_vals,
                                      const Eigen::Ref<const Eigen::VectorXd>& x) {
  detail::require(fu_vals.size() == actions.size(), "stage_matrices: fu_vals length differs from action count");
  const QueryGrid grid = emb.query_grid(x.transpose(), actions.actions);
  return emb.expectation_grid(fvals_x, grid).row(0).transpose() + fu_vals;
}

/// Kernel-embedding controller over a finite action grid.
///
/// Forward mode minimizes the expected next-stage cost at each step. Backward
/// mode first runs dynamic programming over the sample successors y_i:
///
///   Z_N(i) = f0x(N, y_i)
///   Z_t(i) = f0x(t, y_i) + min_j [ f0u(t, a_j) + Z_{t+1} . beta(y_i, a_j) ]
///
/// and then minimizes f0u(t, a) + E[Z_{t+1}] online. Z_t is the cost-to-go
/// including the state cost at t, so the last backward stage coincides with
/// the forward controller.
class Controller {
 public:
  static Controller forward(std::shared_ptr<const Embedding> emb, ActionGrid actions,
                            CostSpec costs) {
    return Controller(std::move(emb), std::move(actions), std::move(costs), ControlMode::Forward);
  }

  static Controller backward(std::shared_ptr<const Embedding> emb, ActionGrid actions,
                             CostSpec costs, int horizon) {
    detail::require(horizon >= 1, "fit_backward: horizon must be at least 1");
    Controller ctrl(std::move(emb), std::move(actions), std::move(costs), ControlMode::Backward);
    ctrl.fit_tables(horizon);
    return ctrl;
  }

  ControlMode mode() const noexcept { return mode_; }
  const Embedding& embedding() const noexcept { return *emb_; }
  const ActionGrid& actions() const noexcept { return actions_; }
  const CostSpec& costs() const noexcept { return costs_; }
  int horizon() const noexcept { return static_cast<int>(tables_.size()) - 1; }

  /// Z_t for t = 0..N (Backward only; empty otherwise).
  const std::vector<Eigen::VectorXd>& value_tables() const noexcept { return tables_; }

  /// The successor-point values whose expectation forms the objective row at t.
  Eigen::VectorXd objective_values(int t) const {
    if (mode_ == ControlMode::Forward)
      return control_detail::state_values(costs_.objective, t + 1, emb_->sample().successors);
    detail::require(t >= 0 && t < horizon(), "act_backward: time index " + std::to_string(t) +
                                                 " outside [0, " + std::to_string(horizon()) +
                                                 ")");
    return tables_[static_cast<std::size_t>(t + 1)];
  }

  /// Builds and solves the policy-weight LP at state x and time t.
  Decision decide(const Eigen::Ref<const Eigen::VectorXd>& x, int t) const {
    detail::require(x.size() == emb_->sample().state_dim(), "controller: state has wrong dimension");
    const QueryGrid grid{gram(emb_->state_kernel(), emb_->sample().states, x.transpose()),
                         action_weights_};
    Decision d;
    d.cost = emb_->expectation_grid(objective_values(t), grid).row(0).transpose() +
             control_detail::action_values(costs_.objective, t, actions_);
    d.constraints.resize(static_cast<Eigen::Index>(costs_.constraints.size()), actions_.size());
    for (std::size_t c = 0; c < costs_.constraints.size(); ++c) {
      const CostTerm& term = costs_.constraints[c];
      d.constraints.row(static_cast<Eigen::Index>(c)) =
          emb_->expectation_grid(
                  control_detail::state_values(term, t + 1, emb_->sample().successors), grid)
              .row(0) +
          control_detail::action_values(term, t, actions_).transpose();
    }
    control_detail::require_finite(d.cost, "objective row");
    const auto sol = solve_lp({d.cost, d.constraints});
    if (!sol) {
      std::vector<std::size_t> violated;
      for (Eigen::Index r = 0; r < d.constraints.rows(); ++r)
        if (d.constraints.row(r).minCoeff() > 0.0) violated.push_back(static_cast<std::size_t>(r));
      if (violated.empty())
        for (Eigen::Index r = 0; r < d.constraints.rows(); ++r)
          violated.push_back(static_cast<std::size_t>(r));
      std::string list;
      for (auto r : violated) list += (list.empty() ? "" : ",") + std::to_string(r);
      throw InfeasibleError("no admissible action weights satisfy constraints {" + list +
                                "} at t=" + std::to_string(t),
                            std::move(violated));
    }
    d.weights = sol->weights;
    d.index = control_detail::argmax_lowest(d.weights);
    return d;
  }

  Eigen::VectorXd act(const Eigen::Ref<const Eigen::VectorXd>& x, int t) const {
    return actions_[decide(x, t).index];
  }

  /// Draws an action index from the LP weights instead of taking the argmax.
  Eigen::VectorXd act_sampled(const Eigen::Ref<const Eigen::VectorXd>& x, int t,
                              SeededRng& rng) const {
    const Decision d = decide(x, t);
    const double r = rng.uniform(0.0, 1.0);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < d.weights.size(); ++j) {
      acc += std::max(0.0, d.weights[j]);
      if (r < acc) return actions_[j];
    }
    return actions_[d.index];
  }

  Policy policy() const {
    return [self = *this](int t, const Eigen::VectorXd& x) { return self.act(x, t); };
  }

 private:
  Controller(std::shared_ptr<const Embedding> emb, ActionGrid actions, CostSpec costs,
             ControlMode mode)
      : emb_(std::move(emb)), actions_(std::move(actions)), costs_(std::move(costs)), mode_(mode) {
    detail::require(emb_ != nullptr, "controller: null embedding");
    detail::require(actions_.size() >= 1, "controller: empty action grid");
    detail::require(actions_.dim() == emb_->sample().action_dim(),
                    "controller: action grid dimension differs from sample actions");
    detail::require(actions_.actions.allFinite(), "controller: non-finite action in grid");
    action_weights_ = gram(emb_->action_kernel(), emb_->sample().actions, actions_.actions);
  }

  void fit_tables(int horizon) {
    const PointSet& ys = emb_->sample().successors;
    const Eigen::Index m = ys.rows();
    const QueryGrid grid{gram(emb_->state_kernel(), emb_->sample().states, ys), action_weights_};
    tables_.assign(static_cast<std::size_t>(horizon + 1), Eigen::VectorXd());
    tables_.back() = control_detail::state_values(costs_.objective, horizon, ys);
    check_table(horizon);
    for (int t = horizon - 1; t >= 0; --t) {
      const Eigen::MatrixXd future =
          emb_->expectation_grid(tables_[static_cast<std::size_t>(t + 1)], grid).rowwise() +
          control_detail::action_values(costs_.objective, t, actions_).transpose();
      // Worst constraint value per (point, action); admissible when <= 0.
      Eigen::MatrixXd worst;
      if (!costs_.constraints.empty()) {
        worst = Eigen::MatrixXd::Constant(m, actions_.size(),
                                          -std::numeric_limits<double>::infinity());
        for (const CostTerm& term : costs_.constraints) {
          const Eigen::MatrixXd g =
              emb_->expectation_grid(control_detail::state_values(term, t + 1, ys), grid)
                  .rowwise() +
              control_detail::action_values(term, t, actions_).transpose();
          worst = worst.cwiseMax(g);
        }
      }
      Eigen::VectorXd z = control_detail::state_values(costs_.objective, t, ys);
      for (Eigen::Index i = 0; i < m; ++i) {
        Eigen::Index best = -1;
        if (costs_.constraints.empty()) {
          best = control_detail::argmin_lowest(future.row(i).transpose());
        } else {
          for (Eigen::Index j = 0; j < actions_.size(); ++j) {
            if (worst(i, j) <= 0.0 && (best < 0 || future(i, j) < future(i, best))) best = j;
          }
          if (best < 0) best = control_detail::argmin_lowest(worst.row(i).transpose());
        }
        z[i] += future(i, best);
      }
      tables_[static_cast<std::size_t>(t)] = std::move(z);
      check_table(t);
    }
  }

  void check_table(int t) const {
    const Eigen::VectorXd& z = tables_[static_cast<std::size_t>(t)];
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      if (!std::isfinite(z[i]))
        throw NumericalError("value table at stage " + std::to_string(t) +
                             " is not finite at point " + std::to_string(i));
    }
  }

  std::shared_ptr<const Embedding> emb_;
  ActionGrid actions_;
  CostSpec costs_;
  ControlMode mode_;
  Eigen::MatrixXd action_weights_;  // M x P, l(u_i, a_j)
  std::vector<Eigen::VectorXd> tables_;
};

}  // namespace kernelctrl

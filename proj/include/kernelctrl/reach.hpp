#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kernelctrl/box.hpp"
#include "kernelctrl/embedding.hpp"
#include "kernelctrl/errors.hpp"
#include "kernelctrl/kernels.hpp"
#include "kernelctrl/sampling.hpp"
#include "kernelctrl/systems.hpp"

namespace kernelctrl {

/// 1 if x lies in the closed box, 0 otherwise.
inline int indicator(const Box& box, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return box.contains(x) ? 1 : 0;
}

/// Time-indexed boxes, sets[t] for t = 0..N.
struct Tube {
  std::vector<Box> sets;

  static Tube constant(const Box& box, int horizon) {
    return {std::vector<Box>(static_cast<std::size_t>(horizon + 1), box)};
  }

  int horizon() const noexcept { return static_cast<int>(sets.size()) - 1; }
  const Box& at(int t) const { return sets.at(static_cast<std::size_t>(t)); }
};

enum class ReachProblem { TerminalHitting, FirstHitting };

inline std::string_view to_string(ReachProblem p) {
  return p == ReachProblem::TerminalHitting ? "THT" : "FHT";
}

/// Approximate maximal reach-avoid probabilities from a fitted embedding.
///
/// Tables V_t hold the value at every sample successor y_i. With
/// E_t(x, j) = V_{t+1} . beta(x, a_j) and c(.) = clip to [0, 1]:
///
///   THT: V_N = 1_T(N),  V_t(x) = 1_K(t)(x) c(max_j E_t(x, j))
///   FHT: V_N = 1_T(N),  V_t(x) = 1_T(t)(x) + 1_{K(t) \ T(t)}(x) c(max_j E_t(x, j))
class SRModel {
 public:
  static SRModel fit(std::shared_ptr<const Embedding> emb, ActionGrid actions, Tube safe,
                     Tube target, int horizon, ReachProblem problem) {
    detail::require(emb != nullptr, "fit_sr: null embedding");
    detail::require(horizon >= 1, "fit_sr: horizon must be at least 1");
    detail::require(safe.horizon() >= horizon && target.horizon() >= horizon,
                    "fit_sr: tubes need at least N+1 = " + std::to_string(horizon + 1) + " sets");
    detail::require(actions.size() >= 1 && actions.dim() == emb->sample().action_dim(),
                    "fit_sr: action grid does not match the sample");
    for (int t = 0; t <= horizon; ++t) {
      detail::require(safe.at(t).dim() == emb->sample().state_dim() &&
                          target.at(t).dim() == emb->sample().state_dim(),
                      "fit_sr: tube dimension does not match the state dimension");
    }
    SRModel model(std::move(emb), std::move(actions), std::move(safe), std::move(target),
                  horizon, problem);
    model.fit_tables();
    return model;
  }

  const Embedding& embedding() const noexcept { return *emb_; }
  const ActionGrid& actions() const noexcept { return actions_; }
  const Tube& safe() const noexcept { return safe_; }
  const Tube& target() const noexcept { return target_; }
  int horizon() const noexcept { return horizon_; }
  ReachProblem problem() const noexcept { return problem_; }
  const std::vector<Eigen::VectorXd>& value_tables() const noexcept { return tables_; }

  /// Recursion step t applied at arbitrary points, using the stage-(t+1)
  /// table. Returns the values and the maximizing action index per point.
  std::pair<Eigen::VectorXd, std::vector<Eigen::Index>> evaluate_stage(
      int t, const PointSet& points, const ActionGrid& actions,
      Eigen::Index max_chunk = 1024) const {
    detail::require(t >= 0 && t < horizon_, "stage index outside [0, N)");
    detail::require(points.cols() == emb_->sample().state_dim(),
                    "reach: query points have wrong dimension");
    detail::require(max_chunk >= 1, "reach: max_chunk must be at least 1");
    const Eigen::MatrixXd e = emb_->expectation_grid(tables_[static_cast<std::size_t>(t + 1)],
                                                     points, actions.actions, max_chunk);
    return combine(t, points, e);
  }

  /// V_0 at each query point, in [0, 1].
  Eigen::VectorXd predict(const PointSet& points, Eigen::Index max_chunk = 1024) const {
    detail::require(points.cols() == emb_->sample().state_dim(),
                    "reach: query points have wrong dimension");
    detail::require(max_chunk >= 1, "reach: max_chunk must be at least 1");
    Eigen::MatrixXd e(points.rows(), actions_.size());
    for (Eigen::Index begin = 0; begin < points.rows(); begin += max_chunk) {
      const Eigen::Index len = std::min(max_chunk, points.rows() - begin);
      e.middleRows(begin, len) = stage_expectations(0, points.middleRows(begin, len));
    }
    return combine(0, points, e).first;
  }

  /// Greedy action maximizing the estimated probability at (t, x).
  Eigen::Index greedy_index(const Eigen::Ref<const Eigen::VectorXd>& x, int t) const {
    detail::require(t >= 0 && t < horizon_, "stage index outside [0, N)");
    const PointSet q = x.transpose();
    const Eigen::MatrixXd e = stage_expectations(t, q);
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < e.cols(); ++j)
      if (e(0, j) > e(0, best)) best = j;
    return best;
  }

  Policy greedy_policy() const {
    return [self = *this](int t, const Eigen::VectorXd& x) {
      return self.actions_[self.greedy_index(x, t)];
    };
  }

 private:
  SRModel(std::shared_ptr<const Embedding> emb, ActionGrid actions, Tube safe, Tube target,
          int horizon, ReachProblem problem)
      : emb_(std::move(emb)),
        actions_(std::move(actions)),
        safe_(std::move(safe)),
        target_(std::move(target)),
        horizon_(horizon),
        problem_(problem) {}

  // E_t(q, j) for the model's own action grid, from the cached stage weights.
  Eigen::MatrixXd stage_expectations(int t, const PointSet& points) const {
    return gram(emb_->state_kernel(), emb_->sample().states, points).transpose() *
           stage_weights_[static_cast<std::size_t>(t)];
  }

  std::pair<Eigen::VectorXd, std::vector<Eigen::Index>> combine(int t, const PointSet& points,
                                                                const Eigen::MatrixXd& e) const {
    Eigen::VectorXd v(points.rows());
    std::vector<Eigen::Index> arg(static_cast<std::size_t>(points.rows()), 0);
    const Box& k = safe_.at(t);
    const Box& tg = target_.at(t);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      Eigen::Index best = 0;
      for (Eigen::Index j = 1; j < e.cols(); ++j)
        if (e(i, j) > e(i, best)) best = j;
      arg[static_cast<std::size_t>(i)] = best;
      const double raw = e(i, best);
      if (!std::isfinite(raw)) {
        throw NumericalError("reach: non-finite value at stage " + std::to_string(t) +
                             ", point " + std::to_string(i));
      }
      const double cont = std::clamp(raw, 0.0, 1.0);
      const auto x = points.row(i).transpose();
      if (problem_ == ReachProblem::TerminalHitting) {
        v[i] = k.contains(x) ? cont : 0.0;
      } else if (tg.contains(x)) {
        v[i] = 1.0;
      } else {
        v[i] = k.contains(x) ? cont : 0.0;
      }
    }
    return {v, std::move(arg)};
  }

  void fit_tables() {
    const PointSet& ys = emb_->sample().successors;
    tables_.assign(static_cast<std::size_t>(horizon_ + 1), Eigen::VectorXd());
    stage_weights_.assign(static_cast<std::size_t>(horizon_), Eigen::MatrixXd());
    Eigen::VectorXd terminal(ys.rows());
    for (Eigen::Index i = 0; i < ys.rows(); ++i)
      terminal[i] = indicator(target_.at(horizon_), ys.row(i).transpose());
    tables_.back() = terminal;
    const QueryGrid grid = emb_->query_grid(ys, actions_.actions);
    for (int t = horizon_ - 1; t >= 0; --t) {
      const auto st = static_cast<std::size_t>(t);
      stage_weights_[st] = emb_->dual(tables_[st + 1]).asDiagonal() * grid.action_weights;
      const Eigen::MatrixXd e = grid.state_weights.transpose() * stage_weights_[st];
      tables_[st] = combine(t, ys, e).first;
    }
  }

  std::shared_ptr<const Embedding> emb_;
  ActionGrid actions_;
  Tube safe_;
  Tube target_;
  int horizon_;
  ReachProblem problem_;
  std::vector<Eigen::VectorXd> tables_;
  std::vector<Eigen::MatrixXd> stage_weights_;  // alpha_{t+1} .* l(u_i, a_j), M x P
};

/// Safety probabilities at `points`, evaluated with the given action grid.
inline Eigen::VectorXd predict_safety(const SRModel& model, const PointSet& points,
                                      const ActionGrid& actions, Eigen::Index max_chunk = 1024) {
  detail::require(actions.dim() == model.embedding().sample().action_dim(),
                  "predict_safety: action grid has wrong dimension");
  return model.evaluate_stage(0, points, actions, max_chunk).first;
}

struct Classification {
  double score = 0.0;
  bool inside = false;
};

/// Support estimate from samples with a separating (Abel) kernel.
///
/// alpha solves (K + lambda M I) alpha = 1, the score is F(x) = k(x)^T alpha,
/// and x is classified inside when F(x) >= 1 - tau with
/// tau = 1 - min_i F(x_i), so every training point is inside.
class SupportClassifier {
 public:
  static SupportClassifier fit(PointSet points, double sigma, std::optional<double> lambda = {}) {
    detail::require(points.rows() >= 1, "fit_support: need at least one point");
    const auto m = static_cast<double>(points.rows());
    const double reg = lambda.value_or(1.0 / m);
    detail::require(std::isfinite(reg) && reg > 0.0, "fit_support: lambda must be positive");
    SupportClassifier cls;
    cls.kernel_ = KernelSpec::abel(sigma);
    cls.lambda_ = reg;
    Eigen::MatrixXd k = gram(cls.kernel_, points, points);
    Eigen::LLT<Eigen::MatrixXd> llt;
    detail::factor_regularized(k, reg * m, llt, "fit_support");
    cls.alpha_ = llt.solve(Eigen::VectorXd::Ones(points.rows()));
    cls.points_ = std::move(points);
    cls.level_ = cls.scores(cls.points_).minCoeff();
    cls.tau_ = 1.0 - cls.level_;
    return cls;
  }

  /// F(x), summed in a fixed order so training scores are reproduced exactly.
  double score(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    detail::require(x.size() == points_.cols(), "classify: point has wrong dimension");
    const Eigen::VectorXd q = x;
    const auto dim = static_cast<std::size_t>(points_.cols());
    Eigen::VectorXd p(points_.cols());
    double s = 0.0;
    for (Eigen::Index i = 0; i < points_.rows(); ++i) {
      p = points_.row(i).transpose();
      s += detail::kernel_value(kernel_, p.data(), q.data(), dim) * alpha_[i];
    }
    return s;
  }

  Eigen::VectorXd scores(const PointSet& xs) const {
    Eigen::VectorXd out(xs.rows());
    for (Eigen::Index i = 0; i < xs.rows(); ++i) out[i] = score(xs.row(i).transpose());
    return out;
  }

  /// inside iff F(x) >= 1 - tau; compared against the stored minimum training
  /// score so the training points pass exactly.
  Classification classify(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const double s = score(x);
    return {s, s >= level_};
  }

  double threshold() const noexcept { return tau_; }
  double lambda() const noexcept { return lambda_; }
  const KernelSpec& kernel() const noexcept { return kernel_; }
  const PointSet& points() const noexcept { return points_; }
  const Eigen::VectorXd& coefficients() const noexcept { return alpha_; }

 private:
  PointSet points_;
  KernelSpec kernel_;
  double lambda_ = 0.0;
  Eigen::VectorXd alpha_;
  double tau_ = 0.0;
  double level_ = 0.0;
};

}  // namespace kernelctrl

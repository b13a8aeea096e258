#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kernelctrl/box.hpp"
#include "kernelctrl/embedding.hpp"
#include "kernelctrl/errors.hpp"
#include "kernelctrl/parallel.hpp"
#include "kernelctrl/rng.hpp"
#include "kernelctrl/systems.hpp"

namespace kernelctrl {

/// Finite admissible action set, one action per row.
struct ActionGrid {
  PointSet actions;

  Eigen::Index size() const noexcept { return actions.rows(); }
  Eigen::Index dim() const noexcept { return actions.cols(); }
  Eigen::VectorXd operator[](Eigen::Index j) const { return actions.row(j).transpose(); }
};

/// `count` i.i.d. uniform points in the box, one per row.
inline PointSet uniform_box(const Box& box, Eigen::Index count, SeededRng& rng) {
  detail::require(count >= 0, "uniform_box: negative count");
  detail::require(box.lower.allFinite() && box.upper.allFinite(),
                  "uniform_box: box must be bounded");
  PointSet points(count, box.dim());
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index d = 0; d < box.dim(); ++d) {
      const double lo = box.lower[d];
      const double hi = box.upper[d];
      points(i, d) = lo == hi ? lo : rng.uniform(lo, hi);
    }
  }
  return points;
}

/// x_i ~ U(state_box), u_i ~ U(action_box), y_i = step(x_i, u_i).
inline TransitionSample draw_transitions(const SystemSpec& sys, const Box& state_box,
                                         const Box& action_box, Eigen::Index count,
                                         SeededRng& rng) {
  detail::require(count >= 1, "draw_transitions: sample size must be at least 1");
  detail::require(state_box.dim() == sys.state_dim, "state box dimension does not match system");
  detail::require(action_box.dim() == sys.action_dim,
                  "action box dimension does not match system");
  TransitionSample s;
  s.states = uniform_box(state_box, count, rng);
  s.actions = uniform_box(action_box, count, rng);
  s.successors.resize(count, sys.state_dim);
  for (Eigen::Index i = 0; i < count; ++i) {
    s.successors.row(i) =
        step(sys, s.states.row(i).transpose(), s.actions.row(i).transpose(), rng).transpose();
  }
  return s;
}

/// `count` rollouts of length `horizon` from uniform initial states. Rollout i
/// draws from rng.derive(i), so rollouts are independent of each other and of
/// the scheduling.
inline std::vector<Trajectory> draw_trajectories(const SystemSpec& sys, const Box& init_box,
                                                 const Policy& policy, int horizon,
                                                 Eigen::Index count, const SeededRng& rng) {
  detail::require(horizon >= 1 && count >= 1,
                  "draw_trajectories: horizon and count must be at least 1");
  detail::require(init_box.dim() == sys.state_dim, "initial box dimension does not match system");
  std::vector<Trajectory> out(static_cast<std::size_t>(count));
  parallel_for(out.size(), [&](std::size_t i) {
    SeededRng local = rng.derive(i);
    const Eigen::VectorXd x0 = uniform_box(init_box, 1, local).row(0).transpose();
    out[i] = simulate(sys, x0, policy, horizon, local);
  });
  return out;
}

/// Cartesian grid with per_dim equally spaced points per coordinate, endpoints
/// included; per_dim = 1 gives the box midpoint. The first coordinate varies
/// slowest.
inline ActionGrid grid_actions(const Box& box, int per_dim) {
  detail::require(per_dim >= 1, "grid_actions: per_dim must be at least 1");
  detail::require(box.lower.allFinite() && box.upper.allFinite(),
                  "grid_actions: box must be bounded");
  const Eigen::Index dim = box.dim();
  Eigen::Index total = 1;
  for (Eigen::Index d = 0; d < dim; ++d) total *= per_dim;
  auto coordinate = [&](Eigen::Index d, int k) {
    if (per_dim == 1) return 0.5 * (box.lower[d] + box.upper[d]);
    if (k == per_dim - 1) return box.upper[d];
    return box.lower[d] + (box.upper[d] - box.lower[d]) * k / (per_dim - 1);
  };
  ActionGrid grid{PointSet(total, dim)};
  for (Eigen::Index row = 0; row < total; ++row) {
    Eigen::Index rem = row;
    for (Eigen::Index d = dim - 1; d >= 0; --d) {
      grid.actions(row, d) = coordinate(d, static_cast<int>(rem % per_dim));
      rem /= per_dim;
    }
  }
  return grid;
}

}  // namespace kernelctrl

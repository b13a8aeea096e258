#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "kernelctrl/errors.hpp"
#include "kernelctrl/parallel.hpp"
#include "kernelctrl/reach.hpp"
#include "kernelctrl/rng.hpp"
#include "kernelctrl/systems.hpp"

namespace kernelctrl {

/// Monte-Carlo success estimate with a 95% normal-approximation half width.
struct McReport {
  double estimate = 0.0;
  std::int64_t trials = 0;
  double half_width = 0.0;
};

inline double binomial_half_width(double estimate, std::int64_t trials) {
  return 1.96 * std::sqrt(estimate * (1.0 - estimate) / static_cast<double>(trials));
}

/// Whether a state sequence x_0..x_N satisfies the reach-avoid event.
///   THT: x_N in T(N) and x_t in K(t) for all t < N.
///   FHT: some t <= N has x_t in T(t) with x_s in K(s) for all s < t.
inline bool reach_avoid_success(const Eigen::MatrixXd& states, const Tube& safe,
                                const Tube& target, ReachProblem problem) {
  const int n = static_cast<int>(states.rows()) - 1;
  for (int t = 0; t <= n; ++t) {
    const auto x = states.row(t).transpose();
    if (problem == ReachProblem::FirstHitting && target.at(t).contains(x)) return true;
    if (t == n) return problem == ReachProblem::TerminalHitting && target.at(t).contains(x);
    if (!safe.at(t).contains(x)) return false;
  }
  return false;
}

/// K rollouts of the true system from x0 under `policy`; rollout k uses
/// rng.derive(k), so the estimate does not depend on the worker count.
inline McReport mc_safety(const SystemSpec& sys, const Policy& policy, const Eigen::VectorXd& x0,
                          const Tube& safe, const Tube& target, int horizon,
                          ReachProblem problem, std::int64_t trials, const SeededRng& rng) {
  detail::require(trials >= 1, "mc_safety: need at least one trial");
  detail::require(horizon >= 1, "mc_safety: horizon must be at least 1");
  detail::require(safe.horizon() >= horizon && target.horizon() >= horizon,
                  "mc_safety: tubes shorter than the horizon");
  std::vector<char> ok(static_cast<std::size_t>(trials), 0);
  parallel_for(ok.size(), [&](std::size_t k) {
    SeededRng local = rng.derive(k);
    const Trajectory traj = simulate(sys, x0, policy, horizon, local);
    ok[k] = reach_avoid_success(traj.states, safe, target, problem) ? 1 : 0;
  });
  std::int64_t hits = 0;
  for (char c : ok) hits += c;
  McReport r;
  r.trials = trials;
  r.estimate = static_cast<double>(hits) / static_cast<double>(trials);
  r.half_width = binomial_half_width(r.estimate, trials);
  return r;
}

/// Exact conditional mean A x + B u of a linear-Gaussian system.
inline Eigen::VectorXd linear_gaussian_mean(const SystemSpec& sys,
                                            const Eigen::Ref<const Eigen::VectorXd>& x,
                                            const Eigen::Ref<const Eigen::VectorXd>& u) {
  const LinearDynamics& lin = sys.linear();
  detail::require(x.size() == lin.A.cols() && u.size() == lin.B.cols(),
                  "linear_gaussian_mean: dimension mismatch");
  return lin.A * x + lin.B * u;
}

}  // namespace kernelctrl

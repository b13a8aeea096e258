#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "kernelctrl/box.hpp"
#include "kernelctrl/errors.hpp"
#include "kernelctrl/rng.hpp"

namespace kernelctrl {

/// Continuous-time dynamics dx/dt = f(x, u).
using VectorField =
    std::function<Eigen::VectorXd(const Eigen::VectorXd& state, const Eigen::VectorXd& action)>;

/// Feedback law u = policy(t, x).
using Policy = std::function<Eigen::VectorXd(int t, const Eigen::VectorXd& state)>;

/// Exact discrete map x' = A x + B u.
struct LinearDynamics {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
};

/// Additive Gaussian disturbance w ~ N(0, covariance).
class NoiseSpec {
 public:
  NoiseSpec() = default;
  explicit NoiseSpec(Eigen::MatrixXd covariance) : covariance_(std::move(covariance)) {
    detail::require(covariance_.rows() == covariance_.cols(), "noise covariance must be square");
    detail::require(covariance_.isApprox(covariance_.transpose(), 1e-12) ||
                        covariance_.isZero(0.0),
                    "noise covariance must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
    if (llt.info() == Eigen::Success) {
      factor_ = llt.matrixL();
    } else {
      // PSD but singular (or slightly indefinite): clamp eigenvalues at zero.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance_);
      detail::require(eig.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, covariance_.norm()),
                      "noise covariance must be positive semidefinite");
      factor_ = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
  }

  static NoiseSpec isotropic(Eigen::Index dim, double variance) {
    return NoiseSpec(variance * Eigen::MatrixXd::Identity(dim, dim));
  }

  const Eigen::MatrixXd& covariance() const noexcept { return covariance_; }

  Eigen::VectorXd draw(SeededRng& rng) const {
    Eigen::VectorXd z(factor_.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return factor_ * z;
  }

 private:
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd factor_;
};

/// One benchmark system: dynamics, disturbance, sampling time and the
/// admissible action box.
struct SystemSpec {
  std::string name;
  Eigen::Index state_dim = 0;
  Eigen::Index action_dim = 0;
  std::variant<LinearDynamics, VectorField> dynamics;
  NoiseSpec noise;
  double sampling_time = 0.1;
  Box action_bounds;
  /// Fixed-step RK4 substeps per sampling interval (nonlinear systems only).
  int substeps = 16;
  /// Coordinate wrapped into [-pi, pi) after each step (noise included), or -1.
  Eigen::Index wrapped_angle = -1;

  bool is_linear() const noexcept { return std::holds_alternative<LinearDynamics>(dynamics); }

  const LinearDynamics& linear() const {
    if (!is_linear()) throw InvalidArgument("system '" + name + "' is not linear time-invariant");
    return std::get<LinearDynamics>(dynamics);
  }
};

using SystemParams = std::map<std::string, double>;

/// Classical RK4 over [0, duration] with the action held constant.
inline Eigen::VectorXd integrate_rk4(const VectorField& f, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& u, double duration, int substeps) {
  detail::require(substeps >= 1, "RK4 needs at least one substep");
  const double h = duration / substeps;
  Eigen::VectorXd s = x;
  for (int k = 0; k < substeps; ++k) {
    const Eigen::VectorXd k1 = f(s, u);
    const Eigen::VectorXd k2 = f(s + 0.5 * h * k1, u);
    const Eigen::VectorXd k3 = f(s + 0.5 * h * k2, u);
    const Eigen::VectorXd k4 = f(s + h * k3, u);
    s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return s;
}

/// Zero-order-hold discretization of dx/dt = Ac x + Bc u.
inline LinearDynamics discretize(const Eigen::MatrixXd& ac, const Eigen::MatrixXd& bc,
                                 double ts) {
  const Eigen::Index n = ac.rows();
  const Eigen::Index m = bc.cols();
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = ac * ts;
  aug.topRightCorner(n, m) = bc * ts;
  const Eigen::MatrixXd e = aug.exp();
  return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

namespace systems {

/// Chain of n integrators driven at the last state. Exact discretization:
/// A(i, j) = Ts^(j-i) / (j-i)!, B(i) = Ts^(n-i) / (n-i)! (1-based i).
inline LinearDynamics integrator_matrices(Eigen::Index n, double ts) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd b(n, 1);
  auto term = [ts](Eigen::Index k) {
    double v = 1.0;
    for (Eigen::Index i = 1; i <= k; ++i) v *= ts / static_cast<double>(i);
    return v;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) a(i, j) = term(j - i);
    b(i, 0) = term(n - i);
  }
  return {a, b};
}

/// Mean motion of a circular orbit at the given altitude.
inline double orbital_rate(double altitude_km) {
  constexpr double mu = 398600.4418;       // km^3 / s^2
  constexpr double earth_radius = 6378.137;  // km
  const double r = earth_radius + altitude_km;
  return std::sqrt(mu / (r * r * r));
}

/// Clohessy-Wiltshire-Hill relative motion, state (x, y, vx, vy), input
/// thrust (Fx, Fy).
inline LinearDynamics cwh_matrices(double omega, double mass, double ts) {
  Eigen::MatrixXd ac = Eigen::MatrixXd::Zero(4, 4);
  ac(0, 2) = 1.0;
  ac(1, 3) = 1.0;
  ac(2, 0) = 3.0 * omega * omega;
  ac(2, 3) = 2.0 * omega;
  ac(3, 2) = -2.0 * omega;
  Eigen::MatrixXd bc = Eigen::MatrixXd::Zero(4, 2);
  bc(2, 0) = 1.0 / mass;
  bc(3, 1) = 1.0 / mass;
  return discretize(ac, bc, ts);
}

inline Eigen::VectorXd nonholonomic_field(const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  Eigen::VectorXd dx(3);
  dx << u[0] * std::cos(x[2]), u[0] * std::sin(x[2]), u[1];
  return dx;
}

inline Eigen::VectorXd tora_field(const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  Eigen::VectorXd dx(4);
  dx << x[1], -x[0] + 0.1 * std::sin(x[2]), x[3], u[0];
  return dx;
}

/// Saturating feedback used in place of a trained TORA controller.
inline Eigen::VectorXd tora_default_action(const Eigen::VectorXd& x) {
  Eigen::VectorXd u(1);
  u[0] = std::clamp(-0.1 * x[3] - 0.1 * x[2], -1.0, 1.0);
  return u;
}

inline Policy tora_default_policy() {
  return [](int, const Eigen::VectorXd& x) { return tora_default_action(x); };
}

}  // namespace systems

namespace detail {

class ParamReader {
 public:
  ParamReader(std::string system, const SystemParams& params)
      : system_(std::move(system)), params_(params) {}

  double get(const std::string& key, double fallback) {
    used_.push_back(key);
    auto it = params_.find(key);
    return it == params_.end() ? fallback : it->second;
  }

  void finish() const {
    for (const auto& [key, value] : params_) {
      if (std::find(used_.begin(), used_.end(), key) == used_.end())
        throw InvalidArgument("system '" + system_ + "' has no parameter '" + key + "'");
      if (!std::isfinite(value))
        throw InvalidArgument("system parameter '" + key + "' is not finite");
    }
  }

 private:
  std::string system_;
  const SystemParams& params_;
  std::vector<std::string> used_;
};

}  // namespace detail

/// Builds one of the benchmark systems: integrator, cwh, nonholonomic, tora.
///
/// Parameters (all optional):
///   common:      sampling_time, noise_variance (isotropic override)
///   integrator:  dim (default 2), Ts 0.25, Sigma 0.01 I
///   cwh:         altitude_km (850), mass (300), Ts 20 s,
///                Sigma diag(1e-4, 1e-4, 5e-8, 5e-8), actions [-0.1, 0.1]^2
///   nonholonomic: Ts 0.1, Sigma 0.01 I, actions [0.1, 1] x [-10, 10],
///                wrap_heading (0; nonzero wraps x3 into [-pi, pi))
///   tora:        Ts 0.1, Sigma 0.01 I, actions [-1, 1]
inline SystemSpec make_system(const std::string& name, const SystemParams& params = {}) {
  detail::ParamReader p(name, params);
  SystemSpec sys;
  sys.name = name;
  std::optional<double> variance;
  if (params.count("noise_variance")) variance = p.get("noise_variance", 0.0);

  if (name == "integrator") {
    const double dim = p.get("dim", 2.0);
    detail::require(dim >= 1.0 && dim == std::floor(dim), "integrator dim must be a positive integer");
    sys.state_dim = static_cast<Eigen::Index>(dim);
    sys.action_dim = 1;
    sys.sampling_time = p.get("sampling_time", 0.25);
    sys.dynamics = systems::integrator_matrices(sys.state_dim, sys.sampling_time);
    sys.noise = NoiseSpec::isotropic(sys.state_dim, variance.value_or(0.01));
    sys.action_bounds = Box::cube(1, -1.0, 1.0);
  } else if (name == "cwh") {
    sys.state_dim = 4;
    sys.action_dim = 2;
    sys.sampling_time = p.get("sampling_time", 20.0);
    const double omega = systems::orbital_rate(p.get("altitude_km", 850.0));
    const double mass = p.get("mass", 300.0);
    detail::require(mass > 0.0, "cwh mass must be positive");
    sys.dynamics = systems::cwh_matrices(omega, mass, sys.sampling_time);
    if (variance) {
      sys.noise = NoiseSpec::isotropic(4, *variance);
    } else {
      Eigen::Vector4d diag(1e-4, 1e-4, 5e-8, 5e-8);
      sys.noise = NoiseSpec(Eigen::MatrixXd(diag.asDiagonal()));
    }
    sys.action_bounds = Box::cube(2, -0.1, 0.1);
  } else if (name == "nonholonomic") {
    sys.state_dim = 3;
    sys.action_dim = 2;
    sys.sampling_time = p.get("sampling_time", 0.1);
    sys.dynamics = VectorField(systems::nonholonomic_field);
    sys.noise = NoiseSpec::isotropic(3, variance.value_or(0.01));
    sys.action_bounds = Box(Eigen::Vector2d(0.1, -10.0), Eigen::Vector2d(1.0, 10.0));
    if (p.get("wrap_heading", 0.0) != 0.0) sys.wrapped_angle = 2;
  } else if (name == "tora") {
    sys.state_dim = 4;
    sys.action_dim = 1;
    sys.sampling_time = p.get("sampling_time", 0.1);
    sys.dynamics = VectorField(systems::tora_field);
    sys.noise = NoiseSpec::isotropic(4, variance.value_or(0.01));
    sys.action_bounds = Box::cube(1, -1.0, 1.0);
  } else {
    throw InvalidArgument("unknown system '" + name +
                          "'; valid names: integrator, cwh, nonholonomic, tora");
  }
  p.finish();
  detail::require(sys.sampling_time > 0.0, "sampling_time must be positive");
  return sys;
}

/// One transition: exact map for linear systems, RK4 under zero-order hold
/// otherwise, followed by additive noise.
inline Eigen::VectorXd step(const SystemSpec& sys, const Eigen::Ref<const Eigen::VectorXd>& x,
                            const Eigen::Ref<const Eigen::VectorXd>& u, SeededRng& rng) {
  detail::require(x.size() == sys.state_dim, "step: state has dimension " +
                                                 std::to_string(x.size()) + ", expected " +
                                                 std::to_string(sys.state_dim));
  detail::require(u.size() == sys.action_dim, "step: action has dimension " +
                                                  std::to_string(u.size()) + ", expected " +
                                                  std::to_string(sys.action_dim));
  detail::require(x.allFinite() && u.allFinite(), "step: non-finite state or action");
  Eigen::VectorXd next;
  if (const auto* lin = std::get_if<LinearDynamics>(&sys.dynamics)) {
    next = lin->A * x + lin->B * u;
  } else {
    next = integrate_rk4(std::get<VectorField>(sys.dynamics), x, u, sys.sampling_time,
                         sys.substeps);
  }
  next += sys.noise.draw(rng);
  if (sys.wrapped_angle >= 0) {
    double& a = next[sys.wrapped_angle];
    constexpr double two_pi = 2.0 * std::numbers::pi;
    a -= two_pi * std::floor((a + std::numbers::pi) / two_pi);
    if (a >= std::numbers::pi) a -= two_pi;
  }
  return next;
}

/// States (N+1) x n and actions N x m of one rollout.
struct Trajectory {
  Eigen::MatrixXd states;
  Eigen::MatrixXd actions;

  Eigen::Index horizon() const noexcept { return actions.rows(); }
};

inline Trajectory simulate(const SystemSpec& sys, const Eigen::VectorXd& x0,
                           const Policy& policy, int horizon, SeededRng& rng) {
  detail::require(horizon >= 1, "simulate: horizon must be at least 1");
  detail::require(x0.size() == sys.state_dim, "simulate: initial state has wrong dimension");
  Trajectory traj{Eigen::MatrixXd(horizon + 1, sys.state_dim),
                  Eigen::MatrixXd(horizon, sys.action_dim)};
  traj.states.row(0) = x0.transpose();
  Eigen::VectorXd x = x0;
  for (int t = 0; t < horizon; ++t) {
    const Eigen::VectorXd u = policy(t, x);
    traj.actions.row(t) = u.transpose();
    x = step(sys, x, u, rng);
    traj.states.row(t + 1) = x.transpose();
  }
  return traj;
}

}  // namespace kernelctrl

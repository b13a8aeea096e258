#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <kernelctrl/kernelctrl.hpp>

namespace kernelctrl::cli {

/// Invalid configuration; the message carries "file:line: ".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Algorithm { ControlForward, ControlBackward, ReachTerminal, ReachFirst, ForwardReach, Fit };

std::string_view to_string(Algorithm a);

struct TrajectoryConfig {
  Eigen::Index count = 50;
  Box initial = Box::cube(1, 0, 0);
  std::string policy = "zero";
  Eigen::Index heldout = 50;
};

struct KernelConfig {
  KernelFamily family = KernelFamily::GaussianRBF;
  std::optional<double> sigma;  // empty: median heuristic
  std::optional<double> action_sigma;  // empty: same as sigma
  std::optional<double> lambda;
};

/// Per-time targets for the tracked state coordinates.
struct StateCostConfig {
  Eigen::VectorXd weights;                 // length n
  std::vector<Eigen::VectorXd> targets;    // N+1 entries over the tracked coordinates
  double terminal_weight = 1.0;
};

/// sum_d |abs_d y_d| + linear . y + offset <= 0, evaluated at successors.
struct ConstraintConfig {
  Eigen::VectorXd abs;
  Eigen::VectorXd linear;
  double offset = 0.0;
};

struct ControlConfig {
  StateCostConfig state;
  double action_weight = 0.0;
  std::vector<ConstraintConfig> constraints;
  Eigen::VectorXd initial_state;
  std::vector<ControlMode> modes;
};

struct GridConfig {
  Eigen::Index per_dim = 100;
  std::optional<Box> box;  // over the plotted axes; default the safe set at t = 0
  int axes[2] = {0, 1};
  Eigen::VectorXd fixed;   // remaining coordinates
};

struct ValidateConfig {
  std::int64_t trials = 0;
  Eigen::Index per_dim = 5;
};

struct ForwardConfig {
  int axes[2] = {0, 1};
  Eigen::Index per_dim = 40;
  std::vector<int> times;
  Eigen::VectorXd fixed;
  Box box = Box::cube(2, -1, 1);
};

struct BenchConfig {
  std::string mode = "size";  // size | dim
  std::vector<Eigen::Index> sizes;
  std::vector<Eigen::Index> dims;
  Eigen::Index size = 1000;
  int repeats = 3;
};

struct ScenarioConfig {
  std::string path;
  Algorithm algorithm = Algorithm::Fit;
  std::string system_name;
  SystemParams system_params;
  SystemSpec system;

  std::uint64_t seed = 0;
  Eigen::Index sample_size = 0;
  std::optional<std::string> sample_file;
  std::optional<Box> state_box;
  std::optional<Box> action_box;
  std::optional<TrajectoryConfig> trajectories;

  KernelConfig kernel;
  std::optional<ActionGrid> actions;
  int horizon = 0;
  std::optional<Tube> safe;
  std::optional<Tube> target;

  std::optional<ControlConfig> control;
  GridConfig grid;
  ValidateConfig validate;
  std::optional<ForwardConfig> forward;
  std::optional<BenchConfig> bench;

  std::string out_dir = ".";
  Eigen::Index chunk = 1024;
};

/// Parses and validates a YAML (or JSON) scenario file.
ScenarioConfig load_config(const std::string& path);

/// Builds the stage and terminal costs described by a control section.
CostSpec make_costs(const ControlConfig& control, int horizon);

}  // namespace kernelctrl::cli

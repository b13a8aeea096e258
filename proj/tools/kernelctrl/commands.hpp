#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kernelctrl/config.hpp"

namespace kernelctrl::cli {

/// Command-line overrides applied on top of a loaded config.
struct Options {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::int64_t> validate;
  std::optional<std::string> sigma;  // a bandwidth or "median"
  std::optional<Eigen::Index> chunk;
  bool quiet = false;
};

void apply_options(const Options& opts, ScenarioConfig& cfg);

/// Transition sample from sample.file or drawn from the configured boxes.
TransitionSample obtain_sample(const ScenarioConfig& cfg);

/// Bandwidth from the config, or the median heuristic over the sample states.
double resolve_sigma(const ScenarioConfig& cfg, const PointSet& states);

struct SampleResult {
  TransitionSample sample;
  std::string file;
};

struct ControlRun {
  ControlMode mode = ControlMode::Forward;
  Trajectory trajectory;
  double terminal_distance = 0.0;
  int constraint_violations = 0;
  double fit_seconds = 0.0;
  double act_seconds = 0.0;
};

struct ControlResult {
  double sigma = 0.0;
  std::vector<ControlRun> runs;
};

struct ReachResult {
  double sigma = 0.0;
  ReachProblem problem = ReachProblem::TerminalHitting;
  PointSet grid;
  Eigen::VectorXd prob;
  PointSet check_points;
  Eigen::VectorXd check_prob;
  std::vector<McReport> mc;
  double fit_seconds = 0.0;
};

struct ForwardResult {
  std::vector<double> tau;
  std::vector<double> train_inside;
  std::vector<double> heldout_inside;
  double mean_heldout = 0.0;
  double fit_seconds = 0.0;
};

struct BenchRow {
  std::string mode;
  Eigen::Index size = 0;
  Eigen::Index dim = 0;
  int repeat = 0;
  double seconds = 0.0;
};

SampleResult run_sample(const ScenarioConfig& cfg);
ControlResult run_control(const ScenarioConfig& cfg);
/// Grid evaluation, plus Monte-Carlo checks when validate.trials > 0.
ReachResult run_reach(const ScenarioConfig& cfg, bool write_grid = true);
/// Monte-Carlo checks only.
ReachResult run_validate(const ScenarioConfig& cfg);
ForwardResult run_forward_reach(const ScenarioConfig& cfg);
std::vector<BenchRow> run_bench(const ScenarioConfig& cfg);

/// Interior check points: per_dim^2 points at fractions k/(per_dim+1) of the
/// safe box at t = 0 along the grid axes.
PointSet check_points(const ScenarioConfig& cfg);

/// per_dim^2 points over a 2-D box on the given axes, other coordinates fixed.
PointSet plane_grid(const Box& box, Eigen::Index per_dim, const int (&axes)[2],
                    const Eigen::VectorXd& fixed);

}  // namespace kernelctrl::cli

#include "kernelctrl/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "kernelctrl/csv.hpp"

namespace kernelctrl::cli {

namespace {

namespace fs = std::filesystem;

// Independent random streams per purpose.
constexpr std::uint64_t kSampleStream = 1;
constexpr std::uint64_t kRolloutStream = 2;
constexpr std::uint64_t kCheckStream = 3;
constexpr std::uint64_t kHeldoutStream = 4;
constexpr std::uint64_t kBenchStream = 5;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string output_path(const ScenarioConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  return (fs::path(cfg.out_dir) / name).string();
}

std::vector<std::string> names(const std::string& prefix, Eigen::Index n) {
  std::vector<std::string> out;
  for (Eigen::Index d = 0; d < n; ++d) out.push_back(prefix + std::to_string(d));
  return out;
}

std::shared_ptr<const Embedding> fit_embedding(const ScenarioConfig& cfg, TransitionSample sample,
                                               double sigma) {
  const KernelSpec k(cfg.kernel.family, sigma);
  const KernelSpec l(cfg.kernel.family, cfg.kernel.action_sigma.value_or(sigma));
  return std::make_shared<const Embedding>(
      Embedding::fit(std::move(sample), k, l, cfg.kernel.lambda));
}

Policy trajectory_policy(const TrajectoryConfig& t, Eigen::Index action_dim) {
  if (t.policy == "tora_default") return systems::tora_default_policy();
  return [action_dim](int, const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(action_dim); };
}

}  // namespace

void apply_options(const Options& opts, ScenarioConfig& cfg) {
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.out) cfg.out_dir = *opts.out;
  if (opts.validate) {
    if (*opts.validate < 1) throw ConfigError("--validate: trial count must be at least 1");
    cfg.validate.trials = *opts.validate;
  }
  if (opts.sigma) {
    if (*opts.sigma == "median") {
      cfg.kernel.sigma.reset();
    } else {
      char* end = nullptr;
      const double v = std::strtod(opts.sigma->c_str(), &end);
      if (opts.sigma->empty() || *end != '\0' || !(v > 0.0) || !std::isfinite(v))
        throw ConfigError("--sigma: expected a positive bandwidth or 'median', got '" +
                          *opts.sigma + "'");
      cfg.kernel.sigma = v;
    }
  }
  if (opts.chunk) {
    if (*opts.chunk < 1) throw ConfigError("--chunk: must be at least 1");
    cfg.chunk = *opts.chunk;
  }
}

TransitionSample obtain_sample(const ScenarioConfig& cfg) {
  if (cfg.sample_file) {
    TransitionSample s = read_sample(*cfg.sample_file);
    if (s.state_dim() != cfg.system.state_dim || s.action_dim() != cfg.system.action_dim) {
      throw ConfigError(cfg.path + ": sample file '" + *cfg.sample_file +
                        "' has state/action dimension " + std::to_string(s.state_dim()) + "/" +
                        std::to_string(s.action_dim()) + ", system '" + cfg.system_name +
                        "' needs " + std::to_string(cfg.system.state_dim) + "/" +
                        std::to_string(cfg.system.action_dim));
    }
    return s;
  }
  if (!cfg.state_box || !cfg.action_box || cfg.sample_size < 1)
    throw ConfigError(cfg.path + ": sample needs size, state_box and action_box (or file)");
  SeededRng rng(cfg.seed, kSampleStream);
  return draw_transitions(cfg.system, *cfg.state_box, *cfg.action_box, cfg.sample_size, rng);
}

double resolve_sigma(const ScenarioConfig& cfg, const PointSet& states) {
  if (cfg.kernel.sigma) return *cfg.kernel.sigma;
  const double s = median_pairwise_distance(states);
  if (!(s > 0.0)) throw NumericalError("median heuristic gave a zero bandwidth");
  return s;
}

PointSet plane_grid(const Box& box, Eigen::Index per_dim, const int (&axes)[2],
                    const Eigen::VectorXd& fixed) {
  const ActionGrid g = grid_actions(box, static_cast<int>(per_dim));
  PointSet out(g.size(), fixed.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    out.row(i) = fixed.transpose();
    out(i, axes[0]) = g.actions(i, 0);
    out(i, axes[1]) = g.actions(i, 1);
  }
  return out;
}

PointSet check_points(const ScenarioConfig& cfg) {
  const Box& k0 = cfg.safe->at(0);
  const Eigen::Index per = cfg.validate.per_dim;
  const int a = cfg.grid.axes[0], b = cfg.grid.axes[1];
  PointSet out(per * per, cfg.system.state_dim);
  for (Eigen::Index i = 0; i < per; ++i) {
    for (Eigen::Index j = 0; j < per; ++j) {
      const double fi = static_cast<double>(i + 1) / static_cast<double>(per + 1);
      const double fj = static_cast<double>(j + 1) / static_cast<double>(per + 1);
      auto row = out.row(i * per + j);
      row = cfg.grid.fixed.transpose();
      row[a] = k0.lower[a] + fi * (k0.upper[a] - k0.lower[a]);
      row[b] = k0.lower[b] + fj * (k0.upper[b] - k0.lower[b]);
    }
  }
  return out;
}

SampleResult run_sample(const ScenarioConfig& cfg) {
  SampleResult r{obtain_sample(cfg), output_path(cfg, "sample.csv")};
  write_sample(r.file, r.sample);
  return r;
}

ControlResult run_control(const ScenarioConfig& cfg) {
  if (!cfg.control || !cfg.actions) throw ConfigError(cfg.path + ": control needs control and actions sections");
  const ControlConfig& cc = *cfg.control;
  const int n_steps = cfg.horizon;
  const CostSpec costs = make_costs(cc, n_steps);
  ControlResult result;
  TransitionSample sample = obtain_sample(cfg);
  result.sigma = resolve_sigma(cfg, sample.states);
  const auto fit_start = Clock::now();
  const auto emb = fit_embedding(cfg, std::move(sample), result.sigma);
  const double emb_seconds = seconds_since(fit_start);
  const Eigen::VectorXd& goal = cc.state.targets.back();

  CsvWriter summary(output_path(cfg, "control_summary.csv"),
                    {"mode", "terminal_distance", "constraint_violations", "fit_seconds",
                     "act_seconds"});
  for (ControlMode mode : cc.modes) {
    ControlRun run;
    run.mode = mode;
    const auto start = Clock::now();
    const Controller ctrl = mode == ControlMode::Forward
                                ? Controller::forward(emb, *cfg.actions, costs)
                                : Controller::backward(emb, *cfg.actions, costs, n_steps);
    run.fit_seconds = emb_seconds + seconds_since(start);

    // Same noise sequence for every mode.
    SeededRng rng(cfg.seed, kRolloutStream);
    Trajectory& traj = run.trajectory;
    traj.states.resize(n_steps + 1, cfg.system.state_dim);
    traj.actions.resize(n_steps, cfg.system.action_dim);
    Eigen::VectorXd x = cc.initial_state;
    traj.states.row(0) = x.transpose();
    for (int t = 0; t < n_steps; ++t) {
      const auto act_start = Clock::now();
      const Eigen::VectorXd u = ctrl.act(x, t);
      run.act_seconds += seconds_since(act_start);
      traj.actions.row(t) = u.transpose();
      x = step(cfg.system, x, u, rng);
      traj.states.row(t + 1) = x.transpose();
      for (const CostTerm& c : costs.constraints) {
        if (c.state(t + 1, x) > 0.0) {
          ++run.constraint_violations;
          break;
        }
      }
    }
    run.terminal_distance = (x.head(goal.size()) - goal).norm();

    const std::string tag = mode == ControlMode::Forward ? "forward" : "backward";
    std::vector<std::string> header{"t"};
    for (const auto& h : names("x", cfg.system.state_dim)) header.push_back(h);
    for (const auto& h : names("u", cfg.system.action_dim)) header.push_back(h);
    for (const auto& h : names("target", goal.size())) header.push_back(h);
    CsvWriter out(output_path(cfg, "trajectory_" + tag + ".csv"), header);
    for (int t = 0; t <= n_steps; ++t) {
      out.field(static_cast<long long>(t));
      for (Eigen::Index d = 0; d < cfg.system.state_dim; ++d) out.field(traj.states(t, d));
      for (Eigen::Index d = 0; d < cfg.system.action_dim; ++d) {
        if (t < n_steps) {
          out.field(traj.actions(t, d));
        } else {
          out.empty();
        }
      }
      const Eigen::VectorXd& g = cc.state.targets[static_cast<std::size_t>(t)];
      for (Eigen::Index d = 0; d < goal.size(); ++d) out.field(g[d]);
      out.end_row();
    }
    summary.field(tag).field(run.terminal_distance)
        .field(static_cast<long long>(run.constraint_violations))
        .field(run.fit_seconds).field(run.act_seconds);
    summary.end_row();
    result.runs.push_back(std::move(run));
  }
  return result;
}

namespace {

ReachResult reach_impl(const ScenarioConfig& cfg, bool grid, bool checks) {
  if (!cfg.safe || !cfg.target || !cfg.actions)
    throw ConfigError(cfg.path + ": reach needs tubes and actions sections");
  if (cfg.algorithm != Algorithm::ReachTerminal && cfg.algorithm != Algorithm::ReachFirst)
    throw ConfigError(cfg.path + ": algorithm must be reach-tht or reach-fht for this command");
  ReachResult r;
  r.problem = cfg.algorithm == Algorithm::ReachFirst ? ReachProblem::FirstHitting
                                                     : ReachProblem::TerminalHitting;
  TransitionSample sample = obtain_sample(cfg);
  r.sigma = resolve_sigma(cfg, sample.states);
  const auto start = Clock::now();
  const auto emb = fit_embedding(cfg, std::move(sample), r.sigma);
  const SRModel model =
      SRModel::fit(emb, *cfg.actions, *cfg.safe, *cfg.target, cfg.horizon, r.problem);
  r.fit_seconds = seconds_since(start);
  const std::string tag = r.problem == ReachProblem::TerminalHitting ? "tht" : "fht";
  const int a = cfg.grid.axes[0], b = cfg.grid.axes[1];

  if (grid) {
    r.grid = plane_grid(*cfg.grid.box, cfg.grid.per_dim, cfg.grid.axes, cfg.grid.fixed);
    r.prob = model.predict(r.grid, cfg.chunk);
    CsvWriter out(output_path(cfg, "reach_" + tag + ".csv"),
                  {"x" + std::to_string(a), "x" + std::to_string(b), "prob"});
    for (Eigen::Index i = 0; i < r.grid.rows(); ++i) {
      out.field(r.grid(i, a)).field(r.grid(i, b)).field(r.prob[i]);
      out.end_row();
    }
  }
  if (checks && cfg.validate.trials > 0) {
    r.check_points = check_points(cfg);
    r.check_prob = model.predict(r.check_points, cfg.chunk);
    const Policy policy = model.greedy_policy();
    const SeededRng base(cfg.seed, kCheckStream);
    std::vector<std::string> header = names("x", cfg.system.state_dim);
    for (const char* h : {"prob", "mc", "mc_half_width"}) header.emplace_back(h);
    CsvWriter out(output_path(cfg, "reach_" + tag + "_validation.csv"), header);
    for (Eigen::Index i = 0; i < r.check_points.rows(); ++i) {
      const Eigen::VectorXd x0 = r.check_points.row(i).transpose();
      r.mc.push_back(mc_safety(cfg.system, policy, x0, *cfg.safe, *cfg.target, cfg.horizon,
                               r.problem, cfg.validate.trials,
                               base.derive(static_cast<std::uint64_t>(i))));
      for (Eigen::Index d = 0; d < x0.size(); ++d) out.field(x0[d]);
      out.field(r.check_prob[i]).field(r.mc.back().estimate).field(r.mc.back().half_width);
      out.end_row();
    }
  }
  return r;
}

}  // namespace

ReachResult run_reach(const ScenarioConfig& cfg, bool write_grid) {
  return reach_impl(cfg, write_grid, true);
}

ReachResult run_validate(const ScenarioConfig& cfg) {
  if (cfg.validate.trials < 1)
    throw ConfigError(cfg.path + ": validate needs validate.trials or --validate K");
  return reach_impl(cfg, false, true);
}

ForwardResult run_forward_reach(const ScenarioConfig& cfg) {
  if (!cfg.trajectories || !cfg.forward)
    throw ConfigError(cfg.path + ": forward-reach needs sample.trajectories");
  const TrajectoryConfig& tc = *cfg.trajectories;
  const ForwardConfig& fc = *cfg.forward;
  const Policy policy = trajectory_policy(tc, cfg.system.action_dim);
  const auto train = draw_trajectories(cfg.system, tc.initial, policy, cfg.horizon, tc.count,
                                       SeededRng(cfg.seed, kSampleStream));
  const auto heldout = draw_trajectories(cfg.system, tc.initial, policy, cfg.horizon,
                                         tc.heldout, SeededRng(cfg.seed, kHeldoutStream));
  const Eigen::Index n = cfg.system.state_dim;
  auto states_at = [n](const std::vector<Trajectory>& trajs, int t) {
    PointSet p(static_cast<Eigen::Index>(trajs.size()), n);
    for (std::size_t i = 0; i < trajs.size(); ++i)
      p.row(static_cast<Eigen::Index>(i)) = trajs[i].states.row(t);
    return p;
  };
  auto inside_fraction = [](const SupportClassifier& cls, const PointSet& p) {
    Eigen::Index hits = 0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) hits += cls.classify(p.row(i).transpose()).inside;
    return static_cast<double>(hits) / static_cast<double>(p.rows());
  };

  ForwardResult r;
  const int a = fc.axes[0], b = fc.axes[1];
  CsvWriter summary(output_path(cfg, "forward_summary.csv"),
                    {"t", "sigma", "tau", "train_inside", "heldout_inside"});
  CsvWriter grid(output_path(cfg, "forward_grid.csv"),
                 {"t", "x" + std::to_string(a), "x" + std::to_string(b), "score", "inside"});
  const PointSet plane = plane_grid(fc.box, fc.per_dim, fc.axes, fc.fixed);
  for (int t = 0; t <= cfg.horizon; ++t) {
    const PointSet pts = states_at(train, t);
    const double sigma = cfg.kernel.sigma ? *cfg.kernel.sigma : median_pairwise_distance(pts);
    const auto start = Clock::now();
    const SupportClassifier cls = SupportClassifier::fit(pts, sigma, cfg.kernel.lambda);
    r.fit_seconds += seconds_since(start);
    r.tau.push_back(cls.threshold());
    r.train_inside.push_back(inside_fraction(cls, pts));
    r.heldout_inside.push_back(inside_fraction(cls, states_at(heldout, t)));
    summary.field(static_cast<long long>(t)).field(sigma).field(r.tau.back())
        .field(r.train_inside.back()).field(r.heldout_inside.back());
    summary.end_row();
    if (std::find(fc.times.begin(), fc.times.end(), t) != fc.times.end()) {
      for (Eigen::Index i = 0; i < plane.rows(); ++i) {
        const Classification c = cls.classify(plane.row(i).transpose());
        grid.field(static_cast<long long>(t)).field(plane(i, a)).field(plane(i, b))
            .field(c.score).field(static_cast<long long>(c.inside));
        grid.end_row();
      }
    }
  }
  double total = 0.0;
  for (double h : r.heldout_inside) total += h;
  r.mean_heldout = total / static_cast<double>(r.heldout_inside.size());
  CsvWriter report(output_path(cfg, "forward_report.csv"),
                   {"mean_heldout_inside", "heldout_at_least_90", "fit_seconds"});
  report.field(r.mean_heldout).field(static_cast<long long>(r.mean_heldout >= 0.9))
      .field(r.fit_seconds);
  report.end_row();
  return r;
}

std::vector<BenchRow> run_bench(const ScenarioConfig& cfg) {
  if (!cfg.bench) throw ConfigError(cfg.path + ": bench needs a bench section");
  if (!cfg.state_box || !cfg.action_box)
    throw ConfigError(cfg.path + ": bench needs sample.state_box and sample.action_box");
  const BenchConfig& bc = *cfg.bench;
  const SeededRng base(cfg.seed, kBenchStream);
  std::vector<BenchRow> rows;

  auto timed_run = [&](const TransitionSample& sample) {
    const double sigma = resolve_sigma(cfg, sample.states);
    const auto start = Clock::now();
    const auto emb = fit_embedding(cfg, sample, sigma);
    switch (cfg.algorithm) {
      case Algorithm::ReachTerminal:
      case Algorithm::ReachFirst:
        SRModel::fit(emb, *cfg.actions, *cfg.safe, *cfg.target, cfg.horizon,
                     cfg.algorithm == Algorithm::ReachFirst ? ReachProblem::FirstHitting
                                                            : ReachProblem::TerminalHitting);
        break;
      case Algorithm::ControlBackward:
        Controller::backward(emb, *cfg.actions, make_costs(*cfg.control, cfg.horizon),
                             cfg.horizon);
        break;
      case Algorithm::ControlForward:
        Controller::forward(emb, *cfg.actions, make_costs(*cfg.control, cfg.horizon))
            .act(cfg.control->initial_state, 0);
        break;
      default:
        break;
    }
    return seconds_since(start);
  };

  if (bc.mode == "size") {
    for (Eigen::Index m : bc.sizes) {
      for (int rep = 0; rep < bc.repeats; ++rep) {
        SeededRng rng = base.derive(static_cast<std::uint64_t>(m) * 1000u + static_cast<std::uint64_t>(rep));
        const TransitionSample s = draw_transitions(cfg.system, *cfg.state_box, *cfg.action_box, m, rng);
        rows.push_back({"size", m, cfg.system.state_dim, rep, timed_run(s)});
      }
    }
  } else {
    for (Eigen::Index dim : bc.dims) {
      SystemParams params = cfg.system_params;
      params["dim"] = static_cast<double>(dim);
      const SystemSpec sys = make_system("integrator", params);
      const Box xbox = Box::cube(dim, cfg.state_box->lower[0], cfg.state_box->upper[0]);
      for (int rep = 0; rep < bc.repeats; ++rep) {
        SeededRng rng = base.derive(static_cast<std::uint64_t>(dim) * 1000u + static_cast<std::uint64_t>(rep));
        const TransitionSample s = draw_transitions(sys, xbox, *cfg.action_box, bc.size, rng);
        rows.push_back({"dim", bc.size, dim, rep, timed_run(s)});
      }
    }
  }
  CsvWriter out(output_path(cfg, "bench_" + bc.mode + ".csv"),
                {"mode", "algorithm", "M", "n", "repeat", "seconds"});
  for (const BenchRow& r : rows) {
    out.field(r.mode).field(std::string(to_string(cfg.algorithm)))
        .field(static_cast<long long>(r.size)).field(static_cast<long long>(r.dim))
        .field(static_cast<long long>(r.repeat)).field(r.seconds);
    out.end_row();
  }
  return rows;
}

}  // namespace kernelctrl::cli

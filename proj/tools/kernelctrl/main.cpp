#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "kernelctrl/commands.hpp"
#include "kernelctrl/csv.hpp"

namespace {

using namespace kernelctrl;
using namespace kernelctrl::cli;

enum Exit { kOk = 0, kConfig = 2, kRuntime = 3, kInfeasible = 4 };

std::string mode_name(ControlMode m) { return m == ControlMode::Forward ? "forward" : "backward"; }

int dispatch(const std::string& command, const std::string& config_path, const Options& opts) {
  ScenarioConfig cfg = load_config(config_path);
  apply_options(opts, cfg);
  if (command == "sample") {
    const auto r = run_sample(cfg);
    std::cout << "wrote " << r.sample.size() << " transitions to " << r.file << "\n";
  } else if (command == "control") {
    const auto r = run_control(cfg);
    std::cout << "sigma " << format_number(r.sigma) << "\n";
    for (const auto& run : r.runs) {
      std::cout << mode_name(run.mode) << ": terminal distance " << format_number(run.terminal_distance)
                << ", constraint violations " << run.constraint_violations << ", fit "
                << run.fit_seconds << " s, act " << run.act_seconds << " s\n";
    }
  } else if (command == "reach" || command == "validate") {
    const auto r = command == "reach" ? run_reach(cfg) : run_validate(cfg);
    std::cout << to_string(r.problem) << " fit " << r.fit_seconds << " s, sigma "
              << format_number(r.sigma) << "\n";
    if (r.prob.size() > 0) {
      std::cout << "grid " << r.prob.size() << " points, probability range ["
                << r.prob.minCoeff() << ", " << r.prob.maxCoeff() << "]\n";
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < r.mc.size(); ++i)
      worst = std::max(worst, std::abs(r.check_prob[static_cast<Eigen::Index>(i)] - r.mc[i].estimate));
    if (!r.mc.empty())
      std::cout << "monte-carlo at " << r.mc.size() << " points, max |prob - mc| " << worst << "\n";
  } else if (command == "forward-reach") {
    const auto r = run_forward_reach(cfg);
    double train = 1.0;
    for (double v : r.train_inside) train = std::min(train, v);
    std::cout << "classifiers " << r.tau.size() << ", min training containment " << train
              << ", mean held-out containment " << r.mean_heldout
              << (r.mean_heldout >= 0.9 ? " (>= 0.9)" : " (< 0.9)") << "\n";
  } else if (command == "bench") {
    const auto rows = run_bench(cfg);
    for (const auto& row : rows)
      std::cout << row.mode << " M=" << row.size << " n=" << row.dim << " rep " << row.repeat
                << ": " << row.seconds << " s\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kernelctrl: kernel-embedding control and reachability"};
  app.require_subcommand(1);
  std::string config;
  Options opts;
  std::string sigma;
  std::uint64_t seed = 0;
  std::int64_t validate = 0;
  Eigen::Index chunk = 0;
  std::string out;

  const std::pair<const char*, const char*> commands[] = {
      {"sample", "draw a transition sample and write it as CSV"},
      {"control", "run the forward and/or backward controller on the true system"},
      {"reach", "stochastic reachability probabilities on an evaluation grid"},
      {"forward-reach", "per-step support classifiers from trajectory data"},
      {"validate", "Monte-Carlo checks of reachability predictions"},
      {"bench", "fit timings across sample sizes or state dimensions"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "scenario file (YAML or JSON)")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--sigma", sigma, "kernel bandwidth or 'median'");
    sub->add_option("--chunk", chunk, "maximum query block size");
    if (std::string(name) == "reach" || std::string(name) == "validate")
      sub->add_option("--validate", validate, "Monte-Carlo trials per check point");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  const CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed")) opts.seed = seed;
  if (sub->count("--out")) opts.out = out;
  if (sub->count("--sigma")) opts.sigma = sigma;
  if (sub->count("--chunk")) opts.chunk = chunk;
  if (sub->get_option_no_throw("--validate") && sub->count("--validate")) opts.validate = validate;

  try {
    return dispatch(sub->get_name(), config, opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
}

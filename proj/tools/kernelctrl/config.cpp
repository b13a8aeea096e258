#include "kernelctrl/config.hpp"

#include <filesystem>
#include <set>

#include <yaml-cpp/yaml.h>

namespace kernelctrl::cli {

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::ControlForward: return "control-fwd";
    case Algorithm::ControlBackward: return "control-bwd";
    case Algorithm::ReachTerminal: return "reach-tht";
    case Algorithm::ReachFirst: return "reach-fht";
    case Algorithm::ForwardReach: return "forward-reach";
    case Algorithm::Fit: return "fit";
  }
  return "?";
}

namespace {

/// A YAML node together with its dotted key path, for error messages.
class Field {
 public:
  Field(YAML::Node node, std::string key, const std::string* file, int fallback_line)
      : node_(std::move(node)), key_(std::move(key)), file_(file), fallback_(fallback_line) {}

  bool present() const { return node_.IsDefined() && !node_.IsNull(); }
  const std::string& key() const { return key_; }

  int line() const {
    if (!node_.IsDefined()) return fallback_;
    const int l = node_.Mark().line;
    return l >= 0 ? l + 1 : fallback_;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(*file_ + ":" + std::to_string(line()) + ": '" + key_ + "' " + msg);
  }

  Field operator[](const std::string& name) const {
    if (present() && !node_.IsMap()) fail("must be a mapping");
    YAML::Node child = present() ? node_[name] : YAML::Node(YAML::NodeType::Undefined);
    return Field(child, key_.empty() ? name : key_ + "." + name, file_, line());
  }

  Field at(std::size_t i) const {
    return Field(node_[i], key_ + "[" + std::to_string(i) + "]", file_, line());
  }

  std::size_t size() const {
    if (!node_.IsSequence()) fail("must be a list");
    return node_.size();
  }

  bool is_sequence() const { return node_.IsSequence(); }
  bool is_map() const { return node_.IsMap(); }

  void allow_keys(std::initializer_list<const char*> keys) const {
    if (!present()) return;
    if (!node_.IsMap()) fail("must be a mapping");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& kv : node_) {
      const auto name = kv.first.as<std::string>();
      if (!allowed.count(name)) {
        Field(kv.first, key_.empty() ? name : key_ + "." + name, file_, line())
            .fail("is not a recognized key");
      }
    }
  }

  template <typename T>
  T as() const {
    if (!present()) fail("is required");
    if (!node_.IsScalar()) fail("must be a scalar");
    try {
      return node_.as<T>();
    } catch (const YAML::Exception&) {
      fail("has an invalid value '" + node_.Scalar() + "'");
    }
  }

  template <typename T>
  T get(const T& fallback) const {
    return present() ? as<T>() : fallback;
  }

  double number() const {
    const double v = as<double>();
    if (!std::isfinite(v)) fail("must be finite");
    return v;
  }

  double positive() const {
    const double v = number();
    if (v <= 0.0) fail("must be positive");
    return v;
  }

  long long count(long long min) const {
    const auto v = as<long long>();
    if (v < min) fail("must be at least " + std::to_string(min));
    return v;
  }

  /// A list of numbers, or a scalar broadcast to `dim` entries when dim > 0.
  Eigen::VectorXd vector(Eigen::Index dim) const {
    if (!present()) fail("is required");
    if (node_.IsScalar()) {
      if (dim <= 0) fail("must be a list");
      return Eigen::VectorXd::Constant(dim, as_infinite());
    }
    const std::size_t n = size();
    if (dim > 0 && static_cast<Eigen::Index>(n) != dim)
      fail("has " + std::to_string(n) + " entries, expected " + std::to_string(dim));
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = at(i).number();
    return v;
  }

  Box box(Eigen::Index dim) const {
    allow_keys({"lower", "upper"});
    if (!present()) fail("is required");
    try {
      return Box((*this)["lower"].vector(dim), (*this)["upper"].vector(dim));
    } catch (const InvalidArgument& e) {
      fail(std::string("is not a valid box: ") + e.what());
    }
  }

 private:
  double as_infinite() const {
    const std::string s = node_.Scalar();
    if (s == "inf" || s == ".inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf" || s == "-.inf") return -std::numeric_limits<double>::infinity();
    return number();
  }

  YAML::Node node_;
  std::string key_;
  const std::string* file_;
  int fallback_;
};

Algorithm parse_algorithm(const Field& f) {
  const auto s = f.as<std::string>();
  if (s == "control-fwd") return Algorithm::ControlForward;
  if (s == "control-bwd") return Algorithm::ControlBackward;
  if (s == "reach-tht") return Algorithm::ReachTerminal;
  if (s == "reach-fht") return Algorithm::ReachFirst;
  if (s == "forward-reach") return Algorithm::ForwardReach;
  if (s == "fit") return Algorithm::Fit;
  f.fail("must be one of control-fwd, control-bwd, reach-tht, reach-fht, forward-reach, fit");
}

Tube parse_tube(const Field& f, Eigen::Index dim, int horizon) {
  if (f.is_sequence()) {
    const std::size_t n = f.size();
    if (static_cast<int>(n) < horizon + 1)
      f.fail("lists " + std::to_string(n) + " sets, need N+1 = " + std::to_string(horizon + 1));
    Tube t;
    for (std::size_t i = 0; i < n; ++i) t.sets.push_back(f.at(i).box(dim));
    return t;
  }
  return Tube::constant(f.box(dim), horizon);
}

void parse_axes(const Field& f, int (&axes)[2], Eigen::Index dim) {
  if (!f.present()) return;
  const Eigen::VectorXd v = f.vector(2);
  for (int i = 0; i < 2; ++i) {
    if (v[i] != std::floor(v[i]) || v[i] < 0 || v[i] >= static_cast<double>(dim))
      f.fail("entries must be coordinate indices below " + std::to_string(dim));
    axes[i] = static_cast<int>(v[i]);
  }
  if (axes[0] == axes[1]) f.fail("must name two different coordinates");
}

std::vector<Eigen::VectorXd> parse_targets(const Field& f, Eigen::Index dim, int horizon) {
  f.allow_keys({"weights", "target", "targets", "v_shape", "terminal_weight"});
  const int given = f["target"].present() + f["targets"].present() + f["v_shape"].present();
  if (given != 1) f.fail("needs exactly one of target, targets, v_shape");
  std::vector<Eigen::VectorXd> out;
  if (f["target"].present()) {
    const Eigen::VectorXd g = f["target"].vector(0);
    if (g.size() > dim) f["target"].fail("is longer than the state dimension");
    out.assign(static_cast<std::size_t>(horizon + 1), g);
  } else if (f["targets"].present()) {
    const Field list = f["targets"];
    if (static_cast<int>(list.size()) != horizon + 1)
      list.fail("must list N+1 = " + std::to_string(horizon + 1) + " targets");
    for (std::size_t i = 0; i < list.size(); ++i) {
      out.push_back(list.at(i).vector(i == 0 ? 0 : out.front().size()));
      if (out.back().size() > dim) list.at(i).fail("is longer than the state dimension");
    }
  } else {
    const Field v = f["v_shape"];
    v.allow_keys({"start", "vertex", "end"});
    const Eigen::VectorXd a = v["start"].vector(0);
    if (a.size() > dim) v["start"].fail("is longer than the state dimension");
    const Eigen::VectorXd b = v["vertex"].vector(a.size());
    const Eigen::VectorXd c = v["end"].vector(a.size());
    const double half = horizon / 2.0;
    for (int t = 0; t <= horizon; ++t) {
      if (t <= half) {
        out.push_back(a + (b - a) * (t / half));
      } else {
        out.push_back(b + (c - b) * ((t - half) / (horizon - half)));
      }
    }
  }
  return out;
}

ControlConfig parse_control(const Field& f, Eigen::Index n, Eigen::Index m, int horizon,
                            Algorithm algorithm) {
  f.allow_keys({"initial_state", "modes", "state_cost", "action_weight", "constraints"});
  ControlConfig c;
  c.initial_state = f["initial_state"].vector(n);
  const Field sc = f["state_cost"];
  if (!sc.present()) sc.fail("is required");
  c.state.targets = parse_targets(sc, n, horizon);
  c.state.weights = sc["weights"].present() ? sc["weights"].vector(n) : Eigen::VectorXd::Ones(n);
  if ((c.state.weights.array() < 0).any()) sc["weights"].fail("must be non-negative");
  c.state.terminal_weight = sc["terminal_weight"].present() ? sc["terminal_weight"].number() : 1.0;
  if (c.state.terminal_weight < 0) sc["terminal_weight"].fail("must be non-negative");
  c.action_weight = f["action_weight"].present() ? f["action_weight"].number() : 0.0;
  if (c.action_weight < 0) f["action_weight"].fail("must be non-negative");
  (void)m;
  const Field cons = f["constraints"];
  if (cons.present()) {
    for (std::size_t i = 0; i < cons.size(); ++i) {
      const Field r = cons.at(i);
      r.allow_keys({"abs", "linear", "offset"});
      ConstraintConfig cc;
      cc.abs = r["abs"].present() ? r["abs"].vector(n) : Eigen::VectorXd::Zero(n);
      cc.linear = r["linear"].present() ? r["linear"].vector(n) : Eigen::VectorXd::Zero(n);
      cc.offset = r["offset"].present() ? r["offset"].number() : 0.0;
      c.constraints.push_back(cc);
    }
  }
  const Field modes = f["modes"];
  if (modes.present()) {
    for (std::size_t i = 0; i < modes.size(); ++i) {
      const auto s = modes.at(i).as<std::string>();
      if (s == "forward") {
        c.modes.push_back(ControlMode::Forward);
      } else if (s == "backward") {
        c.modes.push_back(ControlMode::Backward);
      } else {
        modes.at(i).fail("must be forward or backward");
      }
    }
    if (c.modes.empty()) modes.fail("must not be empty");
  } else {
    c.modes.push_back(algorithm == Algorithm::ControlBackward ? ControlMode::Backward
                                                              : ControlMode::Forward);
  }
  return c;
}

}  // namespace

ScenarioConfig load_config(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw ConfigError(path + ":0: cannot read file");
  } catch (const YAML::ParserException& e) {
    throw ConfigError(path + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  ScenarioConfig cfg;
  cfg.path = path;
  const Field top(root, "", &cfg.path, 1);
  if (!root.IsMap()) top.fail("document must be a mapping");
  top.allow_keys({"algorithm", "seed", "system", "sample", "kernel", "actions", "horizon", "tubes",
                  "control", "grid", "validate", "forward_reach", "bench", "output", "chunk"});

  cfg.algorithm = parse_algorithm(top["algorithm"]);
  cfg.seed = top["seed"].get<std::uint64_t>(0);
  cfg.chunk = top["chunk"].present() ? top["chunk"].count(1) : 1024;

  // system
  const Field sys = top["system"];
  sys.allow_keys({"name", "params"});
  cfg.system_name = sys["name"].as<std::string>();
  const Field params = sys["params"];
  if (params.present()) {
    params.allow_keys(
        {"sampling_time", "noise_variance", "dim", "altitude_km", "mass", "wrap_heading"});
    for (const char* k :
         {"sampling_time", "noise_variance", "dim", "altitude_km", "mass", "wrap_heading"})
      if (params[k].present()) cfg.system_params[k] = params[k].number();
  }
  try {
    cfg.system = make_system(cfg.system_name, cfg.system_params);
  } catch (const InvalidArgument& e) {
    sys.fail(e.what());
  }
  const Eigen::Index n = cfg.system.state_dim;
  const Eigen::Index m = cfg.system.action_dim;

  // horizon
  const Field horizon = top["horizon"];
  if (horizon.present()) {
    cfg.horizon = static_cast<int>(horizon.as<long long>());
    if (cfg.horizon < 1) horizon.fail("must be at least 1");
  }
  const bool needs_horizon = cfg.algorithm != Algorithm::Fit;
  if (needs_horizon && cfg.horizon < 1) horizon.fail("is required for " + std::string(to_string(cfg.algorithm)));

  // sample
  const Field sample = top["sample"];
  sample.allow_keys({"size", "file", "state_box", "action_box", "trajectories"});
  if (sample["file"].present()) {
    std::filesystem::path p = sample["file"].as<std::string>();
    if (p.is_relative()) p = std::filesystem::path(path).parent_path() / p;
    cfg.sample_file = p.string();
  }
  if (sample["size"].present()) cfg.sample_size = sample["size"].count(1);
  if (sample["state_box"].present()) cfg.state_box = sample["state_box"].box(n);
  if (sample["action_box"].present()) cfg.action_box = sample["action_box"].box(m);
  const Field traj = sample["trajectories"];
  if (traj.present()) {
    traj.allow_keys({"count", "initial_box", "policy", "heldout"});
    TrajectoryConfig t;
    t.count = traj["count"].count(1);
    t.initial = traj["initial_box"].box(n);
    t.policy = traj["policy"].get<std::string>("zero");
    if (t.policy != "zero" && t.policy != "tora_default")
      traj["policy"].fail("must be zero or tora_default");
    if (t.policy == "tora_default" && cfg.system_name != "tora")
      traj["policy"].fail("tora_default applies only to the tora system");
    t.heldout = traj["heldout"].present() ? traj["heldout"].count(1) : 50;
    cfg.trajectories = t;
  }
  if (cfg.algorithm == Algorithm::ForwardReach) {
    if (!cfg.trajectories) traj.fail("is required for forward-reach");
  } else if (cfg.algorithm != Algorithm::Fit && !cfg.sample_file) {
    if (!sample["size"].present()) sample["size"].fail("is required unless sample.file is given");
    if (!cfg.state_box) sample["state_box"].fail("is required unless sample.file is given");
    if (!cfg.action_box) sample["action_box"].fail("is required unless sample.file is given");
  }

  // kernel
  const Field kernel = top["kernel"];
  kernel.allow_keys({"family", "sigma", "action_sigma", "lambda"});
  const auto family = kernel["family"].get<std::string>("gaussian");
  if (family == "gaussian") {
    cfg.kernel.family = KernelFamily::GaussianRBF;
  } else if (family == "abel") {
    cfg.kernel.family = KernelFamily::Abel;
  } else {
    kernel["family"].fail("must be gaussian or abel");
  }
  if (kernel["sigma"].present()) {
    if (kernel["sigma"].as<std::string>() != "median") cfg.kernel.sigma = kernel["sigma"].positive();
  } else {
    kernel["sigma"].fail("is required (a bandwidth or 'median')");
  }
  if (kernel["action_sigma"].present()) cfg.kernel.action_sigma = kernel["action_sigma"].positive();
  if (kernel["lambda"].present()) cfg.kernel.lambda = kernel["lambda"].positive();
  if (cfg.algorithm == Algorithm::ForwardReach && cfg.kernel.family != KernelFamily::Abel)
    kernel["family"].fail("must be abel for forward-reach");

  // actions
  const Field actions = top["actions"];
  actions.allow_keys({"box", "per_dim"});
  if (actions.present()) {
    const Box b = actions["box"].box(m);
    const auto per = actions["per_dim"].count(1);
    try {
      cfg.actions = grid_actions(b, static_cast<int>(per));
    } catch (const InvalidArgument& e) {
      actions.fail(e.what());
    }
  }
  const bool needs_actions = cfg.algorithm == Algorithm::ControlForward ||
                             cfg.algorithm == Algorithm::ControlBackward ||
                             cfg.algorithm == Algorithm::ReachTerminal ||
                             cfg.algorithm == Algorithm::ReachFirst;
  if (needs_actions && !cfg.actions) actions.fail("is required for " + std::string(to_string(cfg.algorithm)));

  // tubes
  const Field tubes = top["tubes"];
  tubes.allow_keys({"safe", "target"});
  const bool reach = cfg.algorithm == Algorithm::ReachTerminal || cfg.algorithm == Algorithm::ReachFirst;
  if (tubes.present() || reach) {
    if (!tubes.present()) tubes.fail("is required for " + std::string(to_string(cfg.algorithm)));
    if (cfg.horizon < 1) horizon.fail("is required with tubes");
    cfg.safe = parse_tube(tubes["safe"], n, cfg.horizon);
    cfg.target = parse_tube(tubes["target"], n, cfg.horizon);
  }

  // control
  const Field control = top["control"];
  const bool ctrl = cfg.algorithm == Algorithm::ControlForward || cfg.algorithm == Algorithm::ControlBackward;
  if (ctrl && !control.present()) control.fail("is required for " + std::string(to_string(cfg.algorithm)));
  if (control.present()) cfg.control = parse_control(control, n, m, cfg.horizon, cfg.algorithm);

  // evaluation grid
  const Field grid = top["grid"];
  grid.allow_keys({"per_dim", "box", "axes", "fixed"});
  cfg.grid.per_dim = grid["per_dim"].present() ? grid["per_dim"].count(1) : 100;
  parse_axes(grid["axes"], cfg.grid.axes, n);
  if (grid["box"].present()) cfg.grid.box = grid["box"].box(2);
  cfg.grid.fixed = grid["fixed"].present() ? grid["fixed"].vector(n) : Eigen::VectorXd::Zero(n);
  if (reach && !cfg.grid.box) {
    const Box& k0 = cfg.safe->at(0);
    const Eigen::Vector2d lo(k0.lower[cfg.grid.axes[0]], k0.lower[cfg.grid.axes[1]]);
    const Eigen::Vector2d hi(k0.upper[cfg.grid.axes[0]], k0.upper[cfg.grid.axes[1]]);
    if (!lo.allFinite() || !hi.allFinite()) grid["box"].fail("is required when the safe set is unbounded");
    cfg.grid.box = Box(lo, hi);
  }

  const Field val = top["validate"];
  val.allow_keys({"trials", "per_dim"});
  cfg.validate.trials = val["trials"].present() ? val["trials"].count(0) : 0;
  cfg.validate.per_dim = val["per_dim"].present() ? val["per_dim"].count(1) : 5;

  const Field fwd = top["forward_reach"];
  fwd.allow_keys({"axes", "per_dim", "times", "fixed", "box"});
  if (fwd.present() || cfg.algorithm == Algorithm::ForwardReach) {
    ForwardConfig f;
    parse_axes(fwd["axes"], f.axes, n);
    f.per_dim = fwd["per_dim"].present() ? fwd["per_dim"].count(1) : 40;
    f.fixed = fwd["fixed"].present() ? fwd["fixed"].vector(n) : Eigen::VectorXd::Zero(n);
    if (fwd["box"].present()) f.box = fwd["box"].box(2);
    if (fwd["times"].present()) {
      const Eigen::VectorXd t = fwd["times"].vector(0);
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        if (t[i] != std::floor(t[i]) || t[i] < 0 || t[i] > cfg.horizon)
          fwd["times"].fail("entries must be integers in [0, N]");
        f.times.push_back(static_cast<int>(t[i]));
      }
    } else {
      for (int t = 0; t <= cfg.horizon; t += std::max(1, cfg.horizon / 4)) f.times.push_back(t);
    }
    cfg.forward = f;
  }

  const Field bench = top["bench"];
  bench.allow_keys({"mode", "sizes", "dims", "size", "repeats"});
  if (bench.present()) {
    BenchConfig b;
    b.mode = bench["mode"].get<std::string>("size");
    if (b.mode != "size" && b.mode != "dim") bench["mode"].fail("must be size or dim");
    auto counts = [](const Field& f) {
      std::vector<Eigen::Index> out;
      for (std::size_t i = 0; i < f.size(); ++i) out.push_back(f.at(i).count(1));
      return out;
    };
    if (b.mode == "size") {
      b.sizes = counts(bench["sizes"]);
      if (b.sizes.empty()) bench["sizes"].fail("must not be empty");
    } else {
      b.dims = counts(bench["dims"]);
      if (b.dims.empty()) bench["dims"].fail("must not be empty");
      if (cfg.system_name != "integrator") bench["mode"].fail("dim sweeps use the integrator system");
      if (cfg.algorithm != Algorithm::Fit) bench["mode"].fail("dim sweeps time the fit only");
    }
    b.size = bench["size"].present() ? bench["size"].count(1) : 1000;
    b.repeats = static_cast<int>(bench["repeats"].present() ? bench["repeats"].count(1) : 3);
    cfg.bench = b;
  }

  const Field output = top["output"];
  output.allow_keys({"dir"});
  cfg.out_dir = output["dir"].get<std::string>(".");
  return cfg;
}

CostSpec make_costs(const ControlConfig& control, int horizon) {
  CostSpec costs;
  const auto state = control.state;
  costs.objective.state = [state, horizon](int t, const Eigen::VectorXd& y) {
    const auto ti = static_cast<std::size_t>(std::clamp(t, 0, horizon));
    const Eigen::VectorXd& g = state.targets[ti];
    double v = 0.0;
    for (Eigen::Index d = 0; d < y.size(); ++d) {
      const double diff = d < g.size() ? y[d] - g[d] : y[d];
      v += state.weights[d] * diff * diff;
    }
    return t >= horizon ? state.terminal_weight * v : v;
  };
  if (control.action_weight > 0.0) {
    costs.objective.action = [w = control.action_weight](int, const Eigen::VectorXd& u) {
      return w * u.squaredNorm();
    };
  }
  for (const ConstraintConfig& c : control.constraints) {
    costs.constraints.push_back(
        {[c](int, const Eigen::VectorXd& y) {
           return c.abs.cwiseProduct(y).cwiseAbs().sum() + c.linear.dot(y) + c.offset;
         },
         nullptr});
  }
  return costs;
}

}  // namespace kernelctrl::cli

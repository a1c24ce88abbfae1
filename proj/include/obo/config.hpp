#ifndef OBO_CONFIG_HPP
#define OBO_CONFIG_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "obo/constants.hpp"
#include "obo/metrics.hpp"
#include "obo/oracle.hpp"
#include "obo/problems/block_sigmoid.hpp"
#include "obo/problems/drifting_quadratic.hpp"
#include "obo/problems/hyper_cleaning.hpp"
#include "obo/problems/window_adversary.hpp"

namespace obo {

using Json = nlohmann::ordered_json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace cfg {

inline const Json& require(const Json& j, const std::string& key,
                           const std::string& where) {
  if (!j.contains(key))
    throw ConfigError("missing field '" + key + "' in " + where);
  return j.at(key);
}

template <typename T>
T get_or(const Json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("field '" + key + "' has the wrong type");
  }
}

template <typename T>
T get(const Json& j, const std::string& key, const std::string& where) {
  try {
    return require(j, key, where).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("field '" + key + "' in " + where +
                      " has the wrong type");
  }
}

}  // namespace cfg

struct AlgoConfig {
  AlgoId id;
  Json overrides;  // hyperparameter overrides applied after the schedule
};

struct ExperimentConfig {
  std::string experiment;
  Json problem;
  std::vector<AlgoConfig> algos;
  long horizon = 1;
  std::vector<std::uint64_t> seeds;
  std::optional<WindowSpec> window;
  std::string outputs = "runs";
  Json estimator;  // {"mode": ..., "samples": ..., "seed": ...}
  Json init;       // optional x0/y0/v0 (scalars broadcast)
};

inline ExperimentConfig parse_experiment_config(const Json& j) {
  ExperimentConfig c;
  c.experiment = cfg::get_or<std::string>(j, "experiment", "experiment");
  c.problem = cfg::require(j, "problem", "config root");
  if (!c.problem.contains("family"))
    throw ConfigError("missing field 'family' in problem");
  c.horizon = cfg::get<long>(j, "horizon", "config root");
  if (c.horizon < 1) throw ConfigError("field 'horizon' must be >= 1");

  const Json& algos = cfg::require(j, "algos", "config root");
  if (!algos.is_array() || algos.empty())
    throw ConfigError("field 'algos' must be a non-empty array");
  for (const Json& a : algos) {
    AlgoConfig ac;
    if (a.is_string()) {
      ac.id = parse_algo_id(a.get<std::string>());
    } else {
      ac.id = parse_algo_id(cfg::get<std::string>(a, "id", "algos[]"));
      ac.overrides = cfg::get_or<Json>(a, "params", Json::object());
    }
    c.algos.push_back(std::move(ac));
  }

  const Json& seeds = cfg::require(j, "seeds", "config root");
  if (!seeds.is_array() || seeds.empty())
    throw ConfigError("field 'seeds' must be a non-empty array");
  for (const Json& s : seeds) c.seeds.push_back(s.get<std::uint64_t>());

  if (j.contains("window")) {
    WindowSpec w;
    w.w = cfg::get<int>(j.at("window"), "w", "window");
    w.eta = cfg::get<double>(j.at("window"), "eta", "window");
    w.validate();
    c.window = w;
  }
  c.outputs = cfg::get_or<std::string>(j, "outputs", "runs");
  c.estimator = cfg::get_or<Json>(j, "estimator", Json::object());
  c.init = cfg::get_or<Json>(j, "init", Json::object());
  return c;
}

// --set key paths like "problem.mu_g=2" or "algos.0.params.gamma=0.05";
// values parse as JSON literals, falling back to strings.
inline void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like key=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  Json* cur = &doc;
  std::size_t pos = 0;
  while (true) {
    const auto dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot - pos);
    if (key.empty()) throw ConfigError("bad override path: " + path);
    const bool last = dot == std::string::npos;
    if (cur->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(key);
      } catch (...) {
        throw ConfigError("array index expected in override path: " + path);
      }
      if (idx >= cur->size())
        throw ConfigError("array index out of range in override: " + path);
      cur = &(*cur)[idx];
      if (last) {
        *cur = value;
        return;
      }
    } else {
      if (last) {
        (*cur)[key] = value;
        return;
      }
      cur = &(*cur)[key];
    }
    pos = dot + 1;
  }
}

inline DriftPath parse_drift(const Json& j, const std::string& where) {
  DriftPath p;
  p.kind = DriftPath::parse_kind(cfg::get<std::string>(j, "kind", where));
  p.seed = cfg::get_or<std::uint64_t>(j, "seed", 0);
  p.scale = cfg::get_or<double>(j, "scale", 0.0);
  return p;
}

inline ConstraintSet parse_set(const Json& j) {
  const std::string type = cfg::get<std::string>(j, "type", "x_set");
  if (type == "unconstrained") return ConstraintSet::unconstrained();
  if (type == "ball") {
    const double radius = cfg::get<double>(j, "radius", "x_set");
    const int d = cfg::get<int>(j, "d", "x_set");
    Vector center = Vector::Zero(d);
    if (j.contains("center")) {
      const auto c = j.at("center").get<std::vector<double>>();
      center = Eigen::Map<const Vector>(c.data(),
                                        static_cast<Eigen::Index>(c.size()));
    }
    return ConstraintSet::make_ball(center, radius);
  }
  if (type == "box") {
    const auto lo = cfg::get<std::vector<double>>(j, "lower", "x_set");
    const auto hi = cfg::get<std::vector<double>>(j, "upper", "x_set");
    return ConstraintSet::make_box(
        Eigen::Map<const Vector>(lo.data(), static_cast<Eigen::Index>(lo.size())),
        Eigen::Map<const Vector>(hi.data(), static_cast<Eigen::Index>(hi.size())));
  }
  throw ConfigError("unknown x_set type: " + type);
}

// Declarative family construction. The run seed perturbs the family's own
// seeds so that repeated-seed experiments see independent draws while each
// (config, seed) pair stays fully deterministic.
inline ProblemPtr make_problem(const Json& j, long horizon,
                               std::uint64_t run_seed) {
  const std::string family = cfg::get<std::string>(j, "family", "problem");
  if (family == "drifting_quadratic") {
    DriftingQuadraticSpec spec;
    spec.d = cfg::get_or<int>(j, "d", 2);
    spec.T = horizon;
    spec.mu_g = cfg::get_or<double>(j, "mu_g", 1.0);
    spec.l_g1 = cfg::get_or<double>(j, "l_g1", 0.0);
    spec.ref_radius = cfg::get_or<double>(j, "ref_radius", 10.0);
    spec.drift_d = j.contains("drift_d")
                       ? parse_drift(j.at("drift_d"), "drift_d")
                       : DriftPath{};
    spec.drift_c = j.contains("drift_c")
                       ? parse_drift(j.at("drift_c"), "drift_c")
                       : DriftPath{};
    spec.drift_d.seed = mix_seed(spec.drift_d.seed, run_seed);
    spec.drift_c.seed = mix_seed(spec.drift_c.seed + 1, run_seed);
    if (j.contains("x_set")) spec.x_set = parse_set(j.at("x_set"));
    return DriftingQuadratic::make(spec);
  }
  if (family == "block_sigmoid") {
    return BlockSigmoidAdversary::make(
        horizon, cfg::get<double>(j, "v_budget", "problem"),
        cfg::get<double>(j, "q", "problem"), cfg::get_or<double>(j, "mu", 1.0),
        cfg::get_or<double>(j, "l_f0_ref", 1.0),
        cfg::get_or<double>(j, "l_f1_ref", 1.0));
  }
  if (family == "window_adversary") {
    double c_scale = cfg::get_or<double>(j, "c_scale", 0.0);
    if (c_scale <= 0.0)
      c_scale = WindowAdversary::c_from_caps(
          cfg::get_or<double>(j, "q", 1.0), cfg::get_or<double>(j, "l_f0", 1.0),
          cfg::get_or<double>(j, "l_f1", 1.0));
    return WindowAdversary::make(horizon, c_scale,
                                 cfg::get_or<double>(j, "mu", 1.0),
                                 cfg::get_or<long>(j, "d_max", 4096));
  }
  if (family == "hyper_cleaning") {
    HyperCleaningSpec spec;
    spec.n_train = cfg::get_or<int>(j, "n_train", 20);
    spec.n_val = cfg::get_or<int>(j, "n_val", 20);
    spec.d = cfg::get_or<int>(j, "d", 5);
    spec.T = horizon;
    spec.ridge = cfg::get_or<double>(j, "ridge", 0.5);
    if (j.contains("corruption_schedule"))
      spec.corruption_schedule =
          j.at("corruption_schedule").get<std::vector<double>>();
    spec.seed = mix_seed(cfg::get_or<std::uint64_t>(j, "seed", 0), run_seed);
    return HyperCleaning::make(spec);
  }
  throw ConfigError("unknown problem family: " + family);
}

// Theorem defaults for the algorithm, then user overrides. Horizon-dependent
// iteration counts are recomputed when the step they depend on is overridden
// without an explicit m_iters.
inline HyperParams resolve_params(const SmoothnessConstants& sc, AlgoId algo,
                                  long horizon,
                                  const std::optional<WindowSpec>& window,
                                  const Json& overrides) {
  HyperParams p = default_schedule(sc, algo, horizon, window);
  const bool m_overridden = overrides.contains("m_iters");
  if (overrides.contains("alpha")) p.alpha = overrides.at("alpha").get<double>();
  if (overrides.contains("beta")) p.beta = overrides.at("beta").get<double>();
  if (overrides.contains("gamma")) p.gamma = overrides.at("gamma").get<double>();
  if (overrides.contains("delta")) p.delta = overrides.at("delta").get<double>();
  if (m_overridden) p.m_iters = overrides.at("m_iters").get<long>();
  if (overrides.contains("cap_inner"))
    p.cap_inner = overrides.at("cap_inner").get<long>();
  if (overrides.contains("wobo_hg_form")) {
    const std::string f = overrides.at("wobo_hg_form").get<std::string>();
    if (f == "xy")
      p.wobo_hg_form = WindowHgForm::cross_jacobian;
    else if (f == "yy")
      p.wobo_hg_form = WindowHgForm::hessian;
    else
      throw ConfigError("wobo_hg_form must be 'xy' or 'yy'");
  }
  if (!m_overridden) {
    if (algo == AlgoId::aobo && overrides.contains("beta"))
      p.m_iters = aobo_m_iters(1.0 - p.beta * sc.mu_g, horizon);
    if (algo == AlgoId::obbo && overrides.contains("alpha"))
      p.m_iters = obbo_k_iters(1.0 - p.alpha * sc.mu_g, horizon);
  }
  p.validate();
  return p;
}

inline SupEstimator resolve_estimator(const Json& j, const BilevelProblem& p) {
  SupEstimator est;
  if (j.contains("mode")) {
    est.mode = SupEstimator::parse_mode(j.at("mode").get<std::string>());
    if (est.mode == SupEstimator::Mode::analytic &&
        !p.capabilities().analytic_variation)
      throw ConfigError(
          "estimator mode 'analytic' requires the family capability");
  } else {
    est.mode = p.capabilities().analytic_variation
                   ? SupEstimator::Mode::analytic
                   : SupEstimator::Mode::sampled;
  }
  est.samples = cfg::get_or<int>(j, "samples", est.samples);
  est.seed = cfg::get_or<std::uint64_t>(j, "seed", est.seed);
  est.grid_resolution = cfg::get_or<int>(j, "resolution", est.grid_resolution);
  est.probes = cfg::get_or<int>(j, "probes", est.probes);
  return est;
}

}  // namespace obo

#endif  // OBO_CONFIG_HPP

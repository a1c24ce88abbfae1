#ifndef OBO_RUNNER_HPP
#define OBO_RUNNER_HPP

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

#include "obo/config.hpp"
#include "obo/io.hpp"
#include "obo/optimizers.hpp"

namespace obo {

namespace fs = std::filesystem;

inline int thread_cap() {
  if (const char* env = std::getenv("OBO_BENCH_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

inline Vector init_vector(const Json& init, const std::string& key, int dim) {
  if (!init.contains(key)) return Vector::Zero(dim);
  const Json& j = init.at(key);
  if (j.is_number()) return Vector::Constant(dim, j.get<double>());
  const auto xs = j.get<std::vector<double>>();
  if (static_cast<int>(xs.size()) != dim)
    throw ConfigError("init '" + key + "' has wrong dimension");
  return Eigen::Map<const Vector>(xs.data(),
                                  static_cast<Eigen::Index>(xs.size()));
}

struct RunOutput {
  std::string algo;
  std::uint64_t seed = 0;
  RunRecord record;
  SummaryRecord summary;
  HyperParams params;
  fs::path csv_path;
};

inline Json summary_json(const ExperimentConfig& cfg, const RunOutput& out,
                         const BilevelProblem& inst,
                         const SupEstimator& est) {
  Json s;
  s["experiment"] = cfg.experiment;
  s["algo"] = out.algo;
  s["seed"] = out.seed;
  s["T"] = out.summary.rounds;
  s["reg_T"] = out.summary.reg_T;
  s["win_reg_T"] = out.summary.win_reg_T;
  s["V_T"] = out.summary.v_T;
  s["H2_T"] = out.summary.h2_T;
  s["E2_T"] = out.summary.e2_T;
  s["P_T"] = out.summary.p_T;
  s["I_T"] = out.summary.i_T;
  s["grad_queries"] = out.summary.grad_queries;
  s["hvp_queries"] = out.summary.hvp_queries;
  if (out.summary.slope)
    s["slope_fit"] = *out.summary.slope;
  else
    s["slope_fit"] = nullptr;
  s["failed"] = out.record.failed;
  if (out.record.failed) s["error"] = out.record.error;
  Json conv;
  conv["estimator"] = est.mode_name();
  conv["sup_domain_radius"] = inst.x_set().is_bounded()
                                  ? inst.x_set().bounding_radius()
                                  : inst.reference_radius();
  conv["sup_domain"] =
      inst.x_set().is_bounded() ? "decision-set" : "reference-ball";
  conv["p_terms"] = "G at iterates, D as supremum";
  if (est.mode != SupEstimator::Mode::analytic)
    conv["sup_estimate"] = "lower";
  conv["window_hg_form"] = to_string(out.params.wobo_hg_form);
  s["conventions"] = conv;
  Json pj;
  pj["alpha"] = out.params.alpha;
  pj["beta"] = out.params.beta;
  pj["gamma"] = out.params.gamma;
  pj["delta"] = out.params.delta;
  pj["m_iters"] = out.params.m_iters;
  pj["window_w"] = out.params.window_w;
  pj["eta_weight"] = out.params.eta_weight;
  s["params"] = pj;
  return s;
}

// One (algo, seed) run: builds the seeded instance, resolves parameters,
// runs, and writes the per-run CSV atomically.
inline RunOutput execute_run(const ExperimentConfig& cfg,
                             const AlgoConfig& algo, std::uint64_t seed,
                             const fs::path& out_dir) {
  RunOutput out;
  out.algo = to_string(algo.id);
  out.seed = seed;
  const ProblemPtr inst = make_problem(cfg.problem, cfg.horizon, seed);
  out.params = resolve_params(inst->constants(), algo.id, cfg.horizon,
                              cfg.window, algo.overrides);
  RunOptions opts;
  opts.x0 = init_vector(cfg.init, "x0", inst->dim_x());
  opts.y0 = init_vector(cfg.init, "y0", inst->dim_y());
  opts.v0 = init_vector(cfg.init, "v0", inst->dim_y());
  opts.estimator = resolve_estimator(cfg.estimator, *inst);
  out.record = run(*inst, algo.id, out.params, opts);
  if (!out.record.ledger.empty())
    out.summary = summarize(out.record.ledger, cfg.horizon);
  out.csv_path =
      out_dir / (out.algo + "_seed" + std::to_string(seed) + ".csv");
  atomic_write_file(out.csv_path,
                    run_csv(out.record.ledger, out.algo, seed));
  const Json sj = summary_json(cfg, out, *inst, *opts.estimator);
  atomic_write_file(out_dir / (out.algo + "_seed" + std::to_string(seed) +
                               "_summary.json"),
                    sj.dump(2) + "\n");
  return out;
}

struct ExperimentResult {
  std::vector<RunOutput> runs;
  fs::path out_dir;
  bool any_failed = false;
};

// Fans independent (algo, seed) runs out over a bounded worker pool; each
// run writes its own files, so there is no shared mutable state.
inline ExperimentResult execute_experiment(const ExperimentConfig& cfg) {
  ExperimentResult result;
  result.out_dir = fs::path(cfg.outputs) / cfg.experiment;
  fs::create_directories(result.out_dir);

  struct Task {
    const AlgoConfig* algo;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const AlgoConfig& a : cfg.algos)
    for (std::uint64_t s : cfg.seeds) tasks.push_back({&a, s});

  result.runs.resize(tasks.size());
  std::vector<std::string> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  const int workers =
      std::min<int>(thread_cap(), static_cast<int>(tasks.size()));
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        result.runs[i] =
            execute_run(cfg, *tasks[i].algo, tasks[i].seed, result.out_dir);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!errors[i].empty())
      throw std::runtime_error("run " + std::string(to_string(tasks[i].algo->id)) +
                               " seed " + std::to_string(tasks[i].seed) +
                               " failed: " + errors[i]);
    if (result.runs[i].record.failed) result.any_failed = true;
  }

  Json all = Json::array();
  for (const RunOutput& r : result.runs) {
    const ProblemPtr inst = make_problem(cfg.problem, cfg.horizon, r.seed);
    const SupEstimator est = resolve_estimator(cfg.estimator, *inst);
    all.push_back(summary_json(cfg, r, *inst, est));
  }
  atomic_write_file(result.out_dir / "experiment_summary.json",
                    all.dump(2) + "\n");
  return result;
}

enum class SweepAxis { window_w, horizon_T, delta };

inline SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "window_w") return SweepAxis::window_w;
  if (s == "horizon_T") return SweepAxis::horizon_T;
  if (s == "delta") return SweepAxis::delta;
  throw ConfigError("unknown sweep axis: " + s);
}

struct SweepRow {
  double axis_value;
  std::string algo;
  std::uint64_t seed;
  double reg_T;
  double win_reg_T;
  long i_T;
  double per_step_win_reg;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  fs::path table_path;
};

// Runs the base experiment once per axis value and emits a combined summary
// table.
inline SweepResult run_sweep(ExperimentConfig base, SweepAxis axis,
                             const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep values list is empty");
  SweepResult out;
  const std::string base_name = base.experiment;
  const fs::path root = fs::path(base.outputs) / base_name;
  for (const double v : values) {
    ExperimentConfig cfg = base;
    switch (axis) {
      case SweepAxis::window_w: {
        WindowSpec w = cfg.window.value_or(WindowSpec{});
        w.w = static_cast<int>(v);
        w.validate();
        cfg.window = w;
        break;
      }
      case SweepAxis::horizon_T:
        cfg.horizon = static_cast<long>(v);
        break;
      case SweepAxis::delta:
        for (AlgoConfig& a : cfg.algos) a.overrides["delta"] = v;
        break;
    }
    cfg.experiment =
        base_name + "/sweep_" + format_double(v);
    const ExperimentResult res = execute_experiment(cfg);
    for (const RunOutput& r : res.runs) {
      SweepRow row;
      row.axis_value = v;
      row.algo = r.algo;
      row.seed = r.seed;
      row.reg_T = r.summary.reg_T;
      row.win_reg_T = r.summary.win_reg_T;
      row.i_T = r.summary.i_T;
      row.per_step_win_reg =
          r.summary.rounds > 0
              ? r.summary.win_reg_T / static_cast<double>(r.summary.rounds)
              : 0.0;
      out.rows.push_back(std::move(row));
    }
  }
  std::string table = "axis_value,algo,seed,reg_T,win_reg_T,I_T,per_step_win_reg\n";
  for (const SweepRow& r : out.rows) {
    table += format_double(r.axis_value);
    table += ',';
    table += r.algo;
    table += ',';
    table += format_long(static_cast<long>(r.seed));
    table += ',';
    table += format_double(r.reg_T);
    table += ',';
    table += format_double(r.win_reg_T);
    table += ',';
    table += format_long(r.i_T);
    table += ',';
    table += format_double(r.per_step_win_reg);
    table += '\n';
  }
  out.table_path = root / "sweep_summary.csv";
  atomic_write_file(out.table_path, table);
  return out;
}

// Long-format (series, t, value) extraction from completed run CSVs; the
// series id is "<file stem>:<column>".
inline std::string emit_plot_data(const fs::path& runs_dir,
                                  const std::vector<std::string>& series) {
  if (series.empty()) throw ConfigError("no series requested");
  std::vector<fs::path> csvs;
  if (!fs::exists(runs_dir))
    throw ConfigError("runs directory does not exist: " + runs_dir.string());
  for (const auto& e : fs::recursive_directory_iterator(runs_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv" &&
        e.path().filename() != "sweep_summary.csv" &&
        e.path().filename() != "plot_data.csv")
      csvs.push_back(e.path());
  }
  std::sort(csvs.begin(), csvs.end());
  if (csvs.empty())
    throw ConfigError("no run CSVs found under " + runs_dir.string());

  std::string out = "series,t,value\n";
  for (const std::string& col : series) {
    bool seen_anywhere = false;
    for (const fs::path& f : csvs) {
      const CsvTable t = read_csv(f);
      const int ci = t.column(col);
      const int ti = t.column("t");
      if (ci < 0 || ti < 0) continue;
      seen_anywhere = true;
      const std::string stem = fs::relative(f, runs_dir).replace_extension("").string();
      for (const auto& row : t.rows) {
        out += stem + ":" + col;
        out += ',';
        out += row[static_cast<std::size_t>(ti)];
        out += ',';
        out += row[static_cast<std::size_t>(ci)];
        out += '\n';
      }
    }
    if (!seen_anywhere)
      throw ConfigError("column '" + col + "' is not logged in any run CSV");
  }
  return out;
}

}  // namespace obo

#endif  // OBO_RUNNER_HPP

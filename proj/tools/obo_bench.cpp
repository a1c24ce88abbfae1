// obo-bench: run, sweep, verify, and plot-data extraction for the online
// bilevel optimization benchmark library.

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "obo/runner.hpp"
#include "obo/verify.hpp"

namespace {

obo::Json load_config(const std::string& path,
                      const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw obo::ConfigError("cannot open config file: " + path);
  obo::Json doc;
  try {
    doc = obo::Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw obo::ConfigError("config parse error in " + path + ": " + e.what());
  }
  for (const std::string& ov : overrides) obo::apply_override(doc, ov);
  return doc;
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    out.push_back(std::stod(cell));
  }
  return out;
}

int cmd_run(const std::string& config_path,
            const std::vector<std::string>& overrides) {
  const obo::Json doc = load_config(config_path, overrides);
  const obo::ExperimentConfig cfg = obo::parse_experiment_config(doc);
  const obo::ExperimentResult res = obo::execute_experiment(cfg);
  for (const obo::RunOutput& r : res.runs) {
    std::cout << r.algo << " seed " << r.seed << ": "
              << (r.record.failed ? "FAILED (" + r.record.error + ")" : "ok")
              << "  reg_T=" << r.summary.reg_T
              << "  win_reg_T=" << r.summary.win_reg_T
              << "  I_T=" << r.summary.i_T << "\n";
  }
  std::cout << "wrote " << res.runs.size() << " runs to " << res.out_dir
            << "\n";
  return res.any_failed ? 1 : 0;
}

int cmd_sweep(const std::string& config_path,
              const std::vector<std::string>& overrides,
              const std::string& axis, const std::string& values_csv) {
  const obo::Json doc = load_config(config_path, overrides);
  const obo::ExperimentConfig cfg = obo::parse_experiment_config(doc);
  const auto values = parse_values(values_csv);
  const obo::SweepResult res =
      obo::run_sweep(cfg, obo::parse_sweep_axis(axis), values);
  std::cout << "axis_value algo seed reg_T win_reg_T I_T per_step_win_reg\n";
  for (const obo::SweepRow& r : res.rows) {
    std::cout << r.axis_value << " " << r.algo << " " << r.seed << " "
              << r.reg_T << " " << r.win_reg_T << " " << r.i_T << " "
              << r.per_step_win_reg << "\n";
  }
  std::cout << "wrote " << res.table_path << "\n";
  return 0;
}

int cmd_verify(bool full) {
  const auto t0 = std::chrono::steady_clock::now();
  const obo::VerifyReport rep = obo::run_verify({full});
  for (const auto& g : rep.groups) {
    std::cout << (g.passed ? "[PASS] " : "[FAIL] ") << g.name << " ("
              << g.checks << " checks)";
    if (!g.passed) std::cout << "  " << g.detail;
    std::cout << "\n";
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  std::cout << (rep.all_passed() ? "verify passed" : "verify FAILED") << " in "
            << secs << " s\n";
  return rep.all_passed() ? 0 : 1;
}

int cmd_plot_data(const std::string& runs_dir, const std::string& series_csv) {
  std::vector<std::string> series;
  std::stringstream ss(series_csv);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty()) series.push_back(cell);
  }
  const std::string out = obo::emit_plot_data(runs_dir, series);
  const std::filesystem::path path =
      std::filesystem::path(runs_dir) / "plot_data.csv";
  obo::atomic_write_file(path, out);
  std::cout << "wrote " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"online bilevel optimization benchmark harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto* run_cmd = app.add_subcommand("run", "execute an experiment config");
  run_cmd->add_option("--config", config_path, "experiment JSON")->required();
  run_cmd->add_option("--set", overrides, "key=value config overrides");

  std::string axis, values;
  auto* sweep_cmd =
      app.add_subcommand("sweep", "run a config across an axis of values");
  sweep_cmd->add_option("--config", config_path, "experiment JSON")
      ->required();
  sweep_cmd->add_option("--axis", axis, "window_w | horizon_T | delta")
      ->required();
  sweep_cmd->add_option("--values", values, "comma-separated values")
      ->required();
  sweep_cmd->add_option("--set", overrides, "key=value config overrides");

  bool full = false;
  auto* verify_cmd =
      app.add_subcommand("verify", "run the oracle/invariant suites");
  verify_cmd->add_flag("--full", full, "10x sample counts plus drift checks");

  std::string runs_dir, series;
  auto* plot_cmd = app.add_subcommand(
      "plot-data", "emit long-format CSV series from completed runs");
  plot_cmd->add_option("--runs", runs_dir, "directory of run CSVs")
      ->required();
  plot_cmd->add_option("--series", series, "comma-separated column names")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return cmd_run(config_path, overrides);
    if (sweep_cmd->parsed())
      return cmd_sweep(config_path, overrides, axis, values);
    if (verify_cmd->parsed()) return cmd_verify(full);
    if (plot_cmd->parsed()) return cmd_plot_data(runs_dir, series);
  } catch (const obo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

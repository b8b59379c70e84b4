// Command line front end: simulate, run, score, sweep.

#include "ekfslam/config.hpp"
#include "ekfslam/dataset.hpp"
#include "ekfslam/experiment.hpp"
#include "ekfslam/metrics.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace ekfslam;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::optional<int> runs;
  std::optional<double> budget_ms;
  std::vector<std::string> overrides;
  std::string out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key = value configuration file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "run seed");
  app->add_option("--mode", c.mode, "motion model")->check(CLI::IsMember({"cv", "imu"}));
  app->add_option("--runs", c.runs, "Monte Carlo runs")->check(CLI::PositiveNumber);
  app->add_option("--budget-ms", c.budget_ms, "per-frame correction time budget, 0 = unlimited");
  app->add_option("--set", c.overrides, "extra key=value overrides");
  app->add_option("--out", c.out, "output directory");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.mode.empty()) cfg.mode = c.mode;
  if (c.runs) cfg.runs = *c.runs;
  if (c.budget_ms) cfg.time_budget_ms = *c.budget_ms;
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override needs key=value: " + kv);
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

void print_summary(const RunMetrics& m) {
  std::cout << "frames " << m.frames.size() << "  rmse " << m.rmse_position << " m  final " << m.final_position_error
            << " m  scale ratio " << m.scale.scale_ratio << "  shape " << m.scale.shape_error << "\n"
            << "nees below bound " << m.fraction_nees_below << "  within 2.57 sigma " << m.fraction_within_bounds
            << "  diverged " << (m.diverged ? "yes" : "no");
  if (m.diverged) std::cout << " at " << m.divergence_time << " s";
  if (m.saturation_time >= 0) std::cout << "  first saturation " << m.saturation_time << " s";
  std::cout << "\nconversions " << m.conversions << "  outliers " << m.outliers << " (corrected "
            << m.outliers_corrected << ")\n";
}

int cmd_simulate(const Common& c) {
  if (c.out.empty()) throw CLI::ValidationError("--out", "simulate needs an output directory");
  const ExperimentConfig cfg = resolve(c);
  const Sequence s = make_synthetic_sequence(cfg);
  write_dataset(c.out, s);
  std::cout << "wrote " << s.frames->frame_count() << " frames and " << s.imu.size() << " IMU samples to " << c.out
            << "\n";
  return 0;
}

int cmd_run(const Common& c, const std::string& dataset, bool obs_log) {
  RunMetrics m;
  std::ofstream log;
  RunOptions opt;
  if (obs_log) {
    if (c.out.empty()) throw CLI::ValidationError("--obs-log", "needs --out");
    fs::create_directories(c.out);
    log.open(fs::path(c.out) / "observations.csv");
    log << "frame,landmark,truth,status,u_pred,v_pred,u_meas,v_meas,d2\n";
    opt.observation_log = &log;
  }
  if (!dataset.empty()) {
    Sequence s = read_dataset(dataset);
    if (!c.config.empty() || c.seed || !c.mode.empty() || !c.overrides.empty() || c.budget_ms) {
      // Overrides only touch filter settings; the recorded data stays as is.
      ExperimentConfig cfg = s.config;
      if (!c.config.empty()) cfg = load_config(c.config, cfg);
      if (!c.mode.empty()) cfg.mode = c.mode;
      if (c.budget_ms) cfg.time_budget_ms = *c.budget_ms;
      for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("override needs key=value: " + kv);
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
      }
      cfg.validate();
      s.config = cfg;
    }
    m = run_slam(s, opt);
  } else {
    m = run_experiment(resolve(c), opt);
  }
  print_summary(m);
  if (!c.out.empty()) write_run(c.out, m);
  return m.frames.empty() ? 1 : 0;
}

int cmd_score(const Common& c, const std::string& dir) {
  const ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  RunMetrics m = read_run_csv(fs::path(dir) / "metrics.csv", fs::path(dir) / "trajectory.csv");
  summarize(m, cfg);
  print_summary(m);
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    std::ofstream os(fs::path(c.out) / "summary.csv");
    write_summary_header(os);
    write_summary_row(os, m);
  }
  return 0;
}

int cmd_sweep(const Common& c, bool keep_runs) {
  const ExperimentConfig cfg = resolve(c);
  const std::vector<RunMetrics> runs = sweep(cfg, cfg.runs);
  std::vector<std::vector<double>> nees_runs;
  int diverged = 0;
  for (const auto& m : runs) {
    std::vector<double> v;
    for (const auto& f : m.frames) v.push_back(f.nees);
    nees_runs.push_back(std::move(v));
    diverged += m.diverged;
  }
  const MonteCarloNees avg = average_nees(nees_runs, 6.0);
  std::cout << runs.size() << " runs, " << diverged << " diverged\n"
            << "average NEES inside " << runs.size() << "-run interval [" << avg.n_run_bounds.first << ", "
            << avg.n_run_bounds.second << "]: " << avg.fraction_in_n_run << "\n"
            << "average NEES inside single-run interval [" << avg.single_run_bounds.first << ", "
            << avg.single_run_bounds.second << "]: " << avg.fraction_in_single_run << "\n";
  if (c.out.empty()) return 0;
  const fs::path out(c.out);
  fs::create_directories(out);
  {
    std::ofstream os(out / "aggregate.csv");
    write_summary_header(os);
    for (const auto& m : runs) write_summary_row(os, m);
  }
  {
    std::ofstream os(out / "nees_average.csv");
    os << "step,t,average_nees,n_run_low,n_run_high,single_run_low,single_run_high\n";
    for (std::size_t k = 0; k < avg.average.size(); ++k)
      os << k << ',' << runs.front().frames[k].t << ',' << avg.average[k] << ',' << avg.n_run_bounds.first << ','
         << avg.n_run_bounds.second << ',' << avg.single_run_bounds.first << ',' << avg.single_run_bounds.second
         << '\n';
  }
  {
    std::ofstream os(out / "config.txt");
    write_config(os, cfg);
  }
  if (keep_runs)
    for (const auto& m : runs) write_run(out / ("run_" + std::to_string(m.seed)), m);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EKF-SLAM with inertial fusion: simulation, runs and Monte Carlo evaluation"};
  app.require_subcommand(1);

  Common sim_opts, run_opts, score_opts, sweep_opts;
  auto* sim = app.add_subcommand("simulate", "write a synthetic dataset");
  add_common(sim, sim_opts);

  auto* run = app.add_subcommand("run", "run SLAM on a dataset or a live synthetic sequence");
  add_common(run, run_opts);
  std::string dataset;
  bool obs_log = false;
  run->add_option("--dataset", dataset, "recorded dataset directory")->check(CLI::ExistingDirectory);
  run->add_flag("--obs-log", obs_log, "write observations.csv");

  auto* score = app.add_subcommand("score", "recompute metrics from run logs");
  add_common(score, score_opts);
  std::string logs;
  score->add_option("logs", logs, "directory with metrics.csv and trajectory.csv")->required();

  auto* sw = app.add_subcommand("sweep", "Monte Carlo over seeds");
  add_common(sw, sweep_opts);
  bool keep_runs = false;
  sw->add_flag("--keep-runs", keep_runs, "also write every run's logs");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) return cmd_simulate(sim_opts);
    if (*run) return cmd_run(run_opts, dataset, obs_log);
    if (*score) return cmd_score(score_opts, logs);
    if (*sw) return cmd_sweep(sweep_opts, keep_runs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

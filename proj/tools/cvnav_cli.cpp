// Command-line front end: simulate scenarios, replay recorded streams,
// run the ablation matrix, and score trajectory files.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "cvnav/io.hpp"
#include "cvnav/metrics.hpp"
#include "cvnav/simulation.hpp"

namespace fs = std::filesystem;
using namespace cvnav;

namespace {

void write_metrics_csv(const std::string& path,
                       const std::vector<std::pair<std::string, double>>& rows) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  out << "metric,value\n";
  char buf[128];
  for (const auto& [name, value] : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.9g\n", name.c_str(), value);
    out << buf;
  }
}

// Re-expresses each returned fix relative to the centre crop of its frame so
// a frame-keyed replay reproduces the same implied global pose.
std::vector<std::pair<int, CvglFix>> exportable_fixes(const RunResult& rr) {
  std::vector<std::pair<int, CvglFix>> out;
  for (const FixEvent& fe : rr.fixes) {
    if (fe.outcome == FixOutcome::kAllMiss) {
      continue;
    }
    out.push_back({fe.frame, fix_from_global(fe.centre_query, fe.global, fe.weight)});
  }
  return out;
}

int cmd_simulate(const std::string& scenario_path, std::optional<std::uint64_t> seed,
                 const std::string& out_dir, const std::string& export_imu,
                 const std::string& export_fixes) {
  SimulationSetup setup = read_config_file(scenario_path);
  if (seed) {
    setup.scenario.seed = *seed;
  }
  const RunResult rr = run_pipeline(setup.scenario, setup.pipeline, setup.matcher);

  fs::create_directories(out_dir);
  write_trajectory_csv(out_dir + "/truth.csv", rr.truth);
  write_trajectory_csv(out_dir + "/imu_only.csv", rr.imu_only);
  write_trajectory_csv(out_dir + "/ukf.csv", rr.ukf_online);
  write_trajectory_csv(out_dir + "/smoothed.csv", rr.smoothed);

  const TrajectoryMetrics ukf_m = compute_metrics(rr.ukf_online, rr.truth, rr.accepted_frames);
  const TrajectoryMetrics smooth_m = compute_metrics(rr.smoothed, rr.truth, rr.accepted_frames);
  const TrajectoryMetrics imu_m = compute_metrics(rr.imu_only, rr.truth, rr.accepted_frames);
  std::vector<std::pair<std::string, double>> rows = {
      {"ate_rmse_ukf", ukf_m.ate_rmse},
      {"ate_rmse_smoothed", smooth_m.ate_rmse},
      {"ate_rmse_imu_only", imu_m.ate_rmse},
      {"drift_rate_imu_only", imu_m.drift_rate},
      {"drift_rate_ukf", ukf_m.drift_rate},
      {"fixes_per_km", ukf_m.fixes_per_km},
      {"trajectory_length_km", ukf_m.trajectory_length_km},
      {"accepted_fixes", static_cast<double>(rr.accepted_frames.size())},
      {"trigger_events", static_cast<double>(rr.triggers.size())},
  };
  if (ukf_m.steady_state_rmse) {
    rows.push_back({"steady_state_rmse_ukf", *ukf_m.steady_state_rmse});
  }
  write_metrics_csv(out_dir + "/metrics.csv", rows);

  if (!export_imu.empty()) {
    const auto truth = generate_trajectory(setup.scenario);
    write_imu_jsonl(export_imu, synthesize_imu(truth, setup.scenario));
  }
  if (!export_fixes.empty()) {
    write_fix_jsonl(export_fixes, exportable_fixes(rr));
  }

  std::printf("simulate: %zu frames, %zu fixes (%zu accepted), ATE ukf %.3f m / "
              "smoothed %.3f m / imu-only %.3f m\n",
              rr.ukf_online.size(), rr.fixes.size(), rr.accepted_frames.size(), ukf_m.ate_rmse,
              smooth_m.ate_rmse, imu_m.ate_rmse);
  return 0;
}

int cmd_replay(const std::string& imu_path, const std::string& fixes_path,
               const std::string& out_dir, const std::string& truth_csv,
               const std::string& config_path, double camera_rate) {
  PipelineConfig pipeline;
  if (!config_path.empty()) {
    pipeline = read_config_file(config_path).pipeline;
  }
  const ImuStream stream = read_imu_jsonl(imu_path);
  FixReplaySource source = read_fix_jsonl(fixes_path);
  const RunResult rr = run_replay(stream, source, pipeline, camera_rate);

  fs::create_directories(out_dir);
  write_trajectory_csv(out_dir + "/imu_only.csv", rr.imu_only);
  write_trajectory_csv(out_dir + "/ukf.csv", rr.ukf_online);
  write_trajectory_csv(out_dir + "/smoothed.csv", rr.smoothed);

  std::vector<std::pair<std::string, double>> rows = {
      {"accepted_fixes", static_cast<double>(rr.accepted_frames.size())},
      {"trigger_events", static_cast<double>(rr.triggers.size())},
      {"trajectory_length_km", rr.trajectory_length_km},
  };
  if (!truth_csv.empty()) {
    const auto truth = read_trajectory_csv(truth_csv);
    const auto [est, tru] =
        associate_by_time(rr.ukf_online, truth, 0.5 * stream.samples.front().dt);
    rows.push_back({"ate_rmse_ukf", ate_rmse(est, tru)});
    const auto [est_s, tru_s] =
        associate_by_time(rr.smoothed, truth, 0.5 * stream.samples.front().dt);
    rows.push_back({"ate_rmse_smoothed", ate_rmse(est_s, tru_s)});
  }
  write_metrics_csv(out_dir + "/metrics.csv", rows);

  std::printf("replay: %zu frames, %zu fixes (%zu accepted)\n", rr.ukf_online.size(),
              rr.fixes.size(), rr.accepted_frames.size());
  return 0;
}

int cmd_ablate(const std::string& scenario_path, int n_seeds, const std::string& out_csv,
               int workers) {
  const SimulationSetup setup = read_config_file(scenario_path);
  const auto rows = monte_carlo(setup.scenario, setup.pipeline, setup.matcher,
                                standard_ablation_matrix(), n_seeds, workers);

  std::printf("| configuration | median ATE (m) | p25 | p75 |\n");
  std::printf("|---------------|---------------:|----:|----:|\n");
  for (const auto& r : rows) {
    std::printf("| %-13s | %14.3f | %7.3f | %7.3f |\n", r.name.c_str(), r.median_ate,
                r.p25_ate, r.p75_ate);
  }

  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    if (!out) {
      throw std::runtime_error("cannot open for writing: " + out_csv);
    }
    out << "configuration,median_ate,p25_ate,p75_ate";
    for (int i = 0; i < n_seeds; ++i) {
      out << ",seed" << i;
    }
    out << "\n";
    char buf[64];
    for (const auto& r : rows) {
      out << r.name;
      std::snprintf(buf, sizeof(buf), ",%.9g,%.9g,%.9g", r.median_ate, r.p25_ate, r.p75_ate);
      out << buf;
      for (const double v : r.ate_by_seed) {
        std::snprintf(buf, sizeof(buf), ",%.9g", v);
        out << buf;
      }
      out << "\n";
    }
  }
  return 0;
}

int cmd_metrics(const std::string& est_path, const std::string& truth_path, double max_gap) {
  const auto est = read_trajectory_csv(est_path);
  const auto truth = read_trajectory_csv(truth_path);
  const auto [ea, ta] = associate_by_time(est, truth, max_gap);
  const double ate = ate_rmse(ea, ta);
  const double length = trajectory_length_km(ta);
  std::printf("ate_rmse %.9g\n", ate);
  std::printf("trajectory_length_km %.9g\n", length);
  if (length > 0.0) {
    std::printf("drift_rate %.9g\n", drift_rate(ate, length));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GNSS-free localisation pipeline: simulation, replay and evaluation"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Run a scenario end to end");
  std::string scenario_path, out_dir = "run", export_imu, export_fixes;
  std::uint64_t seed_value = 0;
  bool seed_given = false;
  sim->add_option("--scenario", scenario_path, "Scenario config file")->required();
  sim->add_option("--seed", seed_value, "Override the scenario seed")
      ->each([&](const std::string&) { seed_given = true; });
  sim->add_option("--out", out_dir, "Output directory");
  sim->add_option("--export-imu", export_imu, "Write the IMU stream as JSONL");
  sim->add_option("--export-fixes", export_fixes, "Write returned fixes as JSONL");

  auto* rep = app.add_subcommand("replay", "Re-run a recorded IMU + fix log");
  std::string imu_path, fixes_path, rep_out = "run", truth_csv, rep_config;
  double camera_rate = 10.0;
  rep->add_option("--imu", imu_path, "IMU JSONL log")->required();
  rep->add_option("--fixes", fixes_path, "Fix JSONL log")->required();
  rep->add_option("--out", rep_out, "Output directory");
  rep->add_option("--truth", truth_csv, "Optional ground-truth CSV for metrics");
  rep->add_option("--config", rep_config, "Config file for trigger/pipeline settings");
  rep->add_option("--camera-rate", camera_rate, "Camera rate in Hz");

  auto* abl = app.add_subcommand("ablate", "Run the ablation matrix over seeds");
  std::string abl_scenario, abl_out;
  int n_seeds = 50;
  int workers = 0;
  abl->add_option("--scenario", abl_scenario, "Scenario config file")->required();
  abl->add_option("--seeds", n_seeds, "Number of seeds");
  abl->add_option("--out", abl_out, "Write the per-seed table as CSV");
  abl->add_option("--workers", workers, "Worker threads (0 = hardware)");

  auto* met = app.add_subcommand("metrics", "Score an estimate CSV against truth");
  std::string est_path, met_truth;
  double max_gap = 0.005;
  met->add_option("--est", est_path, "Estimated trajectory CSV")->required();
  met->add_option("--truth", met_truth, "Ground-truth trajectory CSV")->required();
  met->add_option("--max-gap", max_gap, "Max timestamp gap for association (s)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      return cmd_simulate(scenario_path,
                          seed_given ? std::optional<std::uint64_t>(seed_value) : std::nullopt,
                          out_dir, export_imu, export_fixes);
    }
    if (rep->parsed()) {
      return cmd_replay(imu_path, fixes_path, rep_out, truth_csv, rep_config, camera_rate);
    }
    if (abl->parsed()) {
      return cmd_ablate(abl_scenario, n_seeds, abl_out, workers);
    }
    if (met->parsed()) {
      return cmd_metrics(est_path, met_truth, max_gap);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

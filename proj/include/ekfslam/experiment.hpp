#pragma once

#include "ekfslam/config.hpp"
#include "ekfslam/data_manager.hpp"
#include "ekfslam/dataset.hpp"
#include "ekfslam/map_manager.hpp"
#include "ekfslam/metrics.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ekfslam {

struct FrameMetrics {
  int frame{0};
  double t{0.0};
  Vec3 est_position{Vec3::Zero()};
  Vec3 true_position{Vec3::Zero()};
  Quaternion est_orientation{};
  Quaternion true_orientation{};
  Vec3 pos_error{Vec3::Zero()};
  Vec3 ang_error{Vec3::Zero()};  ///< rotation vector (rad)
  Vec3 pos_sigma{Vec3::Zero()};
  Vec3 ang_sigma{Vec3::Zero()};
  double nees{0.0};
  bool nees_valid{false};
  int landmarks{0};
  int visible{0};
  int matched{0};
  int strong{0};
  int corrected{0};
  int gated{0};
  int rescued{0};
  int iterations{0};
  int created{0};
  int removed{0};
  int converted{0};
  bool saturated{false};
  int outliers{0};            ///< candidates whose blob was displaced this frame
  int outliers_corrected{0};  ///< of those, how many were used in a correction
  double predict_ms{0}, search_ms{0}, correct_ms{0}, detect_ms{0}, maintain_ms{0}, total_ms{0};
};

struct RunMetrics {
  std::uint64_t seed{0};
  std::string mode;
  std::vector<FrameMetrics> frames;
  bool diverged{false};
  double divergence_time{-1.0};
  double saturation_time{-1.0};  ///< first saturated IMU sample, -1 if none
  double rmse_position{0.0};
  double final_position_error{0.0};
  ScaleShape scale;
  int conversions{0};
  double max_conversion_shift_px{0.0};
  long outliers{0};
  long outliers_corrected{0};
  double fraction_nees_below{0.0};  ///< below the single-run upper bound
  double fraction_within_bounds{0.0};
};

struct RunOptions {
  std::ostream* observation_log{nullptr};
  int max_frames{-1};
};

SlamFilter make_filter(const ExperimentConfig& c, const GroundTruth& truth);
DataManagerConfig data_manager_config(const ExperimentConfig& c);
LandmarkQualityPolicy quality_policy(const ExperimentConfig& c);

/// Full loop: predict, active search with correction, detection, map
/// maintenance, then per-frame errors and NEES against the truth.
RunMetrics run_slam(const Sequence& seq, const RunOptions& opt = {});

/// Synthetic sequence from the config, then run_slam.
RunMetrics run_experiment(const ExperimentConfig& c, const RunOptions& opt = {});

/// Fills the whole-run summary fields from the per-frame records.
void summarize(RunMetrics& m, const ExperimentConfig& c);

/// Monte-Carlo runs with seeds seed, seed+1, ... executed in parallel.
std::vector<RunMetrics> sweep(const ExperimentConfig& c, int runs);

void write_metrics_csv(std::ostream& os, const RunMetrics& m);
void write_trajectory_csv(std::ostream& os, const RunMetrics& m);
void write_summary_header(std::ostream& os);
void write_summary_row(std::ostream& os, const RunMetrics& m);
/// Parses files written by write_metrics_csv and write_trajectory_csv.
RunMetrics read_run_csv(const std::filesystem::path& metrics, const std::filesystem::path& trajectory);

void write_run(const std::filesystem::path& dir, const RunMetrics& m);

}  // namespace ekfslam

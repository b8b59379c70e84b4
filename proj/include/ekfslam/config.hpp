#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace ekfslam {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every tunable of a run. Read from and written to plain key=value text.
struct ExperimentConfig {
  // run
  std::string mode{"imu"};  // cv | imu
  std::uint64_t seed{1};
  int runs{20};
  double duration{60.0};
  double camera_rate{50.0};
  double imu_rate{100.0};

  // camera
  double fu{500.0};
  double fv{500.0};
  double u0{320.0};
  double v0{240.0};
  int width{640};
  int height{480};
  double pixel_sigma{0.5};
  double extrinsic_x{0.05};
  double extrinsic_y{0.0};
  double extrinsic_z{0.02};

  // map and landmarks
  int map_capacity{320};
  double rho0{0.5};
  double sigma_rho0{0.25};
  int patch_side{11};
  double linearity_threshold{0.1};
  bool reparametrize{true};
  int min_corrections_for_conversion{3};
  std::string map_policy{"slam"};  // slam | vo
  double min_match_ratio{0.5};
  int max_consecutive_failures{5};
  int grace_frames{10};
  int max_landmarks{40};

  // data association
  bool ransac{true};
  int ransac_max_iterations{10};
  double ransac_probability{0.99};
  double strong_confidence{0.95};
  double gate_confidence{0.99};
  double search_sigma{3.0};
  int correction_budget{20};
  double time_budget_ms{0.0};
  std::string ranking{"det"};  // det | trace
  int grid_cols{5};
  int grid_rows{4};
  int max_detections{1};

  // vision
  int harris_window{5};
  double harris_k{0.04};
  double harris_min_response{1e7};
  double zncc_threshold{0.85};

  // motion noise
  double cv_linear_acc_psd{4.0};
  double cv_angular_acc_psd{4.0};
  double acc_psd{1e-4};
  double gyro_psd{1e-6};
  double acc_bias_psd{1e-6};
  double gyro_bias_psd{1e-8};
  double gyro_limit_deg{300.0};
  bool saturation{true};

  // true sensor imperfections
  double acc_bias_sigma{0.02};
  double gyro_bias_sigma{0.002};
  double imu_noise_scale{1.0};  ///< multiplies the simulated white noise only

  // initial uncertainty
  double init_pos_sigma{1e-3};
  double init_ang_sigma_deg{0.1};
  double init_vel_sigma{0.01};
  double init_angvel_sigma{0.01};
  double init_acc_bias_sigma{0.03};
  double init_gyro_bias_sigma{0.003};
  double init_gravity_sigma{0.01};

  // world
  int world_points{200};
  double room_x{6.0};
  double room_y{6.0};
  double room_z{3.0};
  double relief{0.5};
  double disc_radius{0.08};
  double image_noise{2.0};

  // trajectory
  std::string dynamics{"low"};  // low | high
  double burst_time{8.0};
  double burst_duration{2.0};

  // outliers
  double outlier_fraction{0.0};
  double outlier_offset_min{4.0};
  double outlier_offset_max{10.0};

  // metrics
  double divergence_nees{100.0};
  int divergence_window{10};
  bool truth_uncertainty{false};
  double truth_sigma_pos{0.001};
  double truth_sigma_ang_deg{0.57};
  bool obs_log{false};

  void validate() const;
  std::vector<std::string> keys() const;
};

/// Applies key=value lines on top of `base`. Blank lines and '#' comments
/// are ignored; unknown keys and malformed values throw ConfigError.
ExperimentConfig parse_config(std::istream& is, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value);
void write_config(std::ostream& os, const ExperimentConfig& c);

}  // namespace ekfslam

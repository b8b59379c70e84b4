#pragma once

#include "ekfslam/geometry.hpp"
#include "ekfslam/motion.hpp"

#include <cstdint>
#include <vector>

namespace ekfslam {

enum class Dynamics { Low, High };

struct TrajectorySpec {
  Dynamics dynamics{Dynamics::Low};
  double duration{60.0};
  double camera_rate{50.0};
  double imu_rate{100.0};
  double burst_time{8.0};      ///< start of the high-dynamics episode (s)
  double burst_duration{2.0};  ///< length of the episode including its ramps (s)
  Vec3 centre{0.0, 0.0, 1.5};

  /// Throws std::invalid_argument for infeasible rates or durations.
  void validate() const;
  int imu_per_frame() const;
};

struct TruthSample {
  double t{0.0};
  Vec3 p{Vec3::Zero()};
  Quaternion q{};
  Vec3 v{Vec3::Zero()};
  Vec3 a{Vec3::Zero()};       ///< world acceleration
  Vec3 w_body{Vec3::Zero()};  ///< body angular rate
};

/// Truth at the IMU rate; camera frames fall on every imu_per_frame-th sample.
struct GroundTruth {
  std::vector<TruthSample> samples;
  double imu_dt{0.01};
  int imu_per_frame{2};
  double sigma_pos{0.001};
  double sigma_ang{0.57 * 3.14159265358979323846 / 180.0};

  int frame_count() const;
  const TruthSample& frame(int k) const { return samples.at(static_cast<std::size_t>(k) * imu_per_frame); }
};

GroundTruth generate_trajectory(const TrajectorySpec& spec, std::uint64_t seed);

struct DynamicsSummary {
  double peak_yaw_rate_deg{0.0};
  double peak_angular_rate_deg{0.0};
  double peak_angular_acc_deg{0.0};
  double peak_linear_acc_g{0.0};
};

DynamicsSummary summarize_dynamics(const GroundTruth& gt);

struct ImuSimSpec {
  double acc_psd{1e-4};
  double gyro_psd{1e-6};
  Vec3 acc_bias{Vec3::Zero()};
  Vec3 gyro_bias{Vec3::Zero()};
  Vec3 gravity{0.0, 0.0, -9.81};
  double rate_limit{300.0 * 3.14159265358979323846 / 180.0};
  bool clip{true};
};

/// One sample per truth interval: gyro is the exact mean rate over the
/// interval, acc the specific force giving the exact velocity change.
std::vector<ImuSample> synth_imu(const GroundTruth& gt, const ImuSimSpec& spec, std::uint64_t seed);

}  // namespace ekfslam

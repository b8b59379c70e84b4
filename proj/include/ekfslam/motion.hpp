#pragma once

#include "ekfslam/geometry.hpp"

#include <array>

namespace ekfslam {

/// Constant-velocity robot state (p q v w).
struct CVState {
  static constexpr int kSize = 13;
  Vec3 p{Vec3::Zero()};
  Quaternion q{};
  Vec3 v{Vec3::Zero()};
  Vec3 w{Vec3::Zero()};

  Eigen::VectorXd to_vector() const;
  static CVState from_vector(const Eigen::VectorXd& x);
};

/// Inertial robot state (p q v a_b w_b g).
struct InertialState {
  static constexpr int kSize = 19;
  Vec3 p{Vec3::Zero()};
  Quaternion q{};
  Vec3 v{Vec3::Zero()};
  Vec3 acc_bias{Vec3::Zero()};
  Vec3 gyro_bias{Vec3::Zero()};
  Vec3 gravity{0.0, 0.0, -9.81};

  Eigen::VectorXd to_vector() const;
  static InertialState from_vector(const Eigen::VectorXd& x);
};

// Offsets shared by both robot layouts.
inline constexpr int kPosOffset = 0;
inline constexpr int kQuatOffset = 3;
inline constexpr int kVelOffset = 7;

struct ImuSample {
  double t{0.0};
  Vec3 acc{Vec3::Zero()};   ///< specific force, body frame (m/s^2)
  Vec3 gyro{Vec3::Zero()};  ///< angular rate, body frame (rad/s)
  double dt{0.01};
  std::array<bool, 3> saturated{false, false, false};

  bool any_saturated() const { return saturated[0] || saturated[1] || saturated[2]; }
};

/// Marks every gyro axis whose magnitude reaches the rate limit.
void flag_saturation(ImuSample& s, double rate_limit);

/// Continuous-time white-noise power spectral densities, one per perturbation axis.
struct ContinuousNoiseSpec {
  Eigen::VectorXd density;

  /// Velocity and angular-velocity perturbations of the constant-velocity model.
  static ContinuousNoiseSpec constant_velocity(double linear_acc_psd, double angular_acc_psd);
  /// Accelerometer, gyrometer and both bias random walks.
  static ContinuousNoiseSpec inertial(double acc_psd, double gyro_psd, double acc_bias_psd,
                                      double gyro_bias_psd);
};

/// Discrete covariance of the integrated perturbation: density * dt per axis.
Eigen::MatrixXd discretize_noise(const ContinuousNoiseSpec& spec, double dt);

struct CvPrediction {
  CVState state;
  Eigen::Matrix<double, CVState::kSize, CVState::kSize> f;
  Eigen::Matrix<double, CVState::kSize, 6> g;  ///< wrt (dv, dw) impulses
};

CvPrediction cv_predict(const CVState& s, double dt);

struct ImuPrediction {
  InertialState state;
  Eigen::Matrix<double, InertialState::kSize, InertialState::kSize> f;
  /// wrt (velocity impulse, rotation impulse, acc-bias step, gyro-bias step)
  Eigen::Matrix<double, InertialState::kSize, 12> g;
  bool saturated{false};
};

ImuPrediction imu_predict(const InertialState& s, const ImuSample& u);

}  // namespace ekfslam

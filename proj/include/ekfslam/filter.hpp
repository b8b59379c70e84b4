#pragma once

#include "ekfslam/ekf_map.hpp"
#include "ekfslam/landmarks.hpp"
#include "ekfslam/motion.hpp"
#include "ekfslam/observation.hpp"

#include <map>
#include <vector>

namespace ekfslam {

enum class MotionMode { ConstantVelocity, Inertial };

const char* to_string(MotionMode m);

struct CameraSensor {
  PinholeIntrinsics intrinsics;
  Frame extrinsic;  ///< camera in robot frame, not estimated
  double pixel_sigma{0.5};
};

struct Landmark {
  int id{-1};
  BlockHandle block;
  LandmarkType type{LandmarkType::Ahp};
  LandmarkDescriptor descriptor;
  int truth_id{-1};
  long created_frame{0};
  std::vector<Observation> observations;  ///< one per sensor
};

/// Robot, sensors and landmarks over one StochasticMap.
class SlamFilter {
 public:
  SlamFilter(int capacity, MotionMode mode, ContinuousNoiseSpec noise);

  void init_robot(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);
  int add_sensor(const CameraSensor& s);

  MotionMode mode() const { return mode_; }
  int robot_size() const;
  BlockHandle robot() const { return robot_; }
  StochasticMap& map() { return map_; }
  const StochasticMap& map() const { return map_; }
  const CameraSensor& sensor(int i) const { return sensors_.at(i); }
  int sensor_count() const { return static_cast<int>(sensors_.size()); }
  const ContinuousNoiseSpec& noise() const { return noise_; }

  /// Constant-velocity step.
  void predict(double dt);
  /// Inertial step; returns whether the sample was saturated.
  bool predict(const ImuSample& u);

  Eigen::VectorXd robot_mean() const { return map_.mean(robot_); }
  Frame robot_frame() const;
  Frame camera_frame(int sensor) const;
  /// d(t_c, q_c)/d(robot block), 7 x robot_size.
  Eigen::MatrixXd camera_jacobian(int sensor) const;

  /// Undelayed AHP initialization from a pixel in `sensor`. Returns the id.
  int add_ahp_landmark(int sensor, const Vec2& pixel, double rho0, double sigma_rho0, LandmarkDescriptor d,
                       int truth_id, long frame);
  void remove_landmark(int id);
  void reparametrize_landmark(int id);

  std::map<int, Landmark>& landmarks() { return landmarks_; }
  const std::map<int, Landmark>& landmarks() const { return landmarks_; }
  Landmark& landmark(int id) { return landmarks_.at(id); }
  const Landmark& landmark(int id) const { return landmarks_.at(id); }

  /// EKF correction with the stored innovation of `obs`, then quaternion
  /// renormalization.
  CorrectionStatus correct(Observation& obs);

  std::vector<int> joint_indices(const Landmark& l) const;

 private:
  StochasticMap map_;
  MotionMode mode_;
  ContinuousNoiseSpec noise_;
  BlockHandle robot_;
  std::vector<CameraSensor> sensors_;
  std::map<int, Landmark> landmarks_;
  int next_id_{0};
};

}  // namespace ekfslam

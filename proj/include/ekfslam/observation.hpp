#pragma once

#include "ekfslam/geometry.hpp"
#include "ekfslam/landmarks.hpp"
#include "ekfslam/vision.hpp"

#include <optional>

namespace ekfslam {

class SlamFilter;

enum class ObsStatus { NotVisible, Unmatched, Matched, GatedOut, Corrected };

const char* to_string(ObsStatus s);

struct ObsCounters {
  long predicted{0};
  long visible{0};
  long searched{0};
  long matched{0};
  long corrected{0};
  long consecutive_failures{0};
};

/// Projection of one landmark through one camera, with Jacobians wrt the
/// robot block (p and q columns only are non-zero) and the landmark block.
struct ObservationModel {
  Vec2 pixel{Vec2::Zero()};
  double depth{0.0};
  bool in_front{false};
  Eigen::MatrixXd h_robot;
  Eigen::MatrixXd h_landmark;
};

ObservationModel evaluate_observation(const Eigen::VectorXd& robot, LandmarkType type, const Eigen::VectorXd& landmark,
                                      const Frame& extrinsic, const PinholeIntrinsics& k);

/// Per (sensor, landmark) pair state.
struct Observation {
  int sensor{0};
  int landmark{-1};

  bool visible{false};
  Vec2 predicted{Vec2::Zero()};
  Mat2 predicted_cov{Mat2::Zero()};  ///< H P H^T
  Mat2 s{Mat2::Identity()};          ///< H P H^T + R
  Eigen::MatrixXd h_robot;
  Eigen::MatrixXd h_landmark;
  double depth{0.0};

  GrayImage appearance;
  bool appearance_degenerate{false};
  std::optional<Vec2> measured;
  double score{0.0};

  Vec2 innovation{Vec2::Zero()};
  double d2{0.0};
  ObsStatus status{ObsStatus::NotVisible};
  ObsCounters counters;

  Eigen::MatrixXd jacobian() const;
};

/// Refreshes the prediction from the current map. `margin` is the border
/// distance a predicted pixel needs to count as visible.
void predict_observation(Observation& obs, const SlamFilter& f, double margin);

/// Prediction from an explicit robot/landmark mean and their joint covariance.
void predict_observation(Observation& obs, const SlamFilter& f, const Eigen::VectorXd& robot,
                         const Eigen::VectorXd& landmark, const Eigen::MatrixXd& joint_cov, double margin);

struct Innovation {
  Vec2 y;
  Mat2 s;
  double d2{0.0};
  bool singular{false};
};

/// y = z - h(x) against the stored prediction; sets Matched, or GatedOut
/// when d2 exceeds the gate.
Innovation innovate(Observation& obs, const Vec2& z, double gate);

}  // namespace ekfslam

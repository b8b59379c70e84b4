#pragma once

#include "ekfslam/ekf_map.hpp"
#include "ekfslam/geometry.hpp"
#include "ekfslam/image.hpp"

namespace ekfslam {

/// Anchored homogeneous point: anchor p0, direction m, inverse distance rho.
/// The Euclidean point is p0 + m / (|m| rho); the scale of m is a gauge.
struct AhpLandmark {
  static constexpr int kSize = 7;
  Vec3 anchor{Vec3::Zero()};
  Vec3 direction{0.0, 0.0, 1.0};
  double inverse_distance{0.5};

  Eigen::VectorXd to_vector() const;
  static AhpLandmark from_vector(const Eigen::VectorXd& x);
};

struct EuclideanLandmark {
  static constexpr int kSize = 3;
  Vec3 position{Vec3::Zero()};
};

enum class LandmarkType { Ahp, Euclidean };

int landmark_size(LandmarkType type);

/// Appearance captured when the landmark is initialized.
struct LandmarkDescriptor {
  GrayImage patch;  ///< odd side, centred on ref_pixel
  Frame ref_pose;   ///< camera pose in the world at capture
  Vec2 ref_pixel{Vec2::Zero()};
};

class PointAtInfinityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

using Mat7 = Eigen::Matrix<double, 7, 7>;

struct AhpInitResult {
  AhpLandmark mean;
  Mat7 covariance;
  Eigen::Matrix<double, 7, 3> jac_cam_t;
  Eigen::Matrix<double, 7, 4> jac_cam_q;
  Eigen::Matrix<double, 7, 2> jac_pixel;
  Eigen::Matrix<double, 7, 1> jac_rho;
};

/// Undelayed initialization from one pixel. cam_pose_cov is the 7x7
/// covariance of (t, q) of the camera frame.
AhpInitResult ahp_init(const Frame& cam, const PinholeIntrinsics& k, const Vec2& pixel, double rho0,
                       double sigma_rho0, double pixel_noise, const Mat7& cam_pose_cov = Mat7::Zero());

Vec3 euclideanize(const AhpLandmark& l);
Eigen::Matrix<double, 3, 7> euclideanize_jac(const AhpLandmark& l);

/// Linearity index L = 4 sigma_rho / rho * |cos a|, a being the angle between
/// the anchor->point and camera->point rays. Infinite when rho <= 0.
double linearity_index(const AhpLandmark& l, double sigma_rho, const Vec3& cam_position);

/// Landmark expressed in camera coordinates (homogeneously scaled for AHP),
/// with Jacobians wrt the camera frame and the landmark parameters.
struct CameraPoint {
  Vec3 h;
  Mat3 wrt_t;
  Mat34 wrt_q;
  Eigen::MatrixXd wrt_landmark;  ///< 3 x landmark_size
};

CameraPoint landmark_in_camera(LandmarkType type, const Eigen::VectorXd& params, const Frame& cam);

/// Best Euclidean estimate of a landmark, whichever its parametrization.
Vec3 landmark_point(LandmarkType type, const Eigen::VectorXd& params);

/// Replaces an AHP block by its Euclidean conversion, propagating every
/// covariance through the conversion Jacobian. Returns the new block.
BlockHandle reparametrize(StochasticMap& map, BlockHandle ahp_block);

}  // namespace ekfslam

#include "ekfslam/landmarks.hpp"

#include <cmath>
#include <limits>

namespace ekfslam {

Eigen::VectorXd AhpLandmark::to_vector() const {
  Eigen::VectorXd x(kSize);
  x << anchor, direction, inverse_distance;
  return x;
}

AhpLandmark AhpLandmark::from_vector(const Eigen::VectorXd& x) {
  if (x.size() != kSize) throw std::invalid_argument("AhpLandmark: wrong size");
  return {x.segment<3>(0), x.segment<3>(3), x(6)};
}

int landmark_size(LandmarkType type) {
  return type == LandmarkType::Ahp ? AhpLandmark::kSize : EuclideanLandmark::kSize;
}

AhpInitResult ahp_init(const Frame& cam, const PinholeIntrinsics& k, const Vec2& pixel, double rho0,
                       double sigma_rho0, double pixel_noise, const Mat7& cam_pose_cov) {
  if (!(rho0 > 0)) throw std::invalid_argument("ahp_init: rho0 must be positive");
  const Vec3 ray = pinhole_backproject(k, pixel);
  const Mat3 r = cam.q.rotation_matrix();

  AhpInitResult out;
  out.mean = {cam.t, r * ray, rho0};

  out.jac_cam_t.setZero();
  out.jac_cam_t.topRows<3>().setIdentity();
  out.jac_cam_q.setZero();
  out.jac_cam_q.middleRows<3>(3) = rotate_jac_q(cam.q, ray);
  out.jac_pixel.setZero();
  out.jac_pixel.middleRows<3>(3) = r * pinhole_backproject_jac(k, pixel);
  out.jac_rho.setZero();
  out.jac_rho(6) = 1.0;

  Eigen::Matrix<double, 7, 7> jc;
  jc << out.jac_cam_t, out.jac_cam_q;
  out.covariance = jc * cam_pose_cov * jc.transpose() +
                   pixel_noise * pixel_noise * out.jac_pixel * out.jac_pixel.transpose() +
                   sigma_rho0 * sigma_rho0 * out.jac_rho * out.jac_rho.transpose();
  return out;
}

Vec3 euclideanize(const AhpLandmark& l) {
  if (!(l.inverse_distance > 0)) throw PointAtInfinityError("AHP landmark at or beyond infinity");
  return l.anchor + l.direction / (l.direction.norm() * l.inverse_distance);
}

Eigen::Matrix<double, 3, 7> euclideanize_jac(const AhpLandmark& l) {
  if (!(l.inverse_distance > 0)) throw PointAtInfinityError("AHP landmark at or beyond infinity");
  const double n = l.direction.norm();
  const Vec3 u = l.direction / n;
  const double rho = l.inverse_distance;
  Eigen::Matrix<double, 3, 7> j;
  j.leftCols<3>().setIdentity();
  j.middleCols<3>(3) = (Mat3::Identity() - u * u.transpose()) / (n * rho);
  j.col(6) = -u / (rho * rho);
  return j;
}

double linearity_index(const AhpLandmark& l, double sigma_rho, const Vec3& cam_position) {
  if (sigma_rho < 0) throw std::invalid_argument("linearity_index: negative sigma");
  if (!(l.inverse_distance > 0)) return std::numeric_limits<double>::infinity();
  const Vec3 x = euclideanize(l);
  const Vec3 from_anchor = x - l.anchor;
  const Vec3 from_cam = x - cam_position;
  const double denom = from_anchor.norm() * from_cam.norm();
  const double cos_a = denom > 0 ? from_anchor.dot(from_cam) / denom : 1.0;
  return 4.0 * sigma_rho / l.inverse_distance * std::abs(cos_a);
}

CameraPoint landmark_in_camera(LandmarkType type, const Eigen::VectorXd& params, const Frame& cam) {
  const Mat3 rt = cam.q.rotation_matrix().transpose();
  CameraPoint out;
  if (type == LandmarkType::Euclidean) {
    const Vec3 d = params.head<3>() - cam.t;
    out.h = rt * d;
    out.wrt_t = -rt;
    out.wrt_q = rotate_inverse_jac_q(cam.q, d);
    out.wrt_landmark = rt;
    return out;
  }
  const AhpLandmark l = AhpLandmark::from_vector(params);
  const double n = l.direction.norm();
  const Vec3 u = l.direction / n;
  const double rho = l.inverse_distance;
  const Vec3 w = rho * (l.anchor - cam.t) + u;
  out.h = rt * w;
  out.wrt_t = -rho * rt;
  out.wrt_q = rotate_inverse_jac_q(cam.q, w);
  out.wrt_landmark.resize(3, 7);
  out.wrt_landmark.leftCols(3) = rho * rt;
  out.wrt_landmark.middleCols(3, 3) = rt * (Mat3::Identity() - u * u.transpose()) / n;
  out.wrt_landmark.col(6) = rt * (l.anchor - cam.t);
  return out;
}

Vec3 landmark_point(LandmarkType type, const Eigen::VectorXd& params) {
  if (type == LandmarkType::Euclidean) return params.head<3>();
  return euclideanize(AhpLandmark::from_vector(params));
}

BlockHandle reparametrize(StochasticMap& map, BlockHandle ahp_block) {
  const AhpLandmark l = AhpLandmark::from_vector(map.mean(ahp_block));
  const Vec3 x = euclideanize(l);
  const Eigen::MatrixXd j = euclideanize_jac(l);
  const BlockHandle h = map.allocate_block(BlockRole::Landmark, EuclideanLandmark::kSize);
  const LinearSource src{ahp_block, j};
  map.initialize_block(h, x, std::span(&src, 1), Eigen::Matrix3d::Zero());
  map.remove_block(ahp_block);
  return h;
}

}  // namespace ekfslam

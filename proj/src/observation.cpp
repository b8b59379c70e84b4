#include "ekfslam/observation.hpp"

#include "ekfslam/filter.hpp"
#include "ekfslam/motion.hpp"

#include <limits>
#include <stdexcept>

namespace ekfslam {

const char* to_string(ObsStatus s) {
  switch (s) {
    case ObsStatus::NotVisible: return "not_visible";
    case ObsStatus::Unmatched: return "unmatched";
    case ObsStatus::Matched: return "matched";
    case ObsStatus::GatedOut: return "gated_out";
    case ObsStatus::Corrected: return "corrected";
  }
  return "?";
}

ObservationModel evaluate_observation(const Eigen::VectorXd& robot, LandmarkType type, const Eigen::VectorXd& landmark,
                                      const Frame& extrinsic, const PinholeIntrinsics& k) {
  const Frame body{robot.segment<3>(kPosOffset), Quaternion::from_vector(robot.segment<4>(kQuatOffset))};
  const Frame cam = body.compose(extrinsic);
  const CameraPoint cp = landmark_in_camera(type, landmark, cam);
  const Projection pr = pinhole_project(k, cp.h);

  ObservationModel out;
  out.in_front = pr.in_front;
  out.depth = pr.depth;
  if (!pr.in_front) return out;
  out.pixel = pr.pixel;

  // Camera pose wrt robot p and q through the fixed extrinsic.
  const Mat34 dtc_dq = rotate_jac_q(body.q, extrinsic.t);
  const Mat4 dqc_dq = quat_right_matrix(extrinsic.q);
  out.h_robot = Eigen::MatrixXd::Zero(2, robot.size());
  out.h_robot.block<2, 3>(0, kPosOffset) = pr.jacobian * cp.wrt_t;
  out.h_robot.block<2, 4>(0, kQuatOffset) = pr.jacobian * (cp.wrt_t * dtc_dq + cp.wrt_q * dqc_dq);
  out.h_landmark = pr.jacobian * cp.wrt_landmark;
  return out;
}

Eigen::MatrixXd Observation::jacobian() const {
  Eigen::MatrixXd h(2, h_robot.cols() + h_landmark.cols());
  h << h_robot, h_landmark;
  return h;
}

void predict_observation(Observation& obs, const SlamFilter& f, const Eigen::VectorXd& robot,
                         const Eigen::VectorXd& landmark, const Eigen::MatrixXd& joint_cov, double margin) {
  const Landmark& l = f.landmark(obs.landmark);
  const CameraSensor& s = f.sensor(obs.sensor);
  const ObservationModel m = evaluate_observation(robot, l.type, landmark, s.extrinsic, s.intrinsics);
  obs.measured.reset();
  obs.score = 0.0;
  obs.depth = m.depth;
  obs.visible = m.in_front && s.intrinsics.contains(m.pixel, margin);
  if (!m.in_front) {
    obs.status = ObsStatus::NotVisible;
    return;
  }
  obs.predicted = m.pixel;
  obs.h_robot = m.h_robot;
  obs.h_landmark = m.h_landmark;
  const Eigen::MatrixXd h = obs.jacobian();
  const Mat2 hph = h * joint_cov * h.transpose();
  obs.predicted_cov = 0.5 * (hph + hph.transpose());
  obs.s = obs.predicted_cov + s.pixel_sigma * s.pixel_sigma * Mat2::Identity();
  obs.status = obs.visible ? ObsStatus::Unmatched : ObsStatus::NotVisible;
}

void predict_observation(Observation& obs, const SlamFilter& f, double margin) {
  const Landmark& l = f.landmark(obs.landmark);
  const std::vector<int> idx = f.joint_indices(l);
  const Eigen::VectorXd x = f.map().state()(idx);
  const Eigen::MatrixXd p = f.map().covariance_matrix()(idx, idx);
  const int nr = f.robot_size();
  predict_observation(obs, f, x.head(nr), x.tail(x.size() - nr), p, margin);
}

Innovation innovate(Observation& obs, const Vec2& z, double gate) {
  Innovation out;
  out.y = z - obs.predicted;
  out.s = obs.s;
  obs.measured = z;
  obs.innovation = out.y;
  try {
    out.d2 = mahalanobis(out.y, out.s);
  } catch (const NotPositiveDefiniteError&) {
    out.singular = true;
    out.d2 = std::numeric_limits<double>::infinity();
  }
  obs.d2 = out.d2;
  obs.status = out.d2 <= gate ? ObsStatus::Matched : ObsStatus::GatedOut;
  return out;
}

}  // namespace ekfslam

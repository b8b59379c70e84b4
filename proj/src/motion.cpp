#include "ekfslam/motion.hpp"

#include <cmath>
#include <stdexcept>

namespace ekfslam {

Eigen::VectorXd CVState::to_vector() const {
  Eigen::VectorXd x(kSize);
  x << p, q.to_vector(), v, w;
  return x;
}

CVState CVState::from_vector(const Eigen::VectorXd& x) {
  if (x.size() != kSize) throw std::invalid_argument("CVState: wrong size");
  return {x.segment<3>(0), Quaternion::from_vector(x.segment<4>(3)), x.segment<3>(7), x.segment<3>(10)};
}

Eigen::VectorXd InertialState::to_vector() const {
  Eigen::VectorXd x(kSize);
  x << p, q.to_vector(), v, acc_bias, gyro_bias, gravity;
  return x;
}

InertialState InertialState::from_vector(const Eigen::VectorXd& x) {
  if (x.size() != kSize) throw std::invalid_argument("InertialState: wrong size");
  return {x.segment<3>(0), Quaternion::from_vector(x.segment<4>(3)), x.segment<3>(7),
          x.segment<3>(10), x.segment<3>(13), x.segment<3>(16)};
}

void flag_saturation(ImuSample& s, double rate_limit) {
  for (int i = 0; i < 3; ++i) s.saturated[i] = std::abs(s.gyro(i)) >= rate_limit;
}

ContinuousNoiseSpec ContinuousNoiseSpec::constant_velocity(double linear_acc_psd, double angular_acc_psd) {
  ContinuousNoiseSpec s;
  s.density.resize(6);
  s.density << Vec3::Constant(linear_acc_psd), Vec3::Constant(angular_acc_psd);
  return s;
}

ContinuousNoiseSpec ContinuousNoiseSpec::inertial(double acc_psd, double gyro_psd, double acc_bias_psd,
                                                  double gyro_bias_psd) {
  ContinuousNoiseSpec s;
  s.density.resize(12);
  s.density << Vec3::Constant(acc_psd), Vec3::Constant(gyro_psd), Vec3::Constant(acc_bias_psd),
      Vec3::Constant(gyro_bias_psd);
  return s;
}

Eigen::MatrixXd discretize_noise(const ContinuousNoiseSpec& spec, double dt) {
  if (dt < 0) throw std::invalid_argument("discretize_noise: negative period");
  if ((spec.density.array() < 0).any()) throw std::invalid_argument("discretize_noise: negative density");
  return (spec.density * dt).asDiagonal();
}

CvPrediction cv_predict(const CVState& s, double dt) {
  if (!(dt > 0)) throw std::invalid_argument("cv_predict: dt must be positive");
  CvPrediction out;
  const Vec3 theta = s.w * dt;
  const Quaternion dq = quat_from_rotation_vector(theta);
  out.state = s;
  out.state.p = s.p + s.v * dt;
  out.state.q = quat_product(s.q, dq);

  const Eigen::Matrix<double, 4, 3> dq_dw = quat_left_matrix(s.q) * rotation_vector_jac(theta) * dt;

  auto& f = out.f;
  f.setIdentity();
  f.block<3, 3>(0, 7) = dt * Mat3::Identity();
  f.block<4, 4>(3, 3) = quat_right_matrix(dq);
  f.block<4, 3>(3, 10) = dq_dw;

  out.g.setZero();
  out.g.block<3, 3>(7, 0).setIdentity();
  out.g.block<3, 3>(10, 3).setIdentity();
  return out;
}

ImuPrediction imu_predict(const InertialState& s, const ImuSample& u) {
  if (!(u.dt > 0)) throw std::invalid_argument("imu_predict: dt must be positive");
  const double dt = u.dt;
  const Vec3 acc_body = u.acc - s.acc_bias;
  const Mat3 r = s.q.rotation_matrix();
  const Vec3 a_world = r * acc_body + s.gravity;
  const Vec3 theta = (u.gyro - s.gyro_bias) * dt;
  const Quaternion dq = quat_from_rotation_vector(theta);

  ImuPrediction out;
  out.saturated = u.any_saturated();
  out.state = s;
  out.state.p = s.p + s.v * dt + 0.5 * a_world * dt * dt;
  out.state.v = s.v + a_world * dt;
  out.state.q = quat_product(s.q, dq);

  const Mat34 da_dq = rotate_jac_q(s.q, acc_body);
  const Mat43 dq_dtheta = quat_left_matrix(s.q) * rotation_vector_jac(theta);
  const Mat3 eye = Mat3::Identity();

  auto& f = out.f;
  f.setIdentity();
  // position
  f.block<3, 4>(0, 3) = 0.5 * dt * dt * da_dq;
  f.block<3, 3>(0, 7) = dt * eye;
  f.block<3, 3>(0, 10) = -0.5 * dt * dt * r;
  f.block<3, 3>(0, 16) = 0.5 * dt * dt * eye;
  // orientation
  f.block<4, 4>(3, 3) = quat_right_matrix(dq);
  f.block<4, 3>(3, 13) = -dt * dq_dtheta;
  // velocity
  f.block<3, 4>(7, 3) = dt * da_dq;
  f.block<3, 3>(7, 10) = -dt * r;
  f.block<3, 3>(7, 16) = dt * eye;

  auto& g = out.g;
  g.setZero();
  g.block<3, 3>(7, 0) = eye;
  g.block<4, 3>(3, 3) = dq_dtheta;
  g.block<3, 3>(10, 6) = eye;
  g.block<3, 3>(13, 9) = eye;
  return out;
}

}  // namespace ekfslam

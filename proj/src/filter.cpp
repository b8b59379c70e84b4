#include "ekfslam/filter.hpp"

#include <array>
#include <stdexcept>

namespace ekfslam {

const char* to_string(MotionMode m) { return m == MotionMode::Inertial ? "imu" : "cv"; }

SlamFilter::SlamFilter(int capacity, MotionMode mode, ContinuousNoiseSpec noise)
    : map_(capacity), mode_(mode), noise_(std::move(noise)) {
  const int expected = mode == MotionMode::Inertial ? 12 : 6;
  if (noise_.density.size() != expected) throw std::invalid_argument("noise spec does not match the motion model");
  robot_ = map_.allocate_block(BlockRole::Robot, robot_size());
}

int SlamFilter::robot_size() const { return mode_ == MotionMode::Inertial ? InertialState::kSize : CVState::kSize; }

void SlamFilter::init_robot(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  if (mean.size() != robot_size() || cov.rows() != robot_size() || cov.cols() != robot_size())
    throw std::invalid_argument("robot prior has the wrong size");
  map_.set_mean(robot_, mean);
  map_.set_covariance(robot_, cov);
}

int SlamFilter::add_sensor(const CameraSensor& s) {
  s.intrinsics.validate();
  sensors_.push_back(s);
  for (auto& [id, l] : landmarks_) {
    Observation o;
    o.sensor = static_cast<int>(sensors_.size()) - 1;
    o.landmark = id;
    l.observations.push_back(o);
  }
  return static_cast<int>(sensors_.size()) - 1;
}

void SlamFilter::predict(double dt) {
  if (mode_ != MotionMode::ConstantVelocity) throw std::logic_error("constant-velocity step on an inertial filter");
  const CvPrediction pr = cv_predict(CVState::from_vector(map_.mean(robot_)), dt);
  const Eigen::MatrixXd q = pr.g * discretize_noise(noise_, dt) * pr.g.transpose();
  map_.predict_block(robot_, pr.state.to_vector(), pr.f, q);
}

bool SlamFilter::predict(const ImuSample& u) {
  if (mode_ != MotionMode::Inertial) throw std::logic_error("inertial step on a constant-velocity filter");
  const ImuPrediction pr = imu_predict(InertialState::from_vector(map_.mean(robot_)), u);
  const Eigen::MatrixXd q = pr.g * discretize_noise(noise_, u.dt) * pr.g.transpose();
  map_.predict_block(robot_, pr.state.to_vector(), pr.f, q);
  return pr.saturated;
}

Frame SlamFilter::robot_frame() const {
  const Eigen::VectorXd x = map_.mean(robot_);
  return {x.segment<3>(kPosOffset), Quaternion::from_vector(x.segment<4>(kQuatOffset))};
}

Frame SlamFilter::camera_frame(int sensor) const { return robot_frame().compose(sensors_.at(sensor).extrinsic); }

Eigen::MatrixXd SlamFilter::camera_jacobian(int sensor) const {
  const Frame r = robot_frame();
  const Frame& e = sensors_.at(sensor).extrinsic;
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(7, robot_size());
  j.block<3, 3>(0, kPosOffset).setIdentity();
  j.block<3, 4>(0, kQuatOffset) = rotate_jac_q(r.q, e.t);
  j.block<4, 4>(3, kQuatOffset) = quat_right_matrix(e.q);
  return j;
}

int SlamFilter::add_ahp_landmark(int sensor, const Vec2& pixel, double rho0, double sigma_rho0, LandmarkDescriptor d,
                                 int truth_id, long frame) {
  const CameraSensor& s = sensors_.at(sensor);
  const AhpInitResult init = ahp_init(camera_frame(sensor), s.intrinsics, pixel, rho0, sigma_rho0, s.pixel_sigma);
  const BlockHandle h = map_.allocate_block(BlockRole::Landmark, AhpLandmark::kSize);
  Eigen::Matrix<double, 7, 7> jc;
  jc << init.jac_cam_t, init.jac_cam_q;
  const LinearSource src{robot_, jc * camera_jacobian(sensor)};
  map_.initialize_block(h, init.mean.to_vector(), std::span(&src, 1), init.covariance);

  Landmark l;
  l.id = next_id_++;
  l.block = h;
  l.type = LandmarkType::Ahp;
  l.descriptor = std::move(d);
  l.truth_id = truth_id;
  l.created_frame = frame;
  for (int i = 0; i < sensor_count(); ++i) {
    Observation o;
    o.sensor = i;
    o.landmark = l.id;
    l.observations.push_back(o);
  }
  const int id = l.id;
  landmarks_.emplace(id, std::move(l));
  return id;
}

void SlamFilter::remove_landmark(int id) {
  auto it = landmarks_.find(id);
  if (it == landmarks_.end()) throw std::invalid_argument("unknown landmark");
  map_.remove_block(it->second.block);
  landmarks_.erase(it);
}

void SlamFilter::reparametrize_landmark(int id) {
  Landmark& l = landmarks_.at(id);
  if (l.type != LandmarkType::Ahp) return;
  l.block = reparametrize(map_, l.block);
  l.type = LandmarkType::Euclidean;
}

std::vector<int> SlamFilter::joint_indices(const Landmark& l) const {
  const std::array<BlockHandle, 2> hs{robot_, l.block};
  return map_.indices(hs);
}

CorrectionStatus SlamFilter::correct(Observation& obs) {
  const Landmark& l = landmarks_.at(obs.landmark);
  const std::array<BlockHandle, 2> hs{robot_, l.block};
  const CorrectionStatus st = map_.correct(hs, obs.jacobian(), obs.innovation, obs.s);
  if (st == CorrectionStatus::Applied) {
    Eigen::VectorXd x = map_.mean(robot_);
    x.segment<4>(kQuatOffset).normalize();
    map_.set_mean(robot_, x);
  }
  return st;
}

}  // namespace ekfslam

#include "fd.hpp"
#include "suites.hpp"

#include "ekfslam/dataset.hpp"
#include "ekfslam/filter.hpp"
#include "ekfslam/landmarks.hpp"
#include "ekfslam/motion.hpp"
#include "ekfslam/observation.hpp"

#include <algorithm>
#include <limits>

namespace ekfslam::testkit {

double JacobianReport::max_error() const {
  double m = 0;
  for (const auto& [name, e] : worst) m = std::max(m, e);
  return m;
}

int JacobianReport::min_cases() const {
  int m = std::numeric_limits<int>::max();
  for (const auto& [name, n] : cases) m = std::min(m, n);
  return cases.empty() ? 0 : m;
}

namespace {

Quaternion qv(const Eigen::VectorXd& v) { return Quaternion::from_vector(v.head<4>()); }

// A random robot vector of the given layout with a unit quaternion.
Eigen::VectorXd random_robot(Sampler& s, int size) {
  Eigen::VectorXd x = s.vector(size, 2.0);
  x.segment<4>(kQuatOffset) = s.quaternion().to_vector();
  return x;
}

}  // namespace

JacobianReport jacobian_suite(int cases, std::uint64_t seed) {
  Sampler s(seed);
  JacobianReport rep;
  auto record = [&](const std::string& name, const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
    const double e = relative_error(analytic, numeric);
    rep.worst[name] = std::max(rep.worst[name], std::isfinite(e) ? e : std::numeric_limits<double>::infinity());
    ++rep.cases[name];
  };

  ExperimentConfig cfg;
  const PinholeIntrinsics k = intrinsics_from(cfg);
  const Frame extrinsic = camera_extrinsic(cfg);

  for (int c = 0; c < cases; ++c) {
    const Quaternion q = s.quaternion();
    const Vec3 v = s.vec3(2.0);
    const Vec3 t = s.vec3(3.0);

    // geometry
    record("rotate_jac_q", rotate_jac_q(q, v),
           numeric_jacobian([&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return qv(x).rotation_matrix() * v; },
                            q.to_vector()));
    record("rotate_inverse_jac_q", rotate_inverse_jac_q(q, v),
           numeric_jacobian(
               [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return qv(x).rotation_matrix().transpose() * v; },
               q.to_vector()));
    const Quaternion b = s.quaternion();
    record("quat_left_matrix", quat_left_matrix(q),
           numeric_jacobian(
               [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return quat_product(q, qv(x)).to_vector(); },
               b.to_vector()));
    record("quat_right_matrix", quat_right_matrix(b),
           numeric_jacobian(
               [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return quat_product(qv(x), b).to_vector(); },
               q.to_vector()));
    const Vec3 theta = s.vec3(1.0).normalized() * (c % 4 == 0 ? s.uniform(1e-4, 1e-2) : s.uniform(0.01, 3.0));
    record("rotation_vector_jac", rotation_vector_jac(theta),
           numeric_jacobian(
               [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
                 return quat_from_rotation_vector(x.head<3>()).to_vector();
               },
               theta));
    const Frame fr{t, q};
    const ToLocalJacobians tl = to_local_jacobians(fr, v);
    record("to_local/t", tl.wrt_t,
           numeric_jacobian([&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return Frame{x, q}.to_local(v); }, t));
    record("to_local/q", tl.wrt_q,
           numeric_jacobian([&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return Frame{t, qv(x)}.to_local(v); },
                            q.to_vector()));
    record("to_local/p", tl.wrt_p,
           numeric_jacobian([&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return fr.to_local(x); }, v));
    const double z = s.uniform(0.5, 5.0);
    const Vec3 pc(s.uniform(-z, z) * 0.6, s.uniform(-z, z) * 0.45, z);
    record("pinhole_project", pinhole_project(k, pc).jacobian,
           numeric_jacobian([&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return pinhole_project(k, x).pixel; },
                            pc));
    const Vec2 px(s.uniform(5, k.width - 5), s.uniform(5, k.height - 5));
    record("pinhole_backproject", pinhole_backproject_jac(k, px),
           numeric_jacobian([&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return pinhole_backproject(k, x); },
                            px));

    // motion
    {
      const Eigen::VectorXd x = random_robot(s, CVState::kSize);
      const double dt = s.uniform(0.005, 0.05);
      const CvPrediction p = cv_predict(CVState::from_vector(x), dt);
      record("cv_predict/F", p.f,
             numeric_jacobian(
                 [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
                   return cv_predict(CVState::from_vector(y), dt).state.to_vector();
                 },
                 x));
      record("cv_predict/G", p.g,
             numeric_jacobian(
                 [&](const Eigen::VectorXd& n) -> Eigen::VectorXd {
                   CVState st = cv_predict(CVState::from_vector(x), dt).state;
                   st.v += n.head<3>();
                   st.w += n.tail<3>();
                   return st.to_vector();
                 },
                 Eigen::VectorXd::Zero(6)));
    }
    {
      const Eigen::VectorXd x = random_robot(s, InertialState::kSize);
      ImuSample u;
      u.dt = s.uniform(0.002, 0.02);
      u.acc = s.vec3(15.0);
      u.gyro = s.vec3(5.0);
      const ImuPrediction p = imu_predict(InertialState::from_vector(x), u);
      record("imu_predict/F", p.f,
             numeric_jacobian(
                 [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
                   return imu_predict(InertialState::from_vector(y), u).state.to_vector();
                 },
                 x));
      record("imu_predict/G", p.g,
             numeric_jacobian(
                 [&](const Eigen::VectorXd& n) -> Eigen::VectorXd {
                   ImuSample un = u;
                   un.gyro += n.segment<3>(3) / u.dt;
                   InertialState st = imu_predict(InertialState::from_vector(x), un).state;
                   st.v += n.head<3>();
                   st.acc_bias += n.segment<3>(6);
                   st.gyro_bias += n.segment<3>(9);
                   return st.to_vector();
                 },
                 Eigen::VectorXd::Zero(12)));
    }

    // landmarks
    {
      const Frame cam{t, q};
      const double rho = s.uniform(0.1, 2.0);
      const AhpInitResult init = ahp_init(cam, k, px, rho, 0.5, 1.0);
      auto mean_of = [&](const Frame& f, const Vec2& p, double r) -> Eigen::VectorXd {
        return ahp_init(f, k, p, r, 0.5, 1.0).mean.to_vector();
      };
      record("ahp_init/cam_t", init.jac_cam_t,
             numeric_jacobian([&](const Eigen::VectorXd& x) { return mean_of(Frame{x, q}, px, rho); }, t));
      record("ahp_init/cam_q", init.jac_cam_q,
             numeric_jacobian([&](const Eigen::VectorXd& x) { return mean_of(Frame{t, qv(x)}, px, rho); },
                              q.to_vector()));
      record("ahp_init/pixel", init.jac_pixel,
             numeric_jacobian([&](const Eigen::VectorXd& x) { return mean_of(cam, x, rho); }, px));
      record("ahp_init/rho", init.jac_rho,
             numeric_jacobian([&](const Eigen::VectorXd& x) { return mean_of(cam, px, x(0)); },
                              Eigen::VectorXd::Constant(1, rho)));

      AhpLandmark l{s.vec3(3.0), s.vec3(1.0) * s.uniform(0.5, 2.0), s.uniform(0.1, 2.0)};
      if (l.direction.norm() < 0.1) l.direction = Vec3::UnitX();
      record("euclideanize", euclideanize_jac(l),
             numeric_jacobian(
                 [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return euclideanize(AhpLandmark::from_vector(x)); },
                 l.to_vector()));

      for (LandmarkType type : {LandmarkType::Ahp, LandmarkType::Euclidean}) {
        const std::string tag = type == LandmarkType::Ahp ? "ahp" : "euclidean";
        const Eigen::VectorXd lv = type == LandmarkType::Ahp ? l.to_vector() : Eigen::VectorXd(s.vec3(4.0));
        const CameraPoint cp = landmark_in_camera(type, lv, cam);
        auto h_of = [&](const Eigen::VectorXd& params, const Frame& f) -> Eigen::VectorXd {
          return landmark_in_camera(type, params, f).h;
        };
        record("landmark_in_camera/" + tag + "/t", cp.wrt_t,
               numeric_jacobian([&](const Eigen::VectorXd& x) { return h_of(lv, Frame{x, q}); }, t));
        record("landmark_in_camera/" + tag + "/q", cp.wrt_q,
               numeric_jacobian([&](const Eigen::VectorXd& x) { return h_of(lv, Frame{t, qv(x)}); }, q.to_vector()));
        record("landmark_in_camera/" + tag + "/landmark", cp.wrt_landmark,
               numeric_jacobian([&](const Eigen::VectorXd& x) { return h_of(x, cam); }, lv));
      }
    }

    // observation, for both robot layouts and both landmark types
    for (int size : {CVState::kSize, InertialState::kSize}) {
      const Eigen::VectorXd robot = random_robot(s, size);
      const Frame body{robot.segment<3>(kPosOffset), qv(robot.segment<4>(kQuatOffset))};
      const Frame cam = body.compose(extrinsic);
      const double depth = s.uniform(0.8, 5.0);
      const Vec3 point = cam.to_global(Vec3(s.uniform(-0.5, 0.5) * depth, s.uniform(-0.4, 0.4) * depth, depth));
      const Vec3 anchor = point + s.vec3(1.5);
      const Vec3 dir = (point - anchor) * s.uniform(0.3, 3.0);
      const AhpLandmark ahp{anchor, dir, 1.0 / (point - anchor).norm()};
      for (LandmarkType type : {LandmarkType::Ahp, LandmarkType::Euclidean}) {
        const std::string tag = std::string(size == CVState::kSize ? "cv" : "imu") + "/" +
                                (type == LandmarkType::Ahp ? "ahp" : "euclidean");
        const Eigen::VectorXd lv = type == LandmarkType::Ahp ? ahp.to_vector() : Eigen::VectorXd(point);
        const ObservationModel m = evaluate_observation(robot, type, lv, extrinsic, k);
        record("observation/" + tag + "/robot", m.h_robot,
               numeric_jacobian(
                   [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
                     return evaluate_observation(x, type, lv, extrinsic, k).pixel;
                   },
                   robot));
        record("observation/" + tag + "/landmark", m.h_landmark,
               numeric_jacobian(
                   [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
                     return evaluate_observation(robot, type, x, extrinsic, k).pixel;
                   },
                   lv));
      }

      const MotionMode mode = size == CVState::kSize ? MotionMode::ConstantVelocity : MotionMode::Inertial;
      const ContinuousNoiseSpec noise = mode == MotionMode::Inertial ? ContinuousNoiseSpec::inertial(1, 1, 1, 1)
                                                                     : ContinuousNoiseSpec::constant_velocity(1, 1);
      SlamFilter f(size + 4, mode, noise);
      f.add_sensor({k, extrinsic, 1.0});
      const Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(size, size);
      f.init_robot(robot, cov);
      const Eigen::MatrixXd analytic = f.camera_jacobian(0);
      record(std::string("camera_jacobian/") + (size == CVState::kSize ? "cv" : "imu"), analytic,
             numeric_jacobian(
                 [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
                   f.init_robot(x, cov);
                   const Frame c = f.camera_frame(0);
                   Eigen::VectorXd out(7);
                   out << c.t, c.q.to_vector();
                   return out;
                 },
                 robot));
    }
  }
  return rep;
}

}  // namespace ekfslam::testkit

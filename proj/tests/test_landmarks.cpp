#include "fd.hpp"
#include "suites.hpp"

#include "ekfslam/landmarks.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace ekfslam;
using testkit::numeric_jacobian;
using testkit::Sampler;

namespace {

// Kolmogorov distance between the exact law of the distance 1/rho,
// rho ~ N(rho, s^2), and its first-order Gaussian N(1/rho, s^2/rho^4),
// evaluated on a dense grid of distances.
double linearization_ks(double rho, double sigma) {
  auto phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  const double mu = 1.0 / rho, sd = sigma / (rho * rho);
  const double negative = phi(-rho / sigma);
  double ks = 0;
  for (int i = 1; i <= 200000; ++i) {
    const double d = mu + sd * (-10.0 + 20.0 * i / 200000.0);
    if (d <= 0) continue;
    const double exact = negative + (1.0 - phi((1.0 / d - rho) / sigma));
    ks = std::max(ks, std::abs(exact - phi((d - mu) / sd)));
  }
  return ks;
}

}  // namespace

TEST(AhpInit, CentreExample) {
  const PinholeIntrinsics k;
  const AhpInitResult r = ahp_init(Frame{}, k, Vec2(k.u0, k.v0), 0.5, 0.25, 1.0);
  EXPECT_LT(r.mean.anchor.norm(), 1e-15);
  EXPECT_LT((r.mean.direction - Vec3(0, 0, 1)).norm(), 1e-15);
  EXPECT_DOUBLE_EQ(r.mean.inverse_distance, 0.5);
  EXPECT_THROW(ahp_init(Frame{}, k, Vec2(k.u0, k.v0), 0.0, 0.25, 1.0), std::invalid_argument);
}

TEST(AhpInit, PointLiesOnBackprojectedRay) {
  Sampler s(41);
  const PinholeIntrinsics k;
  for (int i = 0; i < 100; ++i) {
    const Frame cam{s.vec3(3.0), s.quaternion()};
    const Vec2 px(s.uniform(0, 639), s.uniform(0, 479));
    const AhpInitResult r = ahp_init(cam, k, px, s.uniform(0.1, 2), 0.3, 1.0);
    const Vec3 p = euclideanize(r.mean);
    const Projection back = pinhole_project(k, cam.to_local(p));
    ASSERT_TRUE(back.in_front);
    EXPECT_LT((back.pixel - px).norm(), 1e-9);
  }
}

TEST(AhpInit, CovarianceMatchesFiniteDifferencePropagation) {
  Sampler s(42);
  const PinholeIntrinsics k;
  for (int i = 0; i < 20; ++i) {
    const Frame cam{s.vec3(3.0), s.quaternion()};
    const Vec2 px(s.uniform(10, 630), s.uniform(10, 470));
    const double rho = s.uniform(0.2, 1.5), srho = 0.3, spx = 0.7;
    const Eigen::MatrixXd pose_a = s.spd(7, 1e-4, 1e-2);
    const Mat7 pose_cov = pose_a;
    const AhpInitResult r = ahp_init(cam, k, px, rho, srho, spx, pose_cov);
    // Mean as a function of (t, q, pixel, rho).
    Eigen::VectorXd z(13);
    z << cam.t, cam.q.to_vector(), px, Eigen::Vector2d(rho, 0);
    const Eigen::MatrixXd j = numeric_jacobian(
        [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
          return ahp_init(Frame{v.head<3>(), Quaternion::from_vector(v.segment<4>(3))}, k, v.segment<2>(7), v(9), srho,
                          spx)
              .mean.to_vector();
        },
        z);
    Eigen::MatrixXd input = Eigen::MatrixXd::Zero(13, 13);
    input.topLeftCorner(7, 7) = pose_cov;
    input.block<2, 2>(7, 7) = spx * spx * Eigen::Matrix2d::Identity();
    input(9, 9) = srho * srho;
    const Eigen::MatrixXd expected = j * input * j.transpose();
    EXPECT_LT((r.covariance - expected).norm() / expected.norm(), 1e-6);
  }
}

TEST(Euclideanize, Examples) {
  EXPECT_TRUE(euclideanize({Vec3::Zero(), Vec3(0, 0, 1), 0.5}).isApprox(Vec3(0, 0, 2)));
  EXPECT_NEAR((euclideanize({Vec3(1, 1, 1), Vec3(0, 3, 0), 10.0}) - Vec3(1, 1, 1)).norm(), 0.1, 1e-15);
  EXPECT_THROW(euclideanize({Vec3::Zero(), Vec3(0, 0, 1), 0.0}), PointAtInfinityError);
}

TEST(Linearity, Examples) {
  const AhpLandmark l{Vec3::Zero(), Vec3(0, 0, 1), 1.0};
  EXPECT_EQ(linearity_index(l, 0.0, Vec3(0, 0, -1)), 0.0);
  EXPECT_NEAR(linearity_index(l, 0.01, Vec3(0, 0, -1)), 0.04, 1e-15);
  EXPECT_NEAR(linearity_index(l, 0.5, Vec3(0, 0, -1)), 2.0, 1e-15);
  // Perpendicular viewing ray: depth uncertainty does not show.
  EXPECT_NEAR(linearity_index(l, 0.5, Vec3(5, 0, 1)), 0.0, 1e-15);
  EXPECT_TRUE(std::isinf(linearity_index({Vec3::Zero(), Vec3(0, 0, 1), 0.0}, 0.1, Vec3::Zero())));
}

TEST(Linearity, ThresholdSeparatesGaussianFromNonGaussianDepths) {
  const double accepted = linearization_ks(1.0, 0.01);  // L = 0.04
  const double rejected = linearization_ks(1.0, 0.5);   // L = 2
  const double border = linearization_ks(1.0, 0.025);   // L = 0.1
  EXPECT_LT(accepted, 0.02);
  EXPECT_GT(rejected, 0.1);
  EXPECT_LT(accepted, border);
  EXPECT_LT(border, rejected);
}

TEST(Reparametrize, SavesFourScalarsAndKeepsProjection) {
  Sampler s(46);
  const PinholeIntrinsics k;
  StochasticMap map(40);
  const BlockHandle robot = map.allocate_block(BlockRole::Robot, 7);
  map.initialize_block(robot, Eigen::VectorXd::Zero(7), {}, s.spd(7, 1e-4, 1e-3));
  const Frame cam{Vec3::Zero(), Quaternion::identity()};
  const AhpInitResult init = ahp_init(cam, k, Vec2(300, 200), 0.4, 0.004, 0.5);
  const BlockHandle a = map.allocate_block(BlockRole::Landmark, 7);
  const std::vector<LinearSource> src{{robot, s.matrix(7, 7, 1e-2)}};
  map.initialize_block(a, init.mean.to_vector(), src, init.covariance);

  const Frame later{Vec3(0.3, -0.1, 0.2), quat_from_euler(0.02, -0.05, 0.1)};
  const Vec2 before = pinhole_project(k, landmark_in_camera(LandmarkType::Ahp, map.mean(a), later).h).pixel;
  const int free0 = map.free_capacity();

  // Dense oracle of the converted covariance.
  const std::vector<int> all = map.active_indices();
  const std::vector<int> ia = map.block_indices(a), ir = map.block_indices(robot);
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(10, 14);
  t.topLeftCorner(7, 7).setIdentity();
  t.bottomRightCorner(3, 7) = euclideanize_jac(AhpLandmark::from_vector(map.mean(a)));
  std::vector<int> order = ir;
  order.insert(order.end(), ia.begin(), ia.end());
  const Eigen::MatrixXd expected = t * map.covariance_matrix()(order, order) * t.transpose();

  const BlockHandle e = reparametrize(map, a);
  EXPECT_EQ(map.free_capacity(), free0 + 4);
  EXPECT_FALSE(map.is_allocated(a));
  const Vec2 after = pinhole_project(k, landmark_in_camera(LandmarkType::Euclidean, map.mean(e), later).h).pixel;
  EXPECT_LT((after - before).norm(), 1e-6);

  std::vector<BlockHandle> hs{robot, e};
  const std::vector<int> idx = map.indices(hs);
  EXPECT_LT((map.covariance_matrix()(idx, idx) - expected).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Jacobians, LandmarksMatchFiniteDifferences) {
  const auto rep = testkit::jacobian_suite(100, 47);
  int checked = 0;
  for (const auto& [name, err] : rep.worst)
    if (name.rfind("ahp_init", 0) == 0 || name == "euclideanize" || name.rfind("landmark_in_camera", 0) == 0) {
      EXPECT_LT(err, 1e-4) << name;
      EXPECT_GE(rep.cases.at(name), 100);
      ++checked;
    }
  EXPECT_EQ(checked, 11);
}

#include "ekfslam/filter.hpp"
#include "ekfslam/map_manager.hpp"

#include <gtest/gtest.h>

#include <cstring>

using namespace ekfslam;

namespace {

SlamFilter make(int capacity) {
  SlamFilter f(capacity, MotionMode::ConstantVelocity, ContinuousNoiseSpec::constant_velocity(4.0, 4.0));
  f.init_robot(Eigen::VectorXd::Unit(CVState::kSize, kQuatOffset), 1e-10 * Eigen::MatrixXd::Identity(13, 13));
  f.add_sensor({PinholeIntrinsics{}, Frame{}, 0.5});
  return f;
}

int add(SlamFilter& f, const Vec2& px, double rho, double sigma_rho, long frame = 0) {
  return f.add_ahp_landmark(0, px, rho, sigma_rho, {}, -1, frame);
}

bool bit_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST(GrantSlot, EmptyFullAndBoundary) {
  const MapManager mm({});
  SlamFilter exact = make(13 + 7);
  EXPECT_TRUE(mm.grant_slot(exact, 7));
  add(exact, Vec2(320, 240), 0.5, 0.1);
  EXPECT_FALSE(mm.grant_slot(exact, 7));
  EXPECT_FALSE(mm.grant_slot(exact, 1));

  SlamFilter short_by_one = make(13 + 6);
  EXPECT_FALSE(mm.grant_slot(short_by_one, 7));
  EXPECT_TRUE(mm.grant_slot(short_by_one, 6));

  LandmarkQualityPolicy p;
  p.max_landmarks = 2;
  const MapManager capped(p);
  SlamFilter f = make(200);
  add(f, Vec2(100, 100), 0.5, 0.1);
  EXPECT_TRUE(capped.grant_slot(f, 7));
  add(f, Vec2(200, 100), 0.5, 0.1);
  EXPECT_FALSE(capped.grant_slot(f, 7));
}

TEST(Maintain, ConsecutiveFailuresRemove) {
  SlamFilter f = make(200);
  const int keep = add(f, Vec2(100, 100), 0.5, 0.1);
  const int drop = add(f, Vec2(200, 100), 0.5, 0.1);
  f.landmark(keep).observations[0].counters.consecutive_failures = 4;
  f.landmark(drop).observations[0].counters.consecutive_failures = 5;
  MapManager mm({});
  const MaintenanceReport r = mm.maintain(f, 1);
  ASSERT_EQ(r.removed.size(), 1u);
  EXPECT_EQ(r.removed[0], drop);
  EXPECT_EQ(f.landmarks().count(drop), 0u);
  EXPECT_EQ(f.landmarks().count(keep), 1u);
}

TEST(Maintain, MatchRatioAfterGracePeriod) {
  SlamFilter f = make(200);
  const int id = add(f, Vec2(100, 100), 0.5, 0.1);
  ObsCounters& c = f.landmark(id).observations[0].counters;
  c.searched = 10;
  c.matched = 4;
  MapManager mm({});
  EXPECT_TRUE(mm.maintain(f, 9).removed.empty());
  EXPECT_EQ(mm.maintain(f, 10).removed, std::vector<int>{id});
}

TEST(Maintain, VisualOdometryForgetsUnseenLandmarks) {
  SlamFilter f = make(200);
  const int id = add(f, Vec2(100, 100), 0.5, 0.1);
  LandmarkQualityPolicy p;
  p.kind = MapPolicy::VisualOdometry;
  f.landmark(id).observations[0].status = ObsStatus::NotVisible;
  EXPECT_EQ(MapManager(p).maintain(f, 1).removed, std::vector<int>{id});
}

TEST(Maintain, ConvertsOnlyLinearEnoughLandmarks) {
  SlamFilter f = make(200);
  // Seen from the anchor, the viewing ray is the anchor ray: L = 4 sigma / rho.
  const int linear = add(f, Vec2(320, 240), 1.0, 0.01);    // L = 0.04
  const int nonlinear = add(f, Vec2(300, 200), 1.0, 0.05);  // L = 0.2
  const int young = add(f, Vec2(340, 260), 1.0, 0.01);     // too few corrections
  EXPECT_NEAR(MapManager::landmark_linearity(f, f.landmark(linear)), 0.04, 1e-9);
  EXPECT_NEAR(MapManager::landmark_linearity(f, f.landmark(nonlinear)), 0.2, 1e-9);
  for (int id : {linear, nonlinear}) f.landmark(id).observations[0].counters.corrected = 3;
  f.landmark(young).observations[0].counters.corrected = 2;

  MapManager mm({});
  const int before = f.map().free_capacity();
  const MaintenanceReport r = mm.maintain(f, 1);
  EXPECT_EQ(r.converted, std::vector<int>{linear});
  EXPECT_EQ(f.landmark(linear).type, LandmarkType::Euclidean);
  EXPECT_EQ(f.map().slot(f.landmark(linear).block).length, 3);
  EXPECT_EQ(f.map().free_capacity(), before + 4);
  EXPECT_EQ(f.landmark(nonlinear).type, LandmarkType::Ahp);
  EXPECT_EQ(f.landmark(young).type, LandmarkType::Ahp);

  LandmarkQualityPolicy off;
  off.reparametrize = false;
  f.landmark(young).observations[0].counters.corrected = 3;
  EXPECT_TRUE(MapManager(off).maintain(f, 2).converted.empty());
}

TEST(Maintain, HealthyLandmarkBlockUntouched) {
  SlamFilter f = make(200);
  const int healthy = add(f, Vec2(100, 120), 0.7, 0.2);
  const int drop = add(f, Vec2(200, 100), 0.5, 0.1);
  const int convert = add(f, Vec2(320, 240), 1.0, 0.01);
  f.landmark(drop).observations[0].counters.consecutive_failures = 9;
  f.landmark(convert).observations[0].counters.corrected = 5;
  const BlockHandle h = f.landmark(healthy).block;
  const Eigen::VectorXd mean = f.map().mean(h);
  const Eigen::MatrixXd cov = f.map().covariance(h);
  const Eigen::MatrixXd cross = f.map().covariance(h, f.robot());

  MapManager mm({});
  const MaintenanceReport r = mm.maintain(f, 1);
  EXPECT_EQ(r.removed, std::vector<int>{drop});
  EXPECT_EQ(r.converted, std::vector<int>{convert});
  EXPECT_TRUE(bit_equal(f.map().mean(h), mean));
  EXPECT_TRUE(bit_equal(f.map().covariance(h), cov));
  EXPECT_TRUE(bit_equal(f.map().covariance(h, f.robot()), cross));
}

TEST(Policy, Validation) {
  LandmarkQualityPolicy p;
  EXPECT_NO_THROW(p.validate());
  p.min_match_ratio = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.max_consecutive_failures = 0;
  EXPECT_THROW(MapManager{p}, std::invalid_argument);
}

#include "fd.hpp"
#include "suites.hpp"

#include "ekfslam/geometry.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace ekfslam;
using testkit::Sampler;

namespace {

// Rotation matrix from axis-angle via Rodrigues, independent of the quaternion code.
Mat3 rodrigues(const Vec3& axis, double angle) {
  const Vec3 u = axis.normalized();
  Mat3 k;
  k << 0, -u.z(), u.y(), u.z(), 0, -u.x(), -u.y(), u.x(), 0;
  return Mat3::Identity() + std::sin(angle) * k + (1 - std::cos(angle)) * k * k;
}

}  // namespace

TEST(Quaternion, NormalizeAndNormPreservation) {
  Sampler s(1);
  for (int i = 0; i < 200; ++i) {
    const Quaternion q = Quaternion::from_vector(s.vector(4, 5.0)).normalized();
    EXPECT_NEAR(q.norm(), 1.0, 1e-9);
    const Vec3 v = s.vec3(10.0);
    EXPECT_NEAR(quat_rotate(q, v).norm(), v.norm(), 1e-9 * std::max(1.0, v.norm()));
  }
}

TEST(Quaternion, RotateExamples) {
  EXPECT_TRUE(quat_rotate(Quaternion::identity(), Vec3(1, 2, 3)).isApprox(Vec3(1, 2, 3), 1e-15));
  const Quaternion qz = quat_from_axis_angle(Vec3::UnitZ(), std::numbers::pi / 2);
  EXPECT_LT((quat_rotate(qz, Vec3::UnitX()) - Vec3::UnitY()).norm(), 1e-12);
}

TEST(Quaternion, RotateMatchesRodrigues) {
  Sampler s(2);
  for (int i = 0; i < 100; ++i) {
    const Vec3 axis = s.vec3();
    const double angle = s.uniform(-3, 3);
    const Vec3 v = s.vec3(3.0);
    const Vec3 expected = rodrigues(axis, angle) * v;
    EXPECT_LT((quat_rotate(quat_from_axis_angle(axis, angle), v) - expected).norm(), 1e-12);
  }
}

TEST(Quaternion, ComposeExamples) {
  Sampler s(3);
  const Quaternion b = s.quaternion();
  const Quaternion ab = quat_compose(Quaternion::identity(), b);
  EXPECT_TRUE(ab.to_vector().isApprox(b.to_vector(), 1e-12));
  const Quaternion id = quat_compose(b.conjugate(), b);
  EXPECT_NEAR(std::abs(id.w), 1.0, 1e-12);
  EXPECT_LT(id.vec().norm(), 1e-12);
}

TEST(Quaternion, ComposeActsAsSuccessiveRotations) {
  Sampler s(4);
  const Quaternion a = s.quaternion(), b = s.quaternion();
  const Quaternion ab = quat_compose(a, b);
  for (int i = 0; i < 100; ++i) {
    const Vec3 v = s.vec3(5.0);
    EXPECT_LT((quat_rotate(ab, v) - quat_rotate(a, quat_rotate(b, v))).norm(), 1e-12);
  }
}

TEST(Quaternion, RotationVectorRoundTrip) {
  Sampler s(5);
  for (int i = 0; i < 100; ++i) {
    const Vec3 theta = s.vec3().normalized() * s.uniform(0, 3.1);
    EXPECT_LT((quat_to_rotation_vector(quat_from_rotation_vector(theta)) - theta).norm(), 1e-10);
  }
  EXPECT_LT(quat_to_rotation_vector(Quaternion::identity()).norm(), 1e-15);
}

TEST(Quaternion, EulerRoundTrip) {
  Sampler s(6);
  for (int i = 0; i < 100; ++i) {
    const Vec3 e(s.uniform(-3, 3), s.uniform(-1.5, 1.5), s.uniform(-3, 3));
    EXPECT_LT((quat_to_euler(quat_from_euler(e.x(), e.y(), e.z())) - e).norm(), 1e-9);
  }
}

TEST(FrameTransform, Examples) {
  Sampler s(7);
  const Vec3 p = s.vec3(3.0);
  EXPECT_TRUE(frame_transform(Frame{}, p, Direction::ToGlobal).isApprox(p));
  EXPECT_TRUE(frame_transform(Frame{}, p, Direction::ToLocal).isApprox(p));
  const Frame shift{Vec3(1, 0, 0), Quaternion::identity()};
  EXPECT_TRUE(frame_transform(shift, Vec3::Zero(), Direction::ToGlobal).isApprox(Vec3(1, 0, 0)));
  for (int i = 0; i < 100; ++i) {
    const Frame f{s.vec3(5.0), s.quaternion()};
    const Vec3 x = s.vec3(5.0);
    EXPECT_LT((f.to_local(f.to_global(x)) - x).norm(), 1e-9);
    const Frame id = f.compose(f.inverse());
    EXPECT_LT(id.t.norm(), 1e-9);
    EXPECT_LT(quat_to_rotation_vector(id.q).norm(), 1e-9);
  }
}

TEST(Pinhole, ProjectExamples) {
  const PinholeIntrinsics k;
  const Projection a = pinhole_project(k, Vec3(0, 0, 1));
  EXPECT_TRUE(a.in_front);
  EXPECT_DOUBLE_EQ(a.pixel.x(), 320.0);
  EXPECT_DOUBLE_EQ(a.pixel.y(), 240.0);
  const Projection b = pinhole_project(k, Vec3(0.1, 0, 1));
  EXPECT_DOUBLE_EQ(b.pixel.x(), 370.0);
  EXPECT_DOUBLE_EQ(b.pixel.y(), 240.0);
  const Projection c = pinhole_project(k, Vec3(0, 0, -1));
  EXPECT_FALSE(c.in_front);
  EXPECT_FALSE(std::isfinite(c.pixel.x()));
}

TEST(Pinhole, BackprojectExamples) {
  const PinholeIntrinsics k;
  EXPECT_TRUE(pinhole_backproject(k, Vec2(320, 240)).isApprox(Vec3(0, 0, 1)));
  EXPECT_LT((pinhole_backproject(k, Vec2(320 + 250, 240)) - Vec3(0.5, 0, 1) / std::sqrt(1.25)).norm(), 1e-12);
  EXPECT_THROW(pinhole_backproject(k, Vec2(-10, 5)), std::out_of_range);
  Sampler s(8);
  for (int i = 0; i < 100; ++i) {
    const Vec2 px(s.uniform(0, 639), s.uniform(0, 479));
    EXPECT_LT((pinhole_project(k, pinhole_backproject(k, px)).pixel - px).norm(), 1e-9);
  }
}

TEST(Pinhole, IntrinsicsValidation) {
  PinholeIntrinsics k;
  EXPECT_NO_THROW(k.validate());
  k.fu = 0;
  EXPECT_THROW(k.validate(), std::invalid_argument);
  k = {};
  k.u0 = 700;
  EXPECT_THROW(k.validate(), std::invalid_argument);
}

TEST(Jacobians, GeometryMatchesFiniteDifferences) {
  const auto rep = testkit::jacobian_suite(100, 11);
  int checked = 0;
  for (const char* prefix : {"rotate_", "quat_", "rotation_vector", "to_local/", "pinhole_"})
    for (const auto& [name, err] : rep.worst)
      if (name.rfind(prefix, 0) == 0) {
        EXPECT_LT(err, 1e-4) << name;
        EXPECT_GE(rep.cases.at(name), 100) << name;
        ++checked;
      }
  EXPECT_EQ(checked, 10);
}

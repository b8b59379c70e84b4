#pragma once

#include <Eigen/Dense>

namespace ekfslam {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using Mat43 = Eigen::Matrix<double, 4, 3>;

/// Hamilton quaternion stored as (w, x, y, z).
///
/// The rotation helpers below use the polynomial form of R(q), which is
/// a proper rotation only for unit quaternions. Filter states hold
/// quaternions that drift slightly off the unit sphere between
/// renormalizations, and the Jacobians are exact for the polynomial form.
struct Quaternion {
  double w{1.0};
  double x{0.0};
  double y{0.0};
  double z{0.0};

  static Quaternion identity() { return {}; }
  static Quaternion from_vector(const Vec4& v) { return {v(0), v(1), v(2), v(3)}; }
  Vec4 to_vector() const { return {w, x, y, z}; }
  Vec3 vec() const { return {x, y, z}; }

  double norm() const;
  Quaternion normalized() const;
  Quaternion conjugate() const { return {w, -x, -y, -z}; }
  Mat3 rotation_matrix() const;
};

/// Raw Hamilton product a*b (no normalization).
Quaternion quat_product(const Quaternion& a, const Quaternion& b);

/// Composite rotation a*b, normalized.
Quaternion quat_compose(const Quaternion& a, const Quaternion& b);

Vec3 quat_rotate(const Quaternion& q, const Vec3& v);
Vec3 quat_rotate_inverse(const Quaternion& q, const Vec3& v);

Quaternion quat_from_rotation_vector(const Vec3& theta);
Vec3 quat_to_rotation_vector(const Quaternion& q);
Quaternion quat_from_axis_angle(const Vec3& axis, double angle);

/// ZYX convention: q = yaw(z) * pitch(y) * roll(x). Radians.
Quaternion quat_from_euler(double roll, double pitch, double yaw);
Vec3 quat_to_euler(const Quaternion& q);

// Jacobians.

/// d(R(q) v)/dq.
Mat34 rotate_jac_q(const Quaternion& q, const Vec3& v);
/// d(R(q)^T v)/dq.
Mat34 rotate_inverse_jac_q(const Quaternion& q, const Vec3& v);
/// Left multiplication matrix: a*b = L(a) b, hence d(a*b)/db.
Mat4 quat_left_matrix(const Quaternion& a);
/// Right multiplication matrix: a*b = R(b) a, hence d(a*b)/da.
Mat4 quat_right_matrix(const Quaternion& b);
/// d exp(theta) / d theta.
Mat43 rotation_vector_jac(const Vec3& theta);

/// Rigid transform from a local frame to its parent (world) frame.
struct Frame {
  Vec3 t{Vec3::Zero()};
  Quaternion q{};

  Vec3 to_global(const Vec3& p) const { return quat_rotate(q, p) + t; }
  Vec3 to_local(const Vec3& p) const { return quat_rotate_inverse(q, p - t); }
  Frame compose(const Frame& child) const;
  Frame inverse() const;
};

enum class Direction { ToGlobal, ToLocal };

Vec3 frame_transform(const Frame& f, const Vec3& p, Direction dir);

/// Jacobians of Frame::to_local wrt the frame translation, rotation and the point.
struct ToLocalJacobians {
  Mat3 wrt_t;
  Mat34 wrt_q;
  Mat3 wrt_p;
};
ToLocalJacobians to_local_jacobians(const Frame& f, const Vec3& p);

struct PinholeIntrinsics {
  double fu{500.0};
  double fv{500.0};
  double u0{320.0};
  double v0{240.0};
  int width{640};
  int height{480};

  /// Throws std::invalid_argument when the invariants do not hold.
  void validate() const;
  bool contains(const Vec2& px, double margin = 0.0) const;
};

struct Projection {
  Vec2 pixel;
  double depth{0.0};
  Mat23 jacobian;  ///< d pixel / d p_cam
  bool in_front{false};
};

inline constexpr double kMinDepth = 1e-6;

/// Projects a point given in camera coordinates. The point may be scaled
/// homogeneously. Points at or behind the camera plane yield a non-finite
/// pixel and in_front == false.
Projection pinhole_project(const PinholeIntrinsics& k, const Vec3& p_cam);

/// Unit ray through a pixel. Throws std::out_of_range outside the image.
Vec3 pinhole_backproject(const PinholeIntrinsics& k, const Vec2& px);
/// d backproject / d pixel.
Eigen::Matrix<double, 3, 2> pinhole_backproject_jac(const PinholeIntrinsics& k, const Vec2& px);

}  // namespace ekfslam

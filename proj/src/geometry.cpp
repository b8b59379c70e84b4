#include "ekfslam/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ekfslam {

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quaternion Quaternion::normalized() const {
  const double n = norm();
  return {w / n, x / n, y / n, z / n};
}

Mat3 Quaternion::rotation_matrix() const {
  Mat3 r;
  r << w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z;
  return r;
}

Quaternion quat_product(const Quaternion& a, const Quaternion& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Quaternion quat_compose(const Quaternion& a, const Quaternion& b) {
  return quat_product(a, b).normalized();
}

Vec3 quat_rotate(const Quaternion& q, const Vec3& v) { return q.rotation_matrix() * v; }

Vec3 quat_rotate_inverse(const Quaternion& q, const Vec3& v) {
  return q.rotation_matrix().transpose() * v;
}

Quaternion quat_from_rotation_vector(const Vec3& theta) {
  const double a = theta.norm();
  if (a < 1e-10) {
    const Vec3 h = 0.5 * theta;
    return Quaternion{1.0, h.x(), h.y(), h.z()}.normalized();
  }
  const double s = std::sin(0.5 * a) / a;
  return {std::cos(0.5 * a), s * theta.x(), s * theta.y(), s * theta.z()};
}

Vec3 quat_to_rotation_vector(const Quaternion& q_in) {
  Quaternion q = q_in.normalized();
  if (q.w < 0) q = {-q.w, -q.x, -q.y, -q.z};
  const Vec3 v = q.vec();
  const double s = v.norm();
  if (s < 1e-12) return 2.0 * v;
  const double angle = 2.0 * std::atan2(s, q.w);
  return v * (angle / s);
}

Quaternion quat_from_axis_angle(const Vec3& axis, double angle) {
  return quat_from_rotation_vector(axis.normalized() * angle);
}

Quaternion quat_from_euler(double roll, double pitch, double yaw) {
  const Quaternion qx{std::cos(roll / 2), std::sin(roll / 2), 0, 0};
  const Quaternion qy{std::cos(pitch / 2), 0, std::sin(pitch / 2), 0};
  const Quaternion qz{std::cos(yaw / 2), 0, 0, std::sin(yaw / 2)};
  return quat_product(qz, quat_product(qy, qx));
}

Vec3 quat_to_euler(const Quaternion& q_in) {
  const Mat3 r = q_in.normalized().rotation_matrix();
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return {roll, pitch, yaw};
}

namespace {

// Partial derivatives of the polynomial rotation matrix wrt w, x, y, z.
std::array<Mat3, 4> rotation_partials(const Quaternion& q) {
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  Mat3 dw, dx, dy, dz;
  dw << w, -z, y, z, w, -x, -y, x, w;
  dx << x, y, z, y, -x, -w, z, w, -x;
  dy << -y, x, w, x, y, z, -w, z, -y;
  dz << -z, -w, x, w, -z, y, x, y, z;
  return {2 * dw, 2 * dx, 2 * dy, 2 * dz};
}

}  // namespace

Mat34 rotate_jac_q(const Quaternion& q, const Vec3& v) {
  const auto d = rotation_partials(q);
  Mat34 j;
  for (int i = 0; i < 4; ++i) j.col(i) = d[i] * v;
  return j;
}

Mat34 rotate_inverse_jac_q(const Quaternion& q, const Vec3& v) {
  const auto d = rotation_partials(q);
  Mat34 j;
  for (int i = 0; i < 4; ++i) j.col(i) = d[i].transpose() * v;
  return j;
}

Mat4 quat_left_matrix(const Quaternion& a) {
  Mat4 m;
  m << a.w, -a.x, -a.y, -a.z,
       a.x, a.w, -a.z, a.y,
       a.y, a.z, a.w, -a.x,
       a.z, -a.y, a.x, a.w;
  return m;
}

Mat4 quat_right_matrix(const Quaternion& b) {
  Mat4 m;
  m << b.w, -b.x, -b.y, -b.z,
       b.x, b.w, b.z, -b.y,
       b.y, -b.z, b.w, b.x,
       b.z, b.y, -b.x, b.w;
  return m;
}

Mat43 rotation_vector_jac(const Vec3& theta) {
  Mat43 j;
  const double a = theta.norm();
  if (a < 1e-8) {
    j.row(0) = -0.25 * theta.transpose();
    j.bottomRows<3>() = 0.5 * Mat3::Identity();
    return j;
  }
  const Vec3 u = theta / a;
  const double s = std::sin(0.5 * a);
  const double c = std::cos(0.5 * a);
  j.row(0) = -0.5 * s * u.transpose();
  j.bottomRows<3>() = (s / a) * (Mat3::Identity() - u * u.transpose()) + 0.5 * c * u * u.transpose();
  return j;
}

Frame Frame::compose(const Frame& child) const {
  return {to_global(child.t), quat_product(q, child.q)};
}

Frame Frame::inverse() const {
  const Quaternion qi = q.conjugate();
  return {-quat_rotate(qi, t), qi};
}

Vec3 frame_transform(const Frame& f, const Vec3& p, Direction dir) {
  return dir == Direction::ToGlobal ? f.to_global(p) : f.to_local(p);
}

ToLocalJacobians to_local_jacobians(const Frame& f, const Vec3& p) {
  const Mat3 rt = f.q.rotation_matrix().transpose();
  return {-rt, rotate_inverse_jac_q(f.q, p - f.t), rt};
}

void PinholeIntrinsics::validate() const {
  if (!(fu > 0 && fv > 0)) throw std::invalid_argument("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw std::invalid_argument("image size must be positive");
  if (!(u0 > 0 && u0 < width && v0 > 0 && v0 < height))
    throw std::invalid_argument("principal point outside the image");
}

bool PinholeIntrinsics::contains(const Vec2& px, double margin) const {
  return px.x() >= margin && px.y() >= margin && px.x() <= width - 1 - margin &&
         px.y() <= height - 1 - margin;
}

Projection pinhole_project(const PinholeIntrinsics& k, const Vec3& p) {
  Projection out;
  out.depth = p.z();
  if (!(p.z() > kMinDepth)) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.pixel = {nan, nan};
    out.jacobian.setConstant(nan);
    out.in_front = false;
    return out;
  }
  const double iz = 1.0 / p.z();
  out.pixel = {k.u0 + k.fu * p.x() * iz, k.v0 + k.fv * p.y() * iz};
  out.jacobian << k.fu * iz, 0, -k.fu * p.x() * iz * iz, 0, k.fv * iz, -k.fv * p.y() * iz * iz;
  out.in_front = true;
  return out;
}

namespace {
void check_bounds(const PinholeIntrinsics& k, const Vec2& px) {
  if (!(px.x() >= -0.5 && px.y() >= -0.5 && px.x() <= k.width - 0.5 && px.y() <= k.height - 0.5))
    throw std::out_of_range("pixel outside the image");
}
}  // namespace

Vec3 pinhole_backproject(const PinholeIntrinsics& k, const Vec2& px) {
  check_bounds(k, px);
  return Vec3((px.x() - k.u0) / k.fu, (px.y() - k.v0) / k.fv, 1.0).normalized();
}

Eigen::Matrix<double, 3, 2> pinhole_backproject_jac(const PinholeIntrinsics& k, const Vec2& px) {
  check_bounds(k, px);
  const Vec3 n((px.x() - k.u0) / k.fu, (px.y() - k.v0) / k.fv, 1.0);
  const double len = n.norm();
  const Vec3 d = n / len;
  Eigen::Matrix<double, 3, 2> dn = Eigen::Matrix<double, 3, 2>::Zero();
  dn(0, 0) = 1.0 / k.fu;
  dn(1, 1) = 1.0 / k.fv;
  return (Mat3::Identity() - d * d.transpose()) / len * dn;
}

}  // namespace ekfslam

#pragma once

#include "ekfslam/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <random>

namespace ekfslam::testkit {

/// Central differences of f: R^n -> R^m at x.
template <class F>
Eigen::MatrixXd numeric_jacobian(F&& f, const Eigen::VectorXd& x, double step = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd j(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(x(i)));
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    j.col(i) = (f(xp) - f(xm)) / (2 * h);
  }
  return j;
}

/// ||a - b|| / ||b||, falling back to the absolute error when b is tiny.
inline double relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
  const double den = numeric.norm();
  const double err = (analytic - numeric).norm();
  return den > 1e-6 ? err / den : err;
}

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng_); }
  double normal() { return std::normal_distribution<double>()(rng_); }
  Vec3 vec3(double s = 1.0) { return {uniform(-s, s), uniform(-s, s), uniform(-s, s)}; }
  Eigen::VectorXd vector(int n, double s = 1.0) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = uniform(-s, s);
    return v;
  }
  Eigen::MatrixXd matrix(int r, int c, double s = 1.0) {
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = uniform(-s, s);
    return m;
  }
  Quaternion quaternion() {
    Eigen::Vector4d v;
    for (int i = 0; i < 4; ++i) v(i) = normal();
    v.normalize();
    return Quaternion::from_vector(v);
  }
  /// Random symmetric positive definite matrix with eigenvalues in [lo, hi].
  Eigen::MatrixXd spd(int n, double lo = 0.1, double hi = 2.0) {
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = normal();
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    const Eigen::MatrixXd q = qr.householderQ();
    Eigen::VectorXd d(n);
    for (int i = 0; i < n; ++i) d(i) = uniform(lo, hi);
    return q * d.asDiagonal() * q.transpose();
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace ekfslam::testkit

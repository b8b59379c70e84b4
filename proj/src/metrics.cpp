#include "ekfslam/metrics.hpp"

#include "ekfslam/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ekfslam {

std::optional<double> nees(const Eigen::VectorXd& e, const Eigen::MatrixXd& p) {
  if (p.rows() != e.size() || p.cols() != e.size()) throw std::invalid_argument("nees: dimension mismatch");
  if (!p.allFinite() || !e.allFinite()) return std::nullopt;
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (p + p.transpose()));
  if (llt.info() != Eigen::Success) return std::nullopt;
  return e.dot(llt.solve(e));
}

NeesSeries compute_nees(const std::vector<Eigen::VectorXd>& errors, const std::vector<Eigen::MatrixXd>& covariances) {
  if (errors.size() != covariances.size()) throw std::invalid_argument("compute_nees: streams not aligned");
  NeesSeries s;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const auto v = nees(errors[i], covariances[i]);
    if (!v) {
      ++s.skipped;
      continue;
    }
    s.values.push_back(*v);
    s.steps.push_back(static_cast<int>(i));
  }
  return s;
}

MonteCarloNees average_nees(const std::vector<std::vector<double>>& runs, double dof, double confidence) {
  if (runs.empty()) throw std::invalid_argument("average_nees: no runs");
  MonteCarloNees m;
  m.runs = static_cast<int>(runs.size());
  m.dof = dof;
  std::size_t len = runs.front().size();
  for (const auto& r : runs) len = std::min(len, r.size());
  m.average.assign(len, 0.0);
  for (const auto& r : runs)
    for (std::size_t i = 0; i < len; ++i) m.average[i] += r[i] / m.runs;
  const auto [lo, hi] = chi2_interval(confidence, dof * m.runs);
  m.n_run_bounds = {lo / m.runs, hi / m.runs};
  m.single_run_bounds = chi2_interval(confidence, dof);
  std::size_t in_n = 0, in_1 = 0;
  for (double v : m.average) {
    in_n += v >= m.n_run_bounds.first && v <= m.n_run_bounds.second;
    in_1 += v >= m.single_run_bounds.first && v <= m.single_run_bounds.second;
  }
  if (len > 0) {
    m.fraction_in_n_run = static_cast<double>(in_n) / len;
    m.fraction_in_single_run = static_cast<double>(in_1) / len;
  }
  return m;
}

Vec6 PoseError::vector() const {
  Vec6 v;
  v << position, rotation;
  return v;
}

PoseError pose_error(const Frame& estimate, const Eigen::Matrix<double, 7, 7>& cov, const Frame& truth) {
  PoseError e;
  e.position = estimate.t - truth.t;
  const Quaternion qe = estimate.q.normalized();
  e.rotation = quat_to_rotation_vector(quat_product(qe, truth.q.conjugate()));
  // theta ~ 2 vec(dq * q_true^-1) to first order.
  const Eigen::Matrix<double, 3, 4> jq = 2.0 * quat_right_matrix(truth.q.conjugate()).bottomRows<3>();
  Eigen::Matrix<double, 6, 7> j = Eigen::Matrix<double, 6, 7>::Zero();
  j.topLeftCorner<3, 3>().setIdentity();
  j.bottomRightCorner<3, 4>() = jq;
  e.covariance = j * cov * j.transpose();
  e.covariance = 0.5 * (e.covariance + e.covariance.transpose()).eval();
  return e;
}

void add_truth_uncertainty(PoseError& e, double sigma_pos, double sigma_ang) {
  e.covariance.diagonal().head<3>().array() += sigma_pos * sigma_pos;
  e.covariance.diagonal().tail<3>().array() += sigma_ang * sigma_ang;
}

Similarity umeyama(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  if (src.size() != dst.size() || src.size() < 3) throw std::invalid_argument("umeyama: need >= 3 matched points");
  Eigen::Matrix3Xd a(3, src.size()), b(3, dst.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    a.col(static_cast<Eigen::Index>(i)) = src[i];
    b.col(static_cast<Eigen::Index>(i)) = dst[i];
  }
  const Eigen::Matrix4d t = Eigen::umeyama(a, b, true);
  Similarity s;
  s.scale = t.topLeftCorner<3, 3>().col(0).norm();
  s.rotation = t.topLeftCorner<3, 3>() / s.scale;
  s.translation = t.topRightCorner<3, 1>();
  return s;
}

double rmse(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("rmse: streams not aligned");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]).squaredNorm();
  return std::sqrt(acc / a.size());
}

ScaleShape scale_and_shape(const std::vector<Vec3>& estimate, const std::vector<Vec3>& truth) {
  const Similarity s = umeyama(estimate, truth);
  ScaleShape out;
  out.scale_ratio = 1.0 / s.scale;
  out.scale_error = std::abs(out.scale_ratio - 1.0);
  Vec3 mean = Vec3::Zero();
  for (const auto& p : truth) mean += p / static_cast<double>(truth.size());
  double spread = 0.0, resid = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    spread += (truth[i] - mean).squaredNorm();
    resid += (s.apply(estimate[i]) - truth[i]).squaredNorm();
  }
  out.shape_error = spread > 0 ? std::sqrt(resid / spread) : 0.0;
  return out;
}

}  // namespace ekfslam

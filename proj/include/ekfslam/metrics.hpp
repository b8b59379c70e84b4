#pragma once

#include "ekfslam/geometry.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace ekfslam {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// e^T P^-1 e, or nothing when P is not positive definite.
std::optional<double> nees(const Eigen::VectorXd& e, const Eigen::MatrixXd& p);

struct NeesSeries {
  std::vector<double> values;  ///< one per valid step
  std::vector<int> steps;      ///< index of each value in the input streams
  int skipped{0};
};

NeesSeries compute_nees(const std::vector<Eigen::VectorXd>& errors, const std::vector<Eigen::MatrixXd>& covariances);

struct MonteCarloNees {
  std::vector<double> average;  ///< per-step mean over runs
  int runs{0};
  double dof{0};
  std::pair<double, double> n_run_bounds;       ///< interval for the N-run average
  std::pair<double, double> single_run_bounds;  ///< interval for one run
  double fraction_in_n_run{0};
  double fraction_in_single_run{0};
};

/// Averages aligned per-step NEES streams (truncated to the shortest) and
/// reports both chi-square intervals at `confidence`.
MonteCarloNees average_nees(const std::vector<std::vector<double>>& runs, double dof, double confidence = 0.99);

/// Pose error of an estimate against the truth: position error, rotation
/// vector of q_est * q_true^-1, and their 6x6 covariance from the 7x7
/// covariance of (p, q).
struct PoseError {
  Vec3 position{Vec3::Zero()};
  Vec3 rotation{Vec3::Zero()};
  Mat6 covariance{Mat6::Zero()};

  Vec6 vector() const;
};

PoseError pose_error(const Frame& estimate, const Eigen::Matrix<double, 7, 7>& cov, const Frame& truth);

/// Adds the stated truth precision to the error covariance.
void add_truth_uncertainty(PoseError& e, double sigma_pos, double sigma_ang);

/// dst ~ scale * R * src + t, least squares.
struct Similarity {
  double scale{1.0};
  Mat3 rotation{Mat3::Identity()};
  Vec3 translation{Vec3::Zero()};
  Vec3 apply(const Vec3& p) const { return scale * rotation * p + translation; }
};

Similarity umeyama(const std::vector<Vec3>& src, const std::vector<Vec3>& dst);

double rmse(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

/// Estimated-to-true scale ratio (1 / aligned scale) and the residual after
/// similarity alignment relative to the RMS spread of the true path.
struct ScaleShape {
  double scale_ratio{1.0};
  double scale_error{0.0};  ///< |scale_ratio - 1|
  double shape_error{0.0};
};

ScaleShape scale_and_shape(const std::vector<Vec3>& estimate, const std::vector<Vec3>& truth);

}  // namespace ekfslam

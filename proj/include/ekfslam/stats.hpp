#pragma once

#include <utility>

namespace ekfslam {

/// Inverse CDF of the chi-square distribution.
double chi2_quantile(double probability, double dof);

/// Two-sided interval [q((1-c)/2), q((1+c)/2)] for a chi-square variable.
std::pair<double, double> chi2_interval(double confidence, double dof);

}  // namespace ekfslam

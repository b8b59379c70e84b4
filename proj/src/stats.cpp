#include "ekfslam/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <stdexcept>

namespace ekfslam {

double chi2_quantile(double probability, double dof) {
  if (!(probability > 0.0 && probability < 1.0) || !(dof > 0.0))
    throw std::invalid_argument("chi2_quantile: probability in (0,1) and dof > 0 required");
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), probability);
}

std::pair<double, double> chi2_interval(double confidence, double dof) {
  const double tail = 0.5 * (1.0 - confidence);
  return {chi2_quantile(tail, dof), chi2_quantile(1.0 - tail, dof)};
}

}  // namespace ekfslam

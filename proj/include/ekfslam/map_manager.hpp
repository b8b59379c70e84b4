#pragma once

#include "ekfslam/filter.hpp"

#include <vector>

namespace ekfslam {

enum class MapPolicy { Slam, VisualOdometry };

struct LandmarkQualityPolicy {
  MapPolicy kind{MapPolicy::Slam};
  double min_match_ratio{0.5};  ///< matched / searched, checked after the grace period
  int max_consecutive_failures{5};
  int grace_frames{10};
  int min_corrections_for_conversion{3};
  double linearity_threshold{0.1};
  bool reparametrize{true};
  int max_landmarks{40};

  void validate() const;
};

struct MaintenanceReport {
  std::vector<int> removed;
  std::vector<int> converted;
};

class MapManager {
 public:
  explicit MapManager(LandmarkQualityPolicy p);

  const LandmarkQualityPolicy& policy() const { return policy_; }

  /// True when a block of `length` fits and the landmark cap is not reached.
  bool grant_slot(const SlamFilter& f, int length) const;

  /// Quality-based removal, then AHP to Euclidean conversion.
  MaintenanceReport maintain(SlamFilter& f, long frame);

  /// Linearity index of an AHP landmark seen from sensor 0's current position.
  static double landmark_linearity(const SlamFilter& f, const Landmark& l);

 private:
  LandmarkQualityPolicy policy_;
};

}  // namespace ekfslam

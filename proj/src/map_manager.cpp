#include "ekfslam/map_manager.hpp"

#include <cmath>
#include <stdexcept>

namespace ekfslam {

void LandmarkQualityPolicy::validate() const {
  if (!(min_match_ratio > 0 && min_match_ratio <= 1)) throw std::invalid_argument("min_match_ratio must be in (0,1]");
  if (max_consecutive_failures <= 0 || grace_frames < 0 || min_corrections_for_conversion < 0 || max_landmarks <= 0)
    throw std::invalid_argument("landmark policy counts must be positive");
  if (!(linearity_threshold > 0)) throw std::invalid_argument("linearity threshold must be positive");
}

MapManager::MapManager(LandmarkQualityPolicy p) : policy_(p) { policy_.validate(); }

bool MapManager::grant_slot(const SlamFilter& f, int length) const {
  return f.map().largest_free_range() >= length && static_cast<int>(f.landmarks().size()) < policy_.max_landmarks;
}

double MapManager::landmark_linearity(const SlamFilter& f, const Landmark& l) {
  if (l.type != LandmarkType::Ahp) return 0.0;
  const AhpLandmark a = AhpLandmark::from_vector(f.map().mean(l.block));
  const double var = f.map().covariance(l.block)(6, 6);
  return linearity_index(a, std::sqrt(std::max(0.0, var)), f.camera_frame(0).t);
}

MaintenanceReport MapManager::maintain(SlamFilter& f, long frame) {
  MaintenanceReport rep;
  for (const auto& [id, l] : f.landmarks()) {
    bool drop = false;
    bool seen = false;
    for (const Observation& o : l.observations) {
      const ObsCounters& c = o.counters;
      if (c.consecutive_failures >= policy_.max_consecutive_failures) drop = true;
      if (frame - l.created_frame >= policy_.grace_frames && c.searched > 0 &&
          static_cast<double>(c.matched) / static_cast<double>(c.searched) < policy_.min_match_ratio)
        drop = true;
      if (o.status != ObsStatus::NotVisible) seen = true;
    }
    if (policy_.kind == MapPolicy::VisualOdometry && !seen && frame > l.created_frame) drop = true;
    if (drop) rep.removed.push_back(id);
  }
  for (int id : rep.removed) f.remove_landmark(id);

  if (!policy_.reparametrize) return rep;
  for (const auto& [id, l] : f.landmarks()) {
    if (l.type != LandmarkType::Ahp) continue;
    long corrections = 0;
    for (const Observation& o : l.observations) corrections += o.counters.corrected;
    if (corrections < policy_.min_corrections_for_conversion) continue;
    if (landmark_linearity(f, l) < policy_.linearity_threshold) rep.converted.push_back(id);
  }
  for (int id : rep.converted) f.reparametrize_landmark(id);
  return rep;
}

}  // namespace ekfslam

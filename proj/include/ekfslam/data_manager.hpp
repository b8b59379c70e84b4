#pragma once

#include "ekfslam/filter.hpp"
#include "ekfslam/map_manager.hpp"
#include "ekfslam/vision.hpp"

#include <functional>
#include <random>
#include <vector>

namespace ekfslam {

/// Fixed-size grid of cells whose origin moves randomly every frame.
class SearchGrid {
 public:
  SearchGrid(int cols, int rows, int width, int height);

  /// New origin offset within one cell pitch, occupancy cleared.
  void reset(std::mt19937_64& rng);
  void set_offset(int ox, int oy);

  int cell_count() const { return (cols_ + 1) * (rows_ + 1); }
  /// Cell of a pixel, or -1 outside the image.
  int cell_of(const Vec2& px) const;
  void occupy(const Vec2& px);
  int occupancy(int cell) const { return occupancy_.at(cell); }
  /// Cell rectangle clipped to the image.
  Roi cell_roi(int cell) const;
  std::vector<int> empty_cells() const;

 private:
  int cols_, rows_, width_, height_;
  int pitch_x_, pitch_y_;
  int ox_{0}, oy_{0};
  std::vector<int> occupancy_;
};

enum class Ranking { Determinant, Trace };

struct RansacConfig {
  bool enabled{true};
  int max_iterations{10};
  double success_probability{0.99};
  double strong_gate{5.99};  ///< chi2 95%, 2 dof, on the re-predicted innovation
  double gate{9.21};         ///< chi2 99%, 2 dof
  double search_sigma{3.0};  ///< half-size of the active-search box in std devs
  int correction_budget{20};
  double time_budget_ms{0.0};  ///< 0 disables the time limit
  Ranking ranking{Ranking::Determinant};

  void validate() const;
};

struct DataManagerConfig {
  RansacConfig ransac;
  int grid_cols{5};
  int grid_rows{4};
  int max_detections{1};
  HarrisParams harris;
  double zncc_threshold{0.85};
  int patch_side{11};
  double rho0{0.5};
  double sigma_rho0{0.25};
  bool record_regions{false};
};

struct SearchRecord {
  int landmark;
  SearchRegion region;
  SearchRegion bound;  ///< 3-sigma box of the frame's first prediction
};

struct FrameReport {
  long frame{0};
  int visible{0};
  int searched{0};
  int matched{0};
  int strong{0};
  int corrected{0};
  int gated{0};
  int rescued{0};
  int ransac_iterations{0};
  int new_landmarks{0};
  std::vector<int> corrected_landmarks;
  std::vector<int> candidate_landmarks;
  std::vector<SearchRecord> regions;
  double search_ms{0.0};
  double correct_ms{0.0};
  double detect_ms{0.0};
};

using TruthLookup = std::function<int(const Vec2&)>;

/// Per-sensor active search, one-point RANSAC and landmark detection.
class DataManager {
 public:
  DataManager(int sensor, const DataManagerConfig& cfg, std::uint64_t seed);

  const DataManagerConfig& config() const { return cfg_; }
  int sensor() const { return sensor_; }

  FrameReport process_frame(SlamFilter& f, const SearchImage& img, long frame);

  /// Harris detection in empty grid cells; returns the new landmark ids.
  std::vector<int> detect_new_landmarks(SlamFilter& f, const SearchImage& img, const MapManager& mm, long frame,
                                        const TruthLookup& truth = {});

  /// Harris evaluations made by the last detect_new_landmarks call.
  int detector_calls() const { return detector_calls_; }

  /// Appends detection counts to a report produced by process_frame.
  void finish_report(FrameReport& r, const std::vector<int>& created) const { r.new_landmarks = static_cast<int>(created.size()); }

 private:
  struct Candidate;

  SearchRegion sigma_box(const Vec2& centre, const Mat2& s, double k2) const;
  std::optional<std::pair<Vec2, double>> search(const SearchImage& img, const GrayImage& templ, SearchRegion r,
                                                const SearchRegion& bound, int landmark, FrameReport& rep);

  int sensor_;
  DataManagerConfig cfg_;
  std::mt19937_64 rng_;
  int detector_calls_{0};
};

/// Adaptive one-point RANSAC iteration count for inlier ratio `eps`.
int ransac_iterations(double eps, double success_probability, int cap);

}  // namespace ekfslam

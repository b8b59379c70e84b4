#include "ekfslam/data_manager.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>

namespace ekfslam {

SearchGrid::SearchGrid(int cols, int rows, int width, int height)
    : cols_(cols), rows_(rows), width_(width), height_(height) {
  if (cols <= 0 || rows <= 0 || width <= 0 || height <= 0) throw std::invalid_argument("invalid search grid");
  pitch_x_ = (width + cols - 1) / cols;
  pitch_y_ = (height + rows - 1) / rows;
  occupancy_.assign(cell_count(), 0);
}

void SearchGrid::reset(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dx(0, pitch_x_ - 1), dy(0, pitch_y_ - 1);
  const int ox = dx(rng);
  set_offset(ox, dy(rng));
}

void SearchGrid::set_offset(int ox, int oy) {
  ox_ = ox;
  oy_ = oy;
  std::fill(occupancy_.begin(), occupancy_.end(), 0);
}

// Cell column i spans [i*pitch - ox, (i+1)*pitch - ox); one extra column and
// row absorb the shift.
int SearchGrid::cell_of(const Vec2& px) const {
  const int x = static_cast<int>(std::lround(px.x()));
  const int y = static_cast<int>(std::lround(px.y()));
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return -1;
  const int i = (x + ox_) / pitch_x_;
  const int j = (y + oy_) / pitch_y_;
  return j * (cols_ + 1) + i;
}

void SearchGrid::occupy(const Vec2& px) {
  const int c = cell_of(px);
  if (c >= 0) ++occupancy_[c];
}

Roi SearchGrid::cell_roi(int cell) const {
  const int i = cell % (cols_ + 1), j = cell / (cols_ + 1);
  const int x0 = std::max(0, i * pitch_x_ - ox_), y0 = std::max(0, j * pitch_y_ - oy_);
  const int x1 = std::min(width_, (i + 1) * pitch_x_ - ox_), y1 = std::min(height_, (j + 1) * pitch_y_ - oy_);
  return {x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
}

std::vector<int> SearchGrid::empty_cells() const {
  std::vector<int> out;
  for (int c = 0; c < cell_count(); ++c) {
    const Roi r = cell_roi(c);
    if (occupancy_[c] == 0 && r.width > 0 && r.height > 0) out.push_back(c);
  }
  return out;
}

void RansacConfig::validate() const {
  if (max_iterations <= 0) throw std::invalid_argument("ransac max_iterations must be positive");
  if (correction_budget <= 0) throw std::invalid_argument("correction budget must be positive");
  if (!(strong_gate > 0 && strong_gate < gate)) throw std::invalid_argument("strong gate must be below the gate");
  if (!(success_probability > 0 && success_probability < 1)) throw std::invalid_argument("bad RANSAC probability");
  if (!(search_sigma > 0)) throw std::invalid_argument("search_sigma must be positive");
}

int ransac_iterations(double eps, double success_probability, int cap) {
  if (eps >= 1.0) return 1;
  if (eps <= 0.0) return cap;
  const double n = std::log(1.0 - success_probability) / std::log(1.0 - eps);
  return std::clamp(static_cast<int>(std::ceil(n)), 1, cap);
}

DataManager::DataManager(int sensor, const DataManagerConfig& cfg, std::uint64_t seed)
    : sensor_(sensor), cfg_(cfg), rng_(seed) {
  cfg_.ransac.validate();
  if (cfg_.patch_side <= 0 || cfg_.patch_side % 2 == 0) throw std::invalid_argument("patch side must be odd");
  if (cfg_.max_detections < 0) throw std::invalid_argument("max_detections must be non-negative");
}

SearchRegion DataManager::sigma_box(const Vec2& c, const Mat2& s, double k2) const {
  const double rx = std::sqrt(k2 * std::max(0.0, s(0, 0)));
  const double ry = std::sqrt(k2 * std::max(0.0, s(1, 1)));
  return {static_cast<int>(std::ceil(c.x() - rx)), static_cast<int>(std::floor(c.x() + rx)),
          static_cast<int>(std::ceil(c.y() - ry)), static_cast<int>(std::floor(c.y() + ry))};
}

namespace {

SearchRegion intersect(const SearchRegion& a, const SearchRegion& b) {
  return {std::max(a.x_min, b.x_min), std::min(a.x_max, b.x_max), std::max(a.y_min, b.y_min),
          std::min(a.y_max, b.y_max)};
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::optional<std::pair<Vec2, double>> DataManager::search(const SearchImage& img, const GrayImage& templ,
                                                           SearchRegion r, const SearchRegion& bound, int landmark,
                                                           FrameReport& rep) {
  r = intersect(r, bound);
  if (cfg_.record_regions) rep.regions.push_back({landmark, r, bound});
  if (r.empty()) return std::nullopt;
  const auto m = search_match(img, templ, r, cfg_.zncc_threshold);
  if (!m) return std::nullopt;
  return std::make_pair(refine_subpixel(img, templ, *m), m->score);
}

struct DataManager::Candidate {
  int landmark;
  Vec2 predicted;
  Mat2 s;
  double rank;
  SearchRegion box;
  GrayImage templ;
  bool searched{false};
  std::optional<std::pair<Vec2, double>> full;  // best match over the full box
  std::optional<Vec2> measurement;               // the one used for correction
  bool corrected{false};
  bool any_match{false};
};

FrameReport DataManager::process_frame(SlamFilter& f, const SearchImage& img, long frame) {
  FrameReport rep;
  rep.frame = frame;
  const auto t0 = std::chrono::steady_clock::now();
  const CameraSensor& cam = f.sensor(sensor_);
  const double margin = cfg_.patch_side / 2;
  const RansacConfig& rc = cfg_.ransac;

  // Prediction of every observation of this sensor.
  std::vector<Candidate> cands;
  const Frame cam_frame = f.camera_frame(sensor_);
  for (auto& [id, l] : f.landmarks()) {
    Observation& o = l.observations.at(sensor_);
    predict_observation(o, f, margin);
    ++o.counters.predicted;
    if (!o.visible) continue;
    ++o.counters.visible;
    Candidate c;
    c.landmark = id;
    c.predicted = o.predicted;
    c.s = o.s;
    c.rank = rc.ranking == Ranking::Determinant ? o.s.determinant() : o.s.trace();
    c.box = sigma_box(o.predicted, o.s, rc.search_sigma * rc.search_sigma);
    const Eigen::VectorXd params = f.map().mean(l.block);
    // Inverse distance can reach zero after a correction: warp with a far point on the ray.
    const bool at_infinity = l.type == LandmarkType::Ahp && !(params(6) > 0);
    const Vec3 point = at_infinity ? Vec3(params.head<3>() + 1e6 * params.segment<3>(3).normalized())
                                   : landmark_point(l.type, params);
    const AppearancePrediction ap = predict_appearance(l.descriptor, cam_frame, point, cam.intrinsics, cfg_.patch_side);
    o.appearance = ap.patch;
    o.appearance_degenerate = ap.degenerate;
    c.templ = ap.patch;
    cands.push_back(std::move(c));
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.rank > b.rank; });
  rep.visible = static_cast<int>(cands.size());
  for (const auto& c : cands) rep.candidate_landmarks.push_back(c.landmark);
  if (cands.empty()) return rep;

  auto full_match = [&](Candidate& c) -> const std::optional<std::pair<Vec2, double>>& {
    if (!c.searched) {
      c.searched = true;
      c.full = search(img, c.templ, c.box, c.box, c.landmark, rep);
      if (c.full) c.any_match = true;
    }
    return c.full;
  };

  auto budget_left = [&]() {
    if (rep.corrected >= rc.correction_budget) return false;
    return !(rc.time_budget_ms > 0 && elapsed_ms(t0) > rc.time_budget_ms);
  };

  // Re-predicts against the current map, gates and corrects.
  auto apply = [&](Candidate& c, const Vec2& z, double score) {
    Observation& o = f.landmark(c.landmark).observations.at(sensor_);
    predict_observation(o, f, margin);
    if (!o.visible) return false;
    const Innovation in = innovate(o, z, rc.gate);
    if (in.singular || o.status == ObsStatus::GatedOut) {
      ++rep.gated;
      return false;
    }
    if (f.correct(o) != CorrectionStatus::Applied) {
      o.status = ObsStatus::GatedOut;
      ++rep.gated;
      return false;
    }
    o.status = ObsStatus::Corrected;
    o.score = score;
    c.corrected = true;
    ++rep.corrected;
    rep.corrected_landmarks.push_back(c.landmark);
    return true;
  };

  if (!rc.enabled) {
    for (auto& c : cands) full_match(c);
    rep.search_ms = elapsed_ms(t0);
    for (auto& c : cands) {
      if (!budget_left()) break;
      if (c.full) apply(c, c.full->first, c.full->second);
    }
  } else {
    // One-point RANSAC over hypotheses drawn from the candidates.
    struct Hypothesis {
      int support{-1};
      double score{0.0};
      std::vector<std::pair<int, std::pair<Vec2, double>>> inliers;  // candidate index, match
    } best;
    std::vector<int> untried(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) untried[i] = static_cast<int>(i);
    int needed = rc.max_iterations;
    const BlockHandle robot = f.robot();
    const int nr = f.robot_size();

    while (rep.ransac_iterations < needed && !untried.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, untried.size() - 1);
      const std::size_t k = pick(rng_);
      const int hi = untried[k];
      untried.erase(untried.begin() + static_cast<long>(k));
      Candidate& hc = cands[hi];
      const auto& m = full_match(hc);
      if (!m) continue;
      ++rep.ransac_iterations;

      Observation ho = f.landmark(hc.landmark).observations.at(sensor_);
      const Vec2 y = m->first - ho.predicted;
      if (!(y.dot(ho.s.ldlt().solve(y)) <= rc.gate)) continue;
      const std::array<BlockHandle, 2> hs{robot, f.landmark(hc.landmark).block};
      const TentativeCorrection tc = f.map().tentative_correct(hs, ho.jacobian(), y, ho.s);
      if (!tc.valid()) continue;

      Hypothesis h;
      h.support = 1;
      h.score = m->second;
      h.inliers.emplace_back(hi, *m);
      for (int j = 0; j < static_cast<int>(cands.size()); ++j) {
        if (j == hi) continue;
        Candidate& c = cands[j];
        const Landmark& l = f.landmark(c.landmark);
        const std::vector<int> idx = f.joint_indices(l);
        const Eigen::VectorXd x = tc.mean(idx);
        Observation o = l.observations.at(sensor_);
        predict_observation(o, f, x.head(nr), x.tail(x.size() - nr), tc.covariance(idx), margin);
        if (!o.visible) continue;
        const SearchRegion strong = intersect(sigma_box(o.predicted, o.s, rc.strong_gate), c.box);
        std::optional<std::pair<Vec2, double>> sm;
        if (c.searched && c.full && strong.contains({static_cast<int>(std::lround(c.full->first.x())),
                                                     static_cast<int>(std::lround(c.full->first.y()))})) {
          sm = c.full;
        } else {
          sm = search(img, c.templ, strong, c.box, c.landmark, rep);
        }
        if (!sm) continue;
        c.any_match = true;
        const double d2 = (sm->first - o.predicted).dot(o.s.ldlt().solve(sm->first - o.predicted));
        if (d2 <= rc.strong_gate) {
          ++h.support;
          h.score += sm->second;
          h.inliers.emplace_back(j, *sm);
        }
      }
      if (h.support > best.support || (h.support == best.support && h.score > best.score)) best = std::move(h);
      needed = ransac_iterations(static_cast<double>(best.support) / static_cast<double>(cands.size()),
                                 rc.success_probability, rc.max_iterations);
    }
    rep.search_ms = elapsed_ms(t0);
    rep.strong = std::max(0, best.support);

    // Inliers in ranked order, then individual rescue of the rest.
    std::map<int, std::pair<Vec2, double>> inlier_z(best.inliers.begin(), best.inliers.end());
    for (int i = 0; i < static_cast<int>(cands.size()); ++i) {
      if (!budget_left()) break;
      auto it = inlier_z.find(i);
      if (it != inlier_z.end()) apply(cands[i], it->second.first, it->second.second);
    }
    for (int i = 0; i < static_cast<int>(cands.size()); ++i) {
      Candidate& c = cands[i];
      if (c.corrected || inlier_z.count(i)) continue;
      if (!budget_left()) break;
      Observation& o = f.landmark(c.landmark).observations.at(sensor_);
      predict_observation(o, f, margin);
      if (!o.visible) continue;
      const auto m = search(img, c.templ, sigma_box(o.predicted, o.s, rc.gate), c.box, c.landmark, rep);
      if (!m) continue;
      c.any_match = true;
      if (apply(c, m->first, m->second)) ++rep.rescued;
    }
  }
  rep.correct_ms = elapsed_ms(t0) - rep.search_ms;

  for (auto& c : cands) {
    Observation& o = f.landmark(c.landmark).observations.at(sensor_);
    ++o.counters.searched;
    ++rep.searched;
    if (c.any_match) {
      ++o.counters.matched;
      ++rep.matched;
    }
    if (c.corrected) {
      ++o.counters.corrected;
      o.counters.consecutive_failures = 0;
    } else {
      ++o.counters.consecutive_failures;
      if (o.status == ObsStatus::Corrected) o.status = ObsStatus::Unmatched;
    }
  }
  return rep;
}

std::vector<int> DataManager::detect_new_landmarks(SlamFilter& f, const SearchImage& img, const MapManager& mm,
                                                   long frame, const TruthLookup& truth) {
  std::vector<int> created;
  detector_calls_ = 0;
  if (cfg_.max_detections == 0) return created;
  const GrayImage& im = img.image();
  SearchGrid grid(cfg_.grid_cols, cfg_.grid_rows, im.width, im.height);
  grid.reset(rng_);
  for (const auto& [id, l] : f.landmarks()) {
    const Observation& o = l.observations.at(sensor_);
    if (o.visible) grid.occupy(o.predicted);
  }
  std::vector<int> cells = grid.empty_cells();
  std::shuffle(cells.begin(), cells.end(), rng_);

  const int half = cfg_.patch_side / 2;
  for (int cell : cells) {
    if (static_cast<int>(created.size()) >= cfg_.max_detections) break;
    Roi r = grid.cell_roi(cell);
    // Keep room for the descriptor patch, then for the Harris masks.
    const int x0 = std::max(r.x, half), y0 = std::max(r.y, half);
    const int x1 = std::min(r.x + r.width, im.width - half), y1 = std::min(r.y + r.height, im.height - half);
    r = harris_clip(im, {x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)}, cfg_.harris);
    if (r.width < cfg_.harris.window || r.height < cfg_.harris.window) continue;
    ++detector_calls_;
    const auto corner = harris_best(im, r, cfg_.harris);
    if (!corner) continue;
    if (!mm.grant_slot(f, AhpLandmark::kSize)) break;
    const Vec2 px(corner->pixel.x, corner->pixel.y);
    LandmarkDescriptor d{crop(im, corner->pixel.x - half, corner->pixel.y - half, cfg_.patch_side, cfg_.patch_side),
                         f.camera_frame(sensor_), px};
    const int id = f.add_ahp_landmark(sensor_, px, cfg_.rho0, cfg_.sigma_rho0, std::move(d),
                                      truth ? truth(px) : -1, frame);
    Observation& o = f.landmark(id).observations.at(sensor_);
    o.visible = true;
    o.predicted = px;
    created.push_back(id);
  }
  return created;
}

}  // namespace ekfslam

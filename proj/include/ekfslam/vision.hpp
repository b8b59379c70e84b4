#pragma once

#include "ekfslam/geometry.hpp"
#include "ekfslam/image.hpp"
#include "ekfslam/landmarks.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace ekfslam {

struct Pixel {
  int x{0};
  int y{0};
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Rectangle [x, x+width) x [y, y+height).
struct Roi {
  int x{0};
  int y{0};
  int width{0};
  int height{0};
};

/// Cumulative sums with one extra leading row and column of zeros:
/// at(x, y) = sum of img over [0,x) x [0,y). A second plane holds squares.
struct IntegralImage {
  int width{0};
  int height{0};
  std::vector<std::int64_t> sum;
  std::vector<std::int64_t> sum_sq;

  std::int64_t at(int x, int y) const { return sum[static_cast<std::size_t>(y) * (width + 1) + x]; }
  std::int64_t at_sq(int x, int y) const { return sum_sq[static_cast<std::size_t>(y) * (width + 1) + x]; }
  std::int64_t rect_sum(int x, int y, int w, int h) const {
    return at(x + w, y + h) - at(x, y + h) - at(x + w, y) + at(x, y);
  }
  std::int64_t rect_sum_sq(int x, int y, int w, int h) const {
    return at_sq(x + w, y + h) - at_sq(x, y + h) - at_sq(x + w, y) + at_sq(x, y);
  }
};

IntegralImage build_integral(const GrayImage& img);

/// 2x2 box average, rounded.
GrayImage half_resolution(const GrayImage& img);

struct HarrisParams {
  int window{5};           ///< side of the constant square smoothing mask
  double k{0.04};
  double min_response{1e7};
};

inline double harris_response(std::int64_t sxx, std::int64_t syy, std::int64_t sxy, double k) {
  const double det = static_cast<double>(sxx) * static_cast<double>(syy) -
                     static_cast<double>(sxy) * static_cast<double>(sxy);
  const double tr = static_cast<double>(sxx + syy);
  return det - k * tr * tr;
}

/// Harris response at every ROI pixel, row-major, using [-1,0,1]
/// derivatives and box-window sums from integral images of the
/// derivative products. The ROI needs window/2 + 1 pixels of margin.
std::vector<double> harris_response_map(const GrayImage& img, const Roi& roi, const HarrisParams& p);

struct Corner {
  Pixel pixel;
  double score{0.0};
};

/// The single strongest Harris response in the ROI (first in raster order
/// on ties), or nothing when it does not exceed the response floor.
std::optional<Corner> harris_best(const GrayImage& img, const Roi& roi, const HarrisParams& p);

/// Largest ROI inside `roi` that satisfies the Harris margin requirement.
Roi harris_clip(const GrayImage& img, const Roi& roi, const HarrisParams& p);

struct ZnccResult {
  double score{0.0};
  bool degenerate{false};
};

/// ZNCC from exact integer moments of two n-pixel windows.
inline ZnccResult zncc_from_sums(std::int64_t n, std::int64_t sa, std::int64_t sb, std::int64_t saa,
                                 std::int64_t sbb, std::int64_t sab) {
  const std::int64_t va = n * saa - sa * sa;
  const std::int64_t vb = n * sbb - sb * sb;
  if (va <= 0 || vb <= 0) return {0.0, true};
  const std::int64_t num = n * sab - sa * sb;
  return {static_cast<double>(num) / std::sqrt(static_cast<double>(va) * static_cast<double>(vb)), false};
}

ZnccResult zncc(const GrayImage& a, const GrayImage& b);

/// Image plus the integral planes and half-resolution level used by the
/// matcher. Built once per frame.
class SearchImage {
 public:
  explicit SearchImage(GrayImage img);

  const GrayImage& image() const { return full_; }
  const IntegralImage& integral() const { return full_int_; }
  const GrayImage& half() const { return half_; }
  const IntegralImage& half_integral() const { return half_int_; }

 private:
  GrayImage full_;
  IntegralImage full_int_;
  GrayImage half_;
  IntegralImage half_int_;
};

/// Inclusive bounds on candidate template centres.
struct SearchRegion {
  int x_min{0};
  int x_max{-1};
  int y_min{0};
  int y_max{-1};

  bool empty() const { return x_max < x_min || y_max < y_min; }
  long area() const { return empty() ? 0 : static_cast<long>(x_max - x_min + 1) * (y_max - y_min + 1); }
  bool contains(Pixel p) const { return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max; }
};

/// Restricts a region to centres whose template window fits in the image.
SearchRegion clamp_region(const SearchRegion& r, int width, int height, int half_side);

struct Match {
  Pixel pixel;
  double score{0.0};
};

struct SearchStats {
  long coarse_candidates{0};
  long full_candidates{0};
  long completed{0};  ///< candidates whose score was fully computed
  long aborted{0};    ///< candidates cut by the partial-correlation bound
};

/// Exact ZNCC of the template centred at `center`.
ZnccResult zncc_at(const SearchImage& img, const GrayImage& templ, Pixel center);

/// Best ZNCC match of `templ` over the region. A coarse pass at half
/// resolution and a +-2 px full-resolution refinement seed the bound of a
/// full-resolution scan with bounded partial correlation, so the result is
/// the exhaustive argmax (first in raster order on ties) whenever its score
/// reaches the threshold.
std::optional<Match> search_match(const SearchImage& img, const GrayImage& templ, SearchRegion region,
                                  double threshold, SearchStats* stats = nullptr);

/// Parabolic sub-pixel peak from the 4-neighbour ZNCC scores.
Vec2 refine_subpixel(const SearchImage& img, const GrayImage& templ, const Match& m);

struct AppearancePrediction {
  GrayImage patch;
  bool degenerate{false};
};

/// Warps the stored patch through the homography of the plane through the
/// landmark facing the reference camera. Falls back to the unwarped patch
/// (degenerate = true) at grazing views.
AppearancePrediction predict_appearance(const LandmarkDescriptor& d, const Frame& cam, const Vec3& point,
                                        const PinholeIntrinsics& k, int side);

}  // namespace ekfslam

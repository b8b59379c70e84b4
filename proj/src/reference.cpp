#include "ekfslam/reference.hpp"

#include <limits>
#include <stdexcept>

namespace ekfslam::reference {

std::int64_t rect_sum(const GrayImage& img, int x, int y, int w, int h) {
  std::int64_t s = 0;
  for (int j = y; j < y + h; ++j)
    for (int i = x; i < x + w; ++i) s += img(i, j);
  return s;
}

std::int64_t rect_sum_sq(const GrayImage& img, int x, int y, int w, int h) {
  std::int64_t s = 0;
  for (int j = y; j < y + h; ++j)
    for (int i = x; i < x + w; ++i) s += static_cast<std::int64_t>(img(i, j)) * img(i, j);
  return s;
}

IntegralImage build_integral(const GrayImage& img) {
  IntegralImage ii;
  ii.width = img.width;
  ii.height = img.height;
  const int stride = img.width + 1;
  ii.sum.assign(static_cast<std::size_t>(stride) * (img.height + 1), 0);
  ii.sum_sq.assign(ii.sum.size(), 0);
  for (int y = 1; y <= img.height; ++y)
    for (int x = 1; x <= img.width; ++x) {
      const std::int64_t v = img(x - 1, y - 1);
      const std::size_t i = static_cast<std::size_t>(y) * stride + x;
      ii.sum[i] = v + ii.sum[i - 1] + ii.sum[i - stride] - ii.sum[i - stride - 1];
      ii.sum_sq[i] = v * v + ii.sum_sq[i - 1] + ii.sum_sq[i - stride] - ii.sum_sq[i - stride - 1];
    }
  return ii;
}

GrayImage half_resolution(const GrayImage& img) {
  GrayImage out(img.width / 2, img.height / 2);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      const int s = img(2 * x, 2 * y) + img(2 * x + 1, 2 * y) + img(2 * x, 2 * y + 1) + img(2 * x + 1, 2 * y + 1);
      out(x, y) = static_cast<std::uint8_t>((s + 2) / 4);
    }
  return out;
}

std::vector<double> harris_response_map(const GrayImage& img, const Roi& roi, const HarrisParams& p) {
  const int hw = p.window / 2;
  if (roi.width < p.window || roi.height < p.window) throw std::invalid_argument("ROI smaller than window");
  std::vector<double> out(static_cast<std::size_t>(roi.width) * roi.height);
  for (int y = 0; y < roi.height; ++y)
    for (int x = 0; x < roi.width; ++x) {
      std::int64_t sxx = 0, syy = 0, sxy = 0;
      for (int j = -hw; j <= hw; ++j)
        for (int i = -hw; i <= hw; ++i) {
          const int cx = roi.x + x + i, cy = roi.y + y + j;
          const std::int64_t gx = static_cast<int>(img(cx + 1, cy)) - static_cast<int>(img(cx - 1, cy));
          const std::int64_t gy = static_cast<int>(img(cx, cy + 1)) - static_cast<int>(img(cx, cy - 1));
          sxx += gx * gx;
          syy += gy * gy;
          sxy += gx * gy;
        }
      out[static_cast<std::size_t>(y) * roi.width + x] = harris_response(sxx, syy, sxy, p.k);
    }
  return out;
}

std::optional<Corner> harris_best(const GrayImage& img, const Roi& roi, const HarrisParams& p) {
  const auto r = reference::harris_response_map(img, roi, p);
  std::size_t best = 0;
  for (std::size_t i = 1; i < r.size(); ++i)
    if (r[i] > r[best]) best = i;
  if (!(r[best] > p.min_response)) return std::nullopt;
  const int i = static_cast<int>(best);
  return Corner{{roi.x + i % roi.width, roi.y + i / roi.width}, r[best]};
}

std::optional<Match> exhaustive_search(const GrayImage& img, const GrayImage& templ, SearchRegion region,
                                       double threshold) {
  const int h = templ.width / 2;
  region = clamp_region(region, img.width, img.height, h);
  std::optional<Match> best;
  for (int y = region.y_min; y <= region.y_max; ++y)
    for (int x = region.x_min; x <= region.x_max; ++x) {
      const double s = zncc(templ, crop(img, x - h, y - h, templ.width, templ.height)).score;
      if (!best || s > best->score) best = Match{{x, y}, s};
    }
  if (!best || !(best->score >= threshold)) return std::nullopt;
  return best;
}

}  // namespace ekfslam::reference

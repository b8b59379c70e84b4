#include "ekfslam/vision.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace ekfslam {

namespace {
// Below this many pixels the OpenMP fork costs more than it saves.
constexpr long kParallelMinPixels = 64 * 1024;
}  // namespace

IntegralImage build_integral(const GrayImage& img) {
  IntegralImage ii;
  ii.width = img.width;
  ii.height = img.height;
  const int stride = img.width + 1;
  const std::size_t total = static_cast<std::size_t>(stride) * (img.height + 1);
  ii.sum.assign(total, 0);
  ii.sum_sq.assign(total, 0);
  const bool par = static_cast<long>(img.width) * img.height >= kParallelMinPixels;

  // Row prefix sums, rows independent.
#pragma omp parallel for schedule(static) if (par)
  for (int y = 0; y < img.height; ++y) {
    const std::uint8_t* src = img.row(y);
    std::int64_t* s = ii.sum.data() + static_cast<std::size_t>(y + 1) * stride;
    std::int64_t* q = ii.sum_sq.data() + static_cast<std::size_t>(y + 1) * stride;
    std::int64_t acc = 0, acc_sq = 0;
    for (int x = 0; x < img.width; ++x) {
      const std::int64_t v = src[x];
      acc += v;
      acc_sq += v * v;
      s[x + 1] = acc;
      q[x + 1] = acc_sq;
    }
  }
  // Column accumulation, columns independent.
#pragma omp parallel for schedule(static) if (par)
  for (int x = 1; x <= img.width; ++x) {
    for (int y = 2; y <= img.height; ++y) {
      const std::size_t i = static_cast<std::size_t>(y) * stride + x;
      ii.sum[i] += ii.sum[i - stride];
      ii.sum_sq[i] += ii.sum_sq[i - stride];
    }
  }
  return ii;
}

GrayImage half_resolution(const GrayImage& img) {
  GrayImage out(img.width / 2, img.height / 2);
  const bool par = static_cast<long>(img.width) * img.height >= kParallelMinPixels;
#pragma omp parallel for schedule(static) if (par)
  for (int y = 0; y < out.height; ++y) {
    const std::uint8_t* a = img.row(2 * y);
    const std::uint8_t* b = img.row(2 * y + 1);
    std::uint8_t* o = out.row(y);
    for (int x = 0; x < out.width; ++x) {
      const int s = a[2 * x] + a[2 * x + 1] + b[2 * x] + b[2 * x + 1];
      o[x] = static_cast<std::uint8_t>((s + 2) / 4);
    }
  }
  return out;
}

Roi harris_clip(const GrayImage& img, const Roi& roi, const HarrisParams& p) {
  const int m = p.window / 2 + 1;
  Roi r;
  r.x = std::max(roi.x, m);
  r.y = std::max(roi.y, m);
  const int x1 = std::min(roi.x + roi.width, img.width - m);
  const int y1 = std::min(roi.y + roi.height, img.height - m);
  r.width = std::max(0, x1 - r.x);
  r.height = std::max(0, y1 - r.y);
  return r;
}

std::vector<double> harris_response_map(const GrayImage& img, const Roi& roi, const HarrisParams& p) {
  if (p.window <= 0 || p.window % 2 == 0) throw std::invalid_argument("Harris window must be odd");
  if (roi.width < p.window || roi.height < p.window)
    throw std::invalid_argument("Harris ROI smaller than the smoothing window");
  const int hw = p.window / 2;
  const int m = hw + 1;
  if (roi.x < m || roi.y < m || roi.x + roi.width > img.width - m || roi.y + roi.height > img.height - m)
    throw std::invalid_argument("Harris ROI lacks the derivative/window margin");

  // Derivative products over the ROI grown by the half window.
  const int ex = roi.x - hw, ey = roi.y - hw;
  const int ew = roi.width + 2 * hw, eh = roi.height + 2 * hw;
  const int stride = ew + 1;
  std::vector<std::int64_t> ixx(static_cast<std::size_t>(stride) * (eh + 1), 0);
  std::vector<std::int64_t> iyy(ixx.size(), 0), ixy(ixx.size(), 0);
  for (int y = 0; y < eh; ++y) {
    const int iy = ey + y;
    const std::uint8_t* up = img.row(iy - 1);
    const std::uint8_t* mid = img.row(iy);
    const std::uint8_t* dn = img.row(iy + 1);
    std::int64_t axx = 0, ayy = 0, axy = 0;
    const std::size_t base = static_cast<std::size_t>(y + 1) * stride;
    const std::size_t prev = static_cast<std::size_t>(y) * stride;
    for (int x = 0; x < ew; ++x) {
      const int ix = ex + x;
      const std::int64_t gx = static_cast<int>(mid[ix + 1]) - static_cast<int>(mid[ix - 1]);
      const std::int64_t gy = static_cast<int>(dn[ix]) - static_cast<int>(up[ix]);
      axx += gx * gx;
      ayy += gy * gy;
      axy += gx * gy;
      ixx[base + x + 1] = ixx[prev + x + 1] + axx;
      iyy[base + x + 1] = iyy[prev + x + 1] + ayy;
      ixy[base + x + 1] = ixy[prev + x + 1] + axy;
    }
  }

  std::vector<double> out(static_cast<std::size_t>(roi.width) * roi.height);
  const int win = p.window;
  auto box = [&](const std::vector<std::int64_t>& t, int x, int y) {
    return t[static_cast<std::size_t>(y + win) * stride + x + win] - t[static_cast<std::size_t>(y) * stride + x + win] -
           t[static_cast<std::size_t>(y + win) * stride + x] + t[static_cast<std::size_t>(y) * stride + x];
  };
  const bool par = static_cast<long>(roi.width) * roi.height >= kParallelMinPixels;
#pragma omp parallel for schedule(static) if (par)
  for (int y = 0; y < roi.height; ++y)
    for (int x = 0; x < roi.width; ++x)
      out[static_cast<std::size_t>(y) * roi.width + x] = harris_response(box(ixx, x, y), box(iyy, x, y), box(ixy, x, y), p.k);
  return out;
}

std::optional<Corner> harris_best(const GrayImage& img, const Roi& roi, const HarrisParams& p) {
  const std::vector<double> r = harris_response_map(img, roi, p);
  const auto it = std::max_element(r.begin(), r.end());  // first maximum in raster order
  if (!(*it > p.min_response)) return std::nullopt;
  const int i = static_cast<int>(it - r.begin());
  return Corner{{roi.x + i % roi.width, roi.y + i / roi.width}, *it};
}

ZnccResult zncc(const GrayImage& a, const GrayImage& b) {
  if (a.width != b.width || a.height != b.height) throw std::invalid_argument("zncc: patch size mismatch");
  std::int64_t sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const std::int64_t u = a.data[i], v = b.data[i];
    sa += u;
    sb += v;
    saa += u * u;
    sbb += v * v;
    sab += u * v;
  }
  return zncc_from_sums(static_cast<std::int64_t>(a.data.size()), sa, sb, saa, sbb, sab);
}

SearchImage::SearchImage(GrayImage img)
    : full_(std::move(img)),
      full_int_(build_integral(full_)),
      half_(half_resolution(full_)),
      half_int_(build_integral(half_)) {}

SearchRegion clamp_region(const SearchRegion& r, int width, int height, int half_side) {
  return {std::max(r.x_min, half_side), std::min(r.x_max, width - 1 - half_side),
          std::max(r.y_min, half_side), std::min(r.y_max, height - 1 - half_side)};
}

namespace {

// Template moments and the row-suffix quantities used by the bound.
struct PreparedTemplate {
  int side{0};
  int half{0};
  std::int64_t n{0};
  std::int64_t sum{0};
  std::int64_t sum_sq{0};
  std::int64_t variance_term{0};   // n*sum_sq - sum^2
  std::vector<std::int32_t> a;     // n*a_i - sum, so that sum_i a_i*b_i = n*sab - sa*sb
  std::vector<double> suffix_norm; // |a| over rows k..side-1
  std::vector<std::int64_t> suffix_sum;

  explicit PreparedTemplate(const GrayImage& t) : side(t.width), half(t.width / 2) {
    if (t.width != t.height || t.width % 2 == 0) throw std::invalid_argument("template must be square with odd side");
    n = static_cast<std::int64_t>(side) * side;
    for (auto v : t.data) {
      sum += v;
      sum_sq += static_cast<std::int64_t>(v) * v;
    }
    variance_term = n * sum_sq - sum * sum;
    a.resize(t.data.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<std::int32_t>(n * t.data[i] - sum);
    suffix_norm.assign(side + 1, 0.0);
    suffix_sum.assign(side + 1, 0);
    double acc = 0.0;
    std::int64_t acc_s = 0;
    for (int r = side - 1; r >= 0; --r) {
      for (int c = 0; c < side; ++c) {
        const double v = a[static_cast<std::size_t>(r) * side + c];
        acc += v * v;
        acc_s += a[static_cast<std::size_t>(r) * side + c];
      }
      suffix_norm[r] = std::sqrt(acc);
      suffix_sum[r] = acc_s;
    }
  }
};

double exact_score(const GrayImage& img, const IntegralImage& ii, const PreparedTemplate& t, int cx, int cy) {
  const int x0 = cx - t.half, y0 = cy - t.half;
  const std::int64_t sb = ii.rect_sum(x0, y0, t.side, t.side);
  const std::int64_t sbb = ii.rect_sum_sq(x0, y0, t.side, t.side);
  std::int64_t sab = 0;
  for (int r = 0; r < t.side; ++r) {
    const std::uint8_t* row = img.row(y0 + r) + x0;
    const std::int32_t* ar = t.a.data() + static_cast<std::size_t>(r) * t.side;
    std::int64_t acc = 0;
    for (int c = 0; c < t.side; ++c) acc += static_cast<std::int64_t>(ar[c]) * row[c];
    sab += acc;
  }
  // sab here is n*Sab - Sa*Sb; recover the raw cross moment for the shared formula.
  const std::int64_t raw = (sab + t.sum * sb) / t.n;
  return zncc_from_sums(t.n, t.sum, sb, t.sum_sq, sbb, raw).score;
}

// Score with early termination. Returns -inf when the bound proves the
// candidate cannot reach `floor`.
double bounded_score(const GrayImage& img, const IntegralImage& ii, const PreparedTemplate& t, int cx, int cy,
                     double floor, bool& aborted) {
  aborted = false;
  const int x0 = cx - t.half, y0 = cy - t.half;
  const std::int64_t sb = ii.rect_sum(x0, y0, t.side, t.side);
  const std::int64_t sbb = ii.rect_sum_sq(x0, y0, t.side, t.side);
  const std::int64_t vb = t.n * sbb - sb * sb;
  if (t.variance_term <= 0 || vb <= 0) return 0.0;
  const double denom = std::sqrt(static_cast<double>(t.variance_term) * static_cast<double>(vb));
  const bool bounded = std::isfinite(floor);
  constexpr double kSlack = 1e-9;

  std::int64_t partial = 0;
  for (int r = 0; r < t.side; ++r) {
    if (bounded && r >= 2) {
      const int rest_rows = t.side - r;
      const std::int64_t m = static_cast<std::int64_t>(rest_rows) * t.side;
      const std::int64_t rb = ii.rect_sum(x0, y0 + r, t.side, rest_rows);
      const std::int64_t rbb = ii.rect_sum_sq(x0, y0 + r, t.side, rest_rows);
      const double spread = static_cast<double>(m * rbb - rb * rb) / static_cast<double>(m);
      const double bound = t.suffix_norm[r] * std::sqrt(std::max(0.0, spread)) +
                           static_cast<double>(rb) / static_cast<double>(m) * static_cast<double>(t.suffix_sum[r]);
      if ((static_cast<double>(partial) + bound) / denom < floor - kSlack) {
        aborted = true;
        return -std::numeric_limits<double>::infinity();
      }
    }
    const std::uint8_t* row = img.row(y0 + r) + x0;
    const std::int32_t* ar = t.a.data() + static_cast<std::size_t>(r) * t.side;
    std::int64_t acc = 0;
    for (int c = 0; c < t.side; ++c) acc += static_cast<std::int64_t>(ar[c]) * row[c];
    partial += acc;
  }
  const std::int64_t raw = (partial + t.sum * sb) / t.n;
  return zncc_from_sums(t.n, t.sum, sb, t.sum_sq, sbb, raw).score;
}

GrayImage half_template(const GrayImage& t) {
  const int hs = (t.width - 1) / 2;
  GrayImage out(hs, hs);
  for (int y = 0; y < hs; ++y)
    for (int x = 0; x < hs; ++x) {
      const int s = t(2 * x, 2 * y) + t(2 * x + 1, 2 * y) + t(2 * x, 2 * y + 1) + t(2 * x + 1, 2 * y + 1);
      out(x, y) = static_cast<std::uint8_t>((s + 2) / 4);
    }
  return out;
}

}  // namespace

ZnccResult zncc_at(const SearchImage& img, const GrayImage& templ, Pixel c) {
  const PreparedTemplate t(templ);
  if (c.x - t.half < 0 || c.y - t.half < 0 || c.x + t.half >= img.image().width || c.y + t.half >= img.image().height)
    throw std::out_of_range("zncc_at: window outside the image");
  const GrayImage win = crop(img.image(), c.x - t.half, c.y - t.half, t.side, t.side);
  return zncc(templ, win);
}

std::optional<Match> search_match(const SearchImage& img, const GrayImage& templ, SearchRegion region,
                                  double threshold, SearchStats* stats) {
  const PreparedTemplate t(templ);
  const GrayImage& full = img.image();
  region = clamp_region(region, full.width, full.height, t.half);
  if (region.empty()) return std::nullopt;
  SearchStats local;
  SearchStats& st = stats ? *stats : local;

  double best = -std::numeric_limits<double>::infinity();
  long best_index = std::numeric_limits<long>::max();
  Pixel best_px{};
  const long row_len = region.x_max - region.x_min + 1;
  auto raster = [&](int x, int y) { return static_cast<long>(y - region.y_min) * row_len + (x - region.x_min); };
  auto consider = [&](int x, int y, double s) {
    const long idx = raster(x, y);
    if (s > best || (s == best && idx < best_index)) {
      best = s;
      best_index = idx;
      best_px = {x, y};
    }
  };

  // Coarse seed at half resolution.
  if (region.area() > 25 && t.side >= 5) {
    const GrayImage ht = half_template(templ);
    const PreparedTemplate th(ht.width % 2 ? ht : crop(ht, 0, 0, ht.width - 1, ht.width - 1));
    const GrayImage& hi = img.half();
    // half-res top-left X0 maps to full-res centre 2*X0 + t.half
    const int hx0 = std::max(0, (region.x_min - t.half + 1) / 2);
    const int hx1 = std::min(hi.width - th.side, (region.x_max - t.half) / 2);
    const int hy0 = std::max(0, (region.y_min - t.half + 1) / 2);
    const int hy1 = std::min(hi.height - th.side, (region.y_max - t.half) / 2);
    double coarse_best = -std::numeric_limits<double>::infinity();
    Pixel seed{-1, -1};
    for (int y = hy0; y <= hy1; ++y)
      for (int x = hx0; x <= hx1; ++x) {
        bool ab = false;
        const double s = bounded_score(hi, img.half_integral(), th, x + th.half, y + th.half, coarse_best, ab);
        ++st.coarse_candidates;
        if (s > coarse_best) {
          coarse_best = s;
          seed = {2 * x + t.half, 2 * y + t.half};
        }
      }
    if (seed.x >= 0) {
      for (int y = seed.y - 2; y <= seed.y + 2; ++y)
        for (int x = seed.x - 2; x <= seed.x + 2; ++x)
          if (region.contains({x, y})) consider(x, y, exact_score(full, img.integral(), t, x, y));
    }
  }

  // Full-resolution scan; the bound only discards candidates that cannot
  // beat the current best (or reach the threshold).
  for (int y = region.y_min; y <= region.y_max; ++y)
    for (int x = region.x_min; x <= region.x_max; ++x) {
      ++st.full_candidates;
      bool aborted = false;
      const double floor = std::max(best, threshold);
      const double s = bounded_score(full, img.integral(), t, x, y, floor, aborted);
      if (aborted) {
        ++st.aborted;
        continue;
      }
      ++st.completed;
      consider(x, y, s);
    }

  if (!(best >= threshold)) return std::nullopt;
  return Match{best_px, best};
}

Vec2 refine_subpixel(const SearchImage& img, const GrayImage& templ, const Match& m) {
  const int h = templ.width / 2;
  const GrayImage& full = img.image();
  auto score = [&](int x, int y) -> std::optional<double> {
    if (x - h < 0 || y - h < 0 || x + h >= full.width || y + h >= full.height) return std::nullopt;
    return zncc_at(img, templ, {x, y}).score;
  };
  auto offset = [](std::optional<double> lo, double c, std::optional<double> hi) {
    if (!lo || !hi) return 0.0;
    const double d = *lo - 2 * c + *hi;
    if (!(d < 0)) return 0.0;
    return std::clamp(0.5 * (*lo - *hi) / d, -0.5, 0.5);
  };
  const double c = m.score;
  return {m.pixel.x + offset(score(m.pixel.x - 1, m.pixel.y), c, score(m.pixel.x + 1, m.pixel.y)),
          m.pixel.y + offset(score(m.pixel.x, m.pixel.y - 1), c, score(m.pixel.x, m.pixel.y + 1))};
}

AppearancePrediction predict_appearance(const LandmarkDescriptor& d, const Frame& cam, const Vec3& point,
                                        const PinholeIntrinsics& k, int side) {
  if (side <= 0 || side % 2 == 0) throw std::invalid_argument("appearance side must be odd");
  const int h = side / 2;
  const int dh = d.patch.width / 2;
  auto fallback = [&]() {
    AppearancePrediction out{GrayImage(side, side), true};
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        out.patch(x, y) = static_cast<std::uint8_t>(std::lround(sample_bilinear(d.patch, dh + x - h, dh + y - h)));
    return out;
  };

  const Projection c = pinhole_project(k, cam.to_local(point));
  Vec3 normal = d.ref_pose.t - point;
  if (!c.in_front || normal.norm() < 1e-9) return fallback();
  normal.normalize();

  const Projection r0 = pinhole_project(k, d.ref_pose.to_local(point));
  if (!r0.in_front) return fallback();
  const Mat3 rc = cam.q.rotation_matrix();
  const double plane_d = normal.dot(point - cam.t);
  AppearancePrediction out{GrayImage(side, side), false};
  for (int y = -h; y <= h; ++y)
    for (int x = -h; x <= h; ++x) {
      const Vec2 q = c.pixel + Vec2(x, y);
      const Vec3 ray = rc * Vec3((q.x() - k.u0) / k.fu, (q.y() - k.v0) / k.fv, 1.0);
      const double cosine = normal.dot(ray) / ray.norm();
      if (std::abs(cosine) < 0.2) return fallback();
      const double s = plane_d / normal.dot(ray);
      if (!(s > 0)) return fallback();
      const Projection r = pinhole_project(k, d.ref_pose.to_local(cam.t + s * ray));
      if (!r.in_front) return fallback();
      // Relative to the point's own reference projection so the centre stays on the feature.
      const Vec2 src = r.pixel - r0.pixel + Vec2(dh, dh);
      out.patch(x + h, y + h) = static_cast<std::uint8_t>(std::lround(sample_bilinear(d.patch, src.x(), src.y())));
    }
  return out;
}

}  // namespace ekfslam

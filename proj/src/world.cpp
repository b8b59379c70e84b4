#include "ekfslam/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/distributions/normal.hpp>

namespace ekfslam {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double to_unit(std::uint64_t h) { return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53; }

std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix(splitmix(splitmix(a) ^ b) ^ c);
}

// Pixel (u, v) maps to disc-plane coordinates a = a0 + num * A.w / N.w with
// w = (u, v, 1), and likewise b.
struct Disc {
  const WorldPoint* p;
  double depth;
  int x0, x1, y0, y1;
  Vec2 offset;
  Eigen::RowVector3d n_row{Eigen::RowVector3d::Zero()}, a_row{Eigen::RowVector3d::Zero()},
      b_row{Eigen::RowVector3d::Zero()};
  double a0{0}, b0{0}, num{0};
  double footprint{0};  ///< bound on the plane extent of one pixel, 0 = always supersample
};

// Standard normal quantiles at the midpoints of 2^16 equal-probability bins.
const std::vector<double>& gaussian_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(1u << 16);
    const boost::math::normal_distribution<double> n01;
    for (std::size_t i = 0; i < t.size(); ++i)
      t[i] = boost::math::quantile(n01, (static_cast<double>(i) + 0.5) / static_cast<double>(t.size()));
    return t;
  }();
  return table;
}

}  // namespace

WorldModel make_world(const WorldSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  WorldModel w;
  const double hx = spec.room.x() / 2, hy = spec.room.y() / 2;
  w.lower = {-hx, -hy, 0.0};
  w.upper = {hx, hy, spec.room.z()};
  const Vec3 centre(0.0, 0.0, spec.room.z() / 2);
  const double margin = 0.2;
  const double perimeter = 2 * (spec.room.x() + spec.room.y());
  for (int i = 0; i < spec.points; ++i) {
    WorldPoint p;
    p.id = i;
    p.radius = spec.disc_radius;
    double s = u01(rng) * perimeter;
    const double z = margin + u01(rng) * (spec.room.z() - 2 * margin);
    const double depth_in = u01(rng) * spec.relief;
    Vec3 pos, inward;
    if (s < spec.room.x()) {
      pos = {-hx + std::clamp(s, margin, spec.room.x() - margin), -hy, z};
      inward = Vec3::UnitY();
    } else if ((s -= spec.room.x()) < spec.room.y()) {
      pos = {hx, -hy + std::clamp(s, margin, spec.room.y() - margin), z};
      inward = -Vec3::UnitX();
    } else if ((s -= spec.room.y()) < spec.room.x()) {
      pos = {hx - std::clamp(s, margin, spec.room.x() - margin), hy, z};
      inward = -Vec3::UnitY();
    } else {
      s -= spec.room.x();
      pos = {-hx, hy - std::clamp(s, margin, spec.room.y() - margin), z};
      inward = Vec3::UnitX();
    }
    p.position = pos + depth_in * inward;
    p.normal = (centre - p.position).normalized();
    const Vec3 helper = std::abs(p.normal.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
    const Vec3 a = helper.cross(p.normal).normalized();
    const Vec3 b = p.normal.cross(a);
    const double ang = u01(rng) * std::numbers::pi;
    p.e1 = std::cos(ang) * a + std::sin(ang) * b;
    p.e2 = p.normal.cross(p.e1);
    // Dark and bright quadrants alternate around the junction.
    for (int q = 0; q < 4; ++q) {
      const bool bright = (q == 1 || q == 2);
      p.levels[q] = static_cast<std::uint8_t>(bright ? 165 + u01(rng) * 75 : 15 + u01(rng) * 75);
    }
    w.points.push_back(p);
  }
  return w;
}

namespace {

RenderedFrame render(const WorldModel& world, const Frame& cam, const PinholeIntrinsics& k, const RenderOptions& opt,
                     bool parallel) {
  RenderedFrame out;
  const int W = k.width, H = k.height;
  std::vector<Disc> discs;
  const Mat3 rc = cam.q.rotation_matrix();
  for (const auto& p : world.points) {
    const Vec3 pc = cam.to_local(p.position);
    if (pc.z() < 0.05) continue;
    if (p.normal.dot(cam.t - p.position) <= 0) continue;
    const Projection pr = pinhole_project(k, pc);
    if (!pr.in_front) continue;
    PointLabel lab{p.id, pr.pixel, pc.z(), false, Vec2::Zero()};
    const std::uint64_t h = mix(opt.seed, static_cast<std::uint64_t>(opt.frame), static_cast<std::uint64_t>(p.id));
    if (opt.outlier_fraction > 0 && to_unit(h) < opt.outlier_fraction) {
      const double mag = opt.outlier_offset_min + to_unit(splitmix(h)) * (opt.outlier_offset_max - opt.outlier_offset_min);
      const double ang = 2 * std::numbers::pi * to_unit(splitmix(splitmix(h)));
      lab.outlier = true;
      lab.offset = {mag * std::cos(ang), mag * std::sin(ang)};
    }
    const Vec2 c = pr.pixel + lab.offset;
    const double r = std::max(k.fu, k.fv) * p.radius / std::max(pc.z() - p.radius, 0.01) + 2.0;
    Disc d{&p, pc.z(), std::max(0, static_cast<int>(std::floor(c.x() - r))),
           std::min(W - 1, static_cast<int>(std::ceil(c.x() + r))), std::max(0, static_cast<int>(std::floor(c.y() - r))),
           std::min(H - 1, static_cast<int>(std::ceil(c.y() + r))), lab.offset};
    Mat3 kinv = Mat3::Identity();
    kinv(0, 0) = 1.0 / k.fu;
    kinv(1, 1) = 1.0 / k.fv;
    kinv(0, 2) = -(k.u0 + lab.offset.x()) / k.fu;
    kinv(1, 2) = -(k.v0 + lab.offset.y()) / k.fv;
    const Mat3 m = rc * kinv;
    d.n_row = p.normal.transpose() * m;
    d.a_row = p.e1.transpose() * m;
    d.b_row = p.e2.transpose() * m;
    d.a0 = p.e1.dot(cam.t - p.position);
    d.b0 = p.e2.dot(cam.t - p.position);
    d.num = p.normal.dot(p.position - cam.t);
    const double dist = (p.position - cam.t).norm();
    const double cosine = std::abs(d.num) / dist;
    d.footprint = cosine > 0.2 ? 1.5 * (dist + p.radius) / (std::min(k.fu, k.fv) * cosine) : 0.0;
    if (d.x0 > d.x1 || d.y0 > d.y1) continue;
    discs.push_back(d);
    if (k.contains(pr.pixel)) out.labels.push_back(lab);
  }
  std::sort(discs.begin(), discs.end(), [](const Disc& a, const Disc& b) { return a.depth > b.depth; });

  out.image = GrayImage(W, H);
  const std::vector<double>& noise = gaussian_table();
  const std::uint64_t noise_key = mix(opt.seed ^ 0xA5A5A5A5ull, static_cast<std::uint64_t>(opt.frame), 0);
  const int ss = std::max(1, opt.supersample);
  const double inv = 1.0 / (ss * ss);
#pragma omp parallel for schedule(dynamic, 8) if (parallel)
  for (int y = 0; y < H; ++y) {
    std::vector<double> row(W, static_cast<double>(opt.background));
    for (const Disc& d : discs) {
      if (y < d.y0 || y > d.y1) continue;
      const WorldPoint& p = *d.p;
      const double r2 = p.radius * p.radius;
      for (int x = d.x0; x <= d.x1; ++x) {
        double cover = 0.0, value = 0.0;
        if (d.footprint > 0) {
          const Eigen::Vector3d w(x, y, 1.0);
          const double s = d.num / d.n_row.dot(w);
          const double a = d.a0 + s * d.a_row.dot(w), b = d.b0 + s * d.b_row.dot(w);
          const double rr = std::sqrt(a * a + b * b);
          if (s > 0 && rr >= p.radius + d.footprint) continue;
          if (s > 0 && rr <= p.radius - d.footprint && std::abs(a) > d.footprint && std::abs(b) > d.footprint) {
            row[x] = p.levels[(a >= 0 ? 1 : 0) + (b >= 0 ? 2 : 0)];
            continue;
          }
        }
        for (int sy = 0; sy < ss; ++sy)
          for (int sx = 0; sx < ss; ++sx) {
            const Eigen::Vector3d w(x + (sx + 0.5) / ss - 0.5, y + (sy + 0.5) / ss - 0.5, 1.0);
            const double den = d.n_row.dot(w);
            if (std::abs(den) < 1e-12) continue;
            const double s = d.num / den;
            if (s <= 0) continue;
            const double a = d.a0 + s * d.a_row.dot(w), b = d.b0 + s * d.b_row.dot(w);
            if (a * a + b * b >= r2) continue;
            cover += 1.0;
            value += p.levels[(a >= 0 ? 1 : 0) + (b >= 0 ? 2 : 0)];
          }
        if (cover > 0) row[x] = row[x] * (1.0 - cover * inv) + value * inv;
      }
    }
    std::uint8_t* dst = out.image.row(y);
    for (int x = 0; x < W; ++x) {
      double n = 0.0;
      if (opt.noise_sigma > 0) {
        const std::uint64_t h = splitmix(noise_key + static_cast<std::uint64_t>(y) * W + x);
        n = opt.noise_sigma * noise[h >> 48];
      }
      dst[x] = static_cast<std::uint8_t>(std::clamp(std::lround(row[x] + n), 0L, 255L));
    }
  }
  return out;
}

}  // namespace

RenderedFrame render_frame(const WorldModel& world, const Frame& cam, const PinholeIntrinsics& k,
                           const RenderOptions& opt) {
  return render(world, cam, k, opt, true);
}

RenderedFrame render_frame_serial(const WorldModel& world, const Frame& cam, const PinholeIntrinsics& k,
                                  const RenderOptions& opt) {
  return render(world, cam, k, opt, false);
}

int nearest_label(const std::vector<PointLabel>& labels, const Vec2& px, double radius) {
  int best = -1;
  double best_d = radius;
  for (const auto& l : labels) {
    const double d = (l.pixel + l.offset - px).norm();
    if (d <= best_d) {
      best_d = d;
      best = l.point;
    }
  }
  return best;
}

bool used_displaced_blob(const PointLabel& l, const Vec2& z) {
  return l.outlier && (z - l.pixel - l.offset).norm() < (z - l.pixel).norm();
}

}  // namespace ekfslam

#pragma once

#include "ekfslam/geometry.hpp"
#include "ekfslam/image.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace ekfslam {

/// Planar textured disc carrying an X-junction at its centre.
struct WorldPoint {
  int id{0};
  Vec3 position{Vec3::Zero()};
  Vec3 normal{Vec3::UnitX()};
  Vec3 e1{Vec3::UnitY()};  ///< in-plane texture axes
  Vec3 e2{Vec3::UnitZ()};
  std::array<std::uint8_t, 4> levels{};
  double radius{0.08};
};

struct WorldSpec {
  int points{200};
  Vec3 room{6.0, 6.0, 3.0};  ///< room centred on the origin in x/y, floor at z = 0
  double relief{0.5};
  double disc_radius{0.08};
};

struct WorldModel {
  std::vector<WorldPoint> points;
  Vec3 lower{Vec3::Zero()};
  Vec3 upper{Vec3::Zero()};
};

WorldModel make_world(const WorldSpec& spec, std::uint64_t seed);

struct RenderOptions {
  double noise_sigma{2.0};
  double outlier_fraction{0.0};
  double outlier_offset_min{4.0};
  double outlier_offset_max{10.0};
  std::uint64_t seed{0};
  long frame{0};
  int background{128};
  int supersample{3};
};

struct PointLabel {
  int point{0};
  Vec2 pixel{Vec2::Zero()};  ///< exact projection of the point
  double depth{0.0};
  bool outlier{false};
  Vec2 offset{Vec2::Zero()};  ///< displacement applied to the rendered blob
};

struct RenderedFrame {
  GrayImage image;
  std::vector<PointLabel> labels;
};

/// Renders every visible disc (far to near) on a uniform background, then
/// adds pixel noise. Outlier blobs are drawn displaced by a random offset.
RenderedFrame render_frame(const WorldModel& world, const Frame& cam, const PinholeIntrinsics& k,
                           const RenderOptions& opt);

/// Same image, rows rendered serially; used to check the parallel path.
RenderedFrame render_frame_serial(const WorldModel& world, const Frame& cam, const PinholeIntrinsics& k,
                                  const RenderOptions& opt);

/// Label of the world point whose projection is nearest to `px`, within `radius`.
int nearest_label(const std::vector<PointLabel>& labels, const Vec2& px, double radius);

/// Whether a measurement of a displaced point lies nearer the drawn blob
/// than the point's true projection.
bool used_displaced_blob(const PointLabel& l, const Vec2& z);

}  // namespace ekfslam

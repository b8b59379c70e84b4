#pragma once

#include "ekfslam/config.hpp"
#include "ekfslam/motion.hpp"
#include "ekfslam/trajectory.hpp"
#include "ekfslam/world.hpp"

#include <filesystem>
#include <memory>
#include <vector>

namespace ekfslam {

/// Produces the image and labels of camera frame k.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual int frame_count() const = 0;
  virtual RenderedFrame frame(int k) const = 0;
};

class SyntheticFrames : public FrameSource {
 public:
  SyntheticFrames(WorldModel world, const GroundTruth& gt, PinholeIntrinsics k, const Frame& extrinsic,
                  RenderOptions opt);
  int frame_count() const override { return static_cast<int>(cameras_.size()); }
  RenderedFrame frame(int k) const override;
  const WorldModel& world() const { return world_; }

 private:
  WorldModel world_;
  std::vector<Frame> cameras_;
  PinholeIntrinsics k_;
  RenderOptions opt_;
};

class RecordedFrames : public FrameSource {
 public:
  explicit RecordedFrames(std::filesystem::path dir);
  int frame_count() const override { return static_cast<int>(files_.size()); }
  RenderedFrame frame(int k) const override;

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
  std::vector<std::vector<PointLabel>> labels_;
};

/// Everything a run consumes.
struct Sequence {
  ExperimentConfig config;
  GroundTruth truth;
  std::vector<ImuSample> imu;
  Vec3 acc_bias{Vec3::Zero()};
  Vec3 gyro_bias{Vec3::Zero()};
  std::unique_ptr<FrameSource> frames;
};

PinholeIntrinsics intrinsics_from(const ExperimentConfig& c);
/// Camera mounted looking along body x, image x to body -y, image y to body -z.
Frame camera_extrinsic(const ExperimentConfig& c);
TrajectorySpec trajectory_spec(const ExperimentConfig& c);

/// Independent sub-seeds of one run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

Sequence make_synthetic_sequence(const ExperimentConfig& c);

/// Writes config.txt, groundtruth.csv, imu.csv, frames.csv, labels.csv and
/// images/NNNNNN.pgm. Doubles are written in shortest round-trip form.
void write_dataset(const std::filesystem::path& dir, const Sequence& s);
Sequence read_dataset(const std::filesystem::path& dir);

}  // namespace ekfslam

#include "ekfslam/config.hpp"
#include "ekfslam/dataset.hpp"
#include "ekfslam/experiment.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <sstream>

#include <unistd.h>

using namespace ekfslam;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ekfslam_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

void expect_same_run(const RunMetrics& a, const RunMetrics& b) {
  ASSERT_EQ(a.frames.size(), b.frames.size());
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    const FrameMetrics& x = a.frames[i];
    const FrameMetrics& y = b.frames[i];
    for (int j = 0; j < 3; ++j) {
      EXPECT_TRUE(same_bits(x.est_position(j), y.est_position(j))) << i;
      EXPECT_TRUE(same_bits(x.pos_error(j), y.pos_error(j))) << i;
      EXPECT_TRUE(same_bits(x.ang_error(j), y.ang_error(j))) << i;
      EXPECT_TRUE(same_bits(x.pos_sigma(j), y.pos_sigma(j))) << i;
      EXPECT_TRUE(same_bits(x.ang_sigma(j), y.ang_sigma(j))) << i;
    }
    EXPECT_TRUE(same_bits(x.nees, y.nees)) << i;
    EXPECT_EQ(x.landmarks, y.landmarks);
    EXPECT_EQ(x.matched, y.matched);
    EXPECT_EQ(x.corrected, y.corrected);
    EXPECT_EQ(x.created, y.created);
    EXPECT_EQ(x.converted, y.converted);
    EXPECT_EQ(x.outliers, y.outliers);
  }
  EXPECT_TRUE(same_bits(a.rmse_position, b.rmse_position));
  EXPECT_EQ(a.diverged, b.diverged);
}

}  // namespace

TEST(Config, ParseAndWriteRoundTrip) {
  std::istringstream in(
      "# comment\n"
      "mode = cv\n"
      "seed=42\n"
      "\n"
      "duration = 12.5\n"
      "ransac = false\n"
      "ranking = trace\n"
      "dynamics = high\n");
  const ExperimentConfig c = parse_config(in);
  EXPECT_EQ(c.mode, "cv");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.duration, 12.5);
  EXPECT_FALSE(c.ransac);
  EXPECT_EQ(c.ranking, "trace");
  EXPECT_EQ(c.dynamics, "high");
  EXPECT_EQ(c.fu, ExperimentConfig{}.fu);

  std::ostringstream out;
  write_config(out, c);
  std::istringstream back(out.str());
  const ExperimentConfig d = parse_config(back);
  std::ostringstream again;
  write_config(again, d);
  EXPECT_EQ(out.str(), again.str());
  for (const std::string& k : c.keys()) EXPECT_NE(out.str().find(k + " = "), std::string::npos) << k;
}

TEST(Config, RejectsBadInput) {
  ExperimentConfig c;
  EXPECT_THROW(set_config_value(c, "no_such_key", "1"), ConfigError);
  EXPECT_THROW(set_config_value(c, "seed", "abc"), ConfigError);
  EXPECT_THROW(set_config_value(c, "duration", "1.5x"), ConfigError);
  EXPECT_THROW(set_config_value(c, "ransac", "maybe"), ConfigError);
  std::istringstream missing_eq("duration 5\n");
  EXPECT_THROW(parse_config(missing_eq), ConfigError);
  c = {};
  c.mode = "stereo";
  EXPECT_ANY_THROW(c.validate());
  c = {};
  c.imu_rate = 70;
  EXPECT_ANY_THROW(c.validate());
  EXPECT_NO_THROW(ExperimentConfig{}.validate());
}

TEST(Dataset, DerivedSeedsAreDistinct) {
  EXPECT_NE(derive_seed(1, 1), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 1), derive_seed(2, 1));
  EXPECT_EQ(derive_seed(5, 3), derive_seed(5, 3));
}

TEST(Dataset, WriteReadReplayIsBitIdentical) {
  ExperimentConfig c;
  c.duration = 2.0;
  c.outlier_fraction = 0.1;
  const fs::path dir = scratch("dataset");
  const Sequence live = make_synthetic_sequence(c);
  write_dataset(dir, live);
  for (const char* f : {"config.txt", "groundtruth.csv", "imu.csv", "frames.csv", "labels.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;

  const Sequence replay = read_dataset(dir);
  ASSERT_EQ(replay.imu.size(), live.imu.size());
  for (std::size_t i = 0; i < live.imu.size(); ++i) {
    for (int j = 0; j < 3; ++j) {
      ASSERT_TRUE(same_bits(replay.imu[i].acc(j), live.imu[i].acc(j)));
      ASSERT_TRUE(same_bits(replay.imu[i].gyro(j), live.imu[i].gyro(j)));
    }
    ASSERT_EQ(replay.imu[i].saturated, live.imu[i].saturated);
  }
  ASSERT_EQ(replay.frames->frame_count(), live.frames->frame_count());
  for (int k : {0, 37, live.frames->frame_count() - 1}) {
    const RenderedFrame a = live.frames->frame(k), b = replay.frames->frame(k);
    EXPECT_TRUE(a.image == b.image) << k;
    ASSERT_EQ(a.labels.size(), b.labels.size());
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
      EXPECT_EQ(a.labels[i].point, b.labels[i].point);
      EXPECT_TRUE(same_bits(a.labels[i].pixel.x(), b.labels[i].pixel.x()));
      EXPECT_EQ(a.labels[i].outlier, b.labels[i].outlier);
    }
  }

  const RunMetrics m1 = run_slam(live);
  const RunMetrics m2 = run_slam(replay);
  expect_same_run(m1, m2);
  fs::remove_all(dir);
}

TEST(Dataset, MissingFilesAreReported) {
  const fs::path dir = scratch("missing");
  EXPECT_ANY_THROW(read_dataset(dir));
  fs::remove_all(dir);
}

TEST(RunCsv, MetricsRoundTripThroughScore) {
  ExperimentConfig c;
  c.duration = 1.0;
  const RunMetrics m = run_experiment(c);
  const fs::path dir = scratch("runcsv");
  write_run(dir, m);
  RunMetrics back = read_run_csv(dir / "metrics.csv", dir / "trajectory.csv");
  summarize(back, c);
  ASSERT_EQ(back.frames.size(), m.frames.size());
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    EXPECT_NEAR(back.frames[i].pos_error.norm(), m.frames[i].pos_error.norm(), 1e-12);
    EXPECT_NEAR(back.frames[i].nees, m.frames[i].nees, 1e-9 * (1 + m.frames[i].nees));
  }
  EXPECT_NEAR(back.rmse_position, m.rmse_position, 1e-12);
  EXPECT_EQ(back.seed, m.seed);
  EXPECT_EQ(back.mode, m.mode);
  EXPECT_NEAR(back.fraction_nees_below, m.fraction_nees_below, 1e-12);
  fs::remove_all(dir);
}

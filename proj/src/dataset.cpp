#include "ekfslam/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ekfslam {

namespace {

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s) {
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw std::runtime_error("dataset: bad number '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  return out;
}

// Reads a CSV with a header line; checks the column count of every row.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p, std::size_t columns) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("dataset: cannot open " + p.string());
  std::string line;
  std::getline(in, line);
  if (split(line).size() != columns) throw std::runtime_error("dataset: unexpected header in " + p.string());
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto r = split(line);
    if (r.size() != columns) throw std::runtime_error("dataset: malformed row in " + p.string());
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string image_name(int k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d.pgm", k);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("dataset: cannot write " + p.string());
  return os;
}

}  // namespace

SyntheticFrames::SyntheticFrames(WorldModel world, const GroundTruth& gt, PinholeIntrinsics k, const Frame& extrinsic,
                                 RenderOptions opt)
    : world_(std::move(world)), k_(k), opt_(opt) {
  for (int i = 0; i < gt.frame_count(); ++i) {
    const TruthSample& s = gt.frame(i);
    cameras_.push_back(Frame{s.p, s.q}.compose(extrinsic));
  }
}

RenderedFrame SyntheticFrames::frame(int k) const {
  RenderOptions o = opt_;
  o.frame = k;
  return render_frame(world_, cameras_.at(k), k_, o);
}

RecordedFrames::RecordedFrames(std::filesystem::path dir) : dir_(std::move(dir)) {
  const auto frames = read_csv(dir_ / "frames.csv", 3);
  for (const auto& r : frames) files_.push_back(r[2]);
  labels_.resize(files_.size());
  for (const auto& r : read_csv(dir_ / "labels.csv", 8)) {
    const std::size_t k = static_cast<std::size_t>(std::stol(r[0]));
    if (k >= labels_.size()) throw std::runtime_error("dataset: label for an unknown frame");
    PointLabel l;
    l.point = std::stoi(r[1]);
    l.pixel = {parse_double(r[2]), parse_double(r[3])};
    l.depth = parse_double(r[4]);
    l.outlier = r[5] == "1";
    l.offset = {parse_double(r[6]), parse_double(r[7])};
    labels_[k].push_back(l);
  }
}

RenderedFrame RecordedFrames::frame(int k) const {
  RenderedFrame f;
  f.image = read_pgm(dir_ / "images" / files_.at(k));
  f.labels = labels_.at(k);
  return f;
}

PinholeIntrinsics intrinsics_from(const ExperimentConfig& c) {
  PinholeIntrinsics k{c.fu, c.fv, c.u0, c.v0, c.width, c.height};
  k.validate();
  return k;
}

Frame camera_extrinsic(const ExperimentConfig& c) {
  Mat3 r;
  r << 0, 0, 1, -1, 0, 0, 0, -1, 0;
  const Eigen::Quaterniond q(r);
  return {Vec3(c.extrinsic_x, c.extrinsic_y, c.extrinsic_z), Quaternion{q.w(), q.x(), q.y(), q.z()}};
}

TrajectorySpec trajectory_spec(const ExperimentConfig& c) {
  TrajectorySpec s;
  s.dynamics = c.dynamics == "high" ? Dynamics::High : Dynamics::Low;
  s.duration = c.duration;
  s.camera_rate = c.camera_rate;
  s.imu_rate = c.imu_rate;
  s.burst_time = c.burst_time;
  s.burst_duration = c.burst_duration;
  s.centre = {0.0, 0.0, c.room_z / 2};
  return s;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x5eedu};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Sequence make_synthetic_sequence(const ExperimentConfig& c) {
  c.validate();
  Sequence s;
  s.config = c;
  s.truth = generate_trajectory(trajectory_spec(c), derive_seed(c.seed, 1));
  s.truth.sigma_pos = c.truth_sigma_pos;
  s.truth.sigma_ang = c.truth_sigma_ang_deg * std::numbers::pi / 180.0;

  std::mt19937_64 rng(derive_seed(c.seed, 2));
  std::normal_distribution<double> n01;
  for (int i = 0; i < 3; ++i) s.acc_bias(i) = c.acc_bias_sigma * n01(rng);
  for (int i = 0; i < 3; ++i) s.gyro_bias(i) = c.gyro_bias_sigma * n01(rng);

  {
    ImuSimSpec is;
    is.acc_psd = c.acc_psd * c.imu_noise_scale * c.imu_noise_scale;
    is.gyro_psd = c.gyro_psd * c.imu_noise_scale * c.imu_noise_scale;
    is.acc_bias = s.acc_bias;
    is.gyro_bias = s.gyro_bias;
    is.rate_limit = c.gyro_limit_deg * std::numbers::pi / 180.0;
    is.clip = c.saturation;
    s.imu = synth_imu(s.truth, is, derive_seed(c.seed, 3));
  }

  WorldSpec ws;
  ws.points = c.world_points;
  ws.room = {c.room_x, c.room_y, c.room_z};
  ws.relief = c.relief;
  ws.disc_radius = c.disc_radius;
  RenderOptions ro;
  ro.noise_sigma = c.image_noise;
  ro.outlier_fraction = c.outlier_fraction;
  ro.outlier_offset_min = c.outlier_offset_min;
  ro.outlier_offset_max = c.outlier_offset_max;
  ro.seed = derive_seed(c.seed, 4);
  s.frames = std::make_unique<SyntheticFrames>(make_world(ws, derive_seed(c.seed, 5)), s.truth, intrinsics_from(c),
                                               camera_extrinsic(c), ro);
  return s;
}

void write_dataset(const std::filesystem::path& dir, const Sequence& s) {
  std::filesystem::create_directories(dir / "images");
  {
    auto os = open_out(dir / "config.txt");
    write_config(os, s.config);
  }
  {
    auto os = open_out(dir / "groundtruth.csv");
    os << "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz\n";
    for (const auto& g : s.truth.samples)
      os << num(g.t) << ',' << num(g.p.x()) << ',' << num(g.p.y()) << ',' << num(g.p.z()) << ',' << num(g.q.w) << ','
         << num(g.q.x) << ',' << num(g.q.y) << ',' << num(g.q.z) << ',' << num(g.v.x()) << ',' << num(g.v.y()) << ','
         << num(g.v.z()) << '\n';
  }
  {
    auto os = open_out(dir / "imu.csv");
    os << "t,dt,ax,ay,az,gx,gy,gz,sat_x,sat_y,sat_z\n";
    for (const auto& u : s.imu)
      os << num(u.t) << ',' << num(u.dt) << ',' << num(u.acc.x()) << ',' << num(u.acc.y()) << ',' << num(u.acc.z())
         << ',' << num(u.gyro.x()) << ',' << num(u.gyro.y()) << ',' << num(u.gyro.z()) << ',' << u.saturated[0] << ','
         << u.saturated[1] << ',' << u.saturated[2] << '\n';
  }
  auto frames = open_out(dir / "frames.csv");
  auto labels = open_out(dir / "labels.csv");
  frames << "frame,t,image\n";
  labels << "frame,point,u,v,depth,outlier,du,dv\n";
  for (int k = 0; k < s.frames->frame_count(); ++k) {
    const RenderedFrame f = s.frames->frame(k);
    const std::string name = image_name(k);
    write_pgm(dir / "images" / name, f.image);
    frames << k << ',' << num(s.truth.frame(k).t) << ',' << name << '\n';
    for (const auto& l : f.labels)
      labels << k << ',' << l.point << ',' << num(l.pixel.x()) << ',' << num(l.pixel.y()) << ',' << num(l.depth) << ','
             << (l.outlier ? 1 : 0) << ',' << num(l.offset.x()) << ',' << num(l.offset.y()) << '\n';
  }
}

Sequence read_dataset(const std::filesystem::path& dir) {
  Sequence s;
  s.config = load_config(dir / "config.txt");
  const TrajectorySpec spec = trajectory_spec(s.config);
  s.truth.imu_dt = 1.0 / spec.imu_rate;
  s.truth.imu_per_frame = spec.imu_per_frame();
  s.truth.sigma_pos = s.config.truth_sigma_pos;
  s.truth.sigma_ang = s.config.truth_sigma_ang_deg * std::numbers::pi / 180.0;
  for (const auto& r : read_csv(dir / "groundtruth.csv", 11)) {
    TruthSample g;
    g.t = parse_double(r[0]);
    g.p = {parse_double(r[1]), parse_double(r[2]), parse_double(r[3])};
    g.q = {parse_double(r[4]), parse_double(r[5]), parse_double(r[6]), parse_double(r[7])};
    g.v = {parse_double(r[8]), parse_double(r[9]), parse_double(r[10])};
    if (!s.truth.samples.empty() && !(g.t > s.truth.samples.back().t))
      throw std::runtime_error("dataset: ground-truth timestamps not increasing");
    s.truth.samples.push_back(g);
  }
  for (const auto& r : read_csv(dir / "imu.csv", 11)) {
    ImuSample u;
    u.t = parse_double(r[0]);
    u.dt = parse_double(r[1]);
    u.acc = {parse_double(r[2]), parse_double(r[3]), parse_double(r[4])};
    u.gyro = {parse_double(r[5]), parse_double(r[6]), parse_double(r[7])};
    for (int i = 0; i < 3; ++i) u.saturated[i] = r[8 + i] == "1";
    s.imu.push_back(u);
  }
  auto frames = std::make_unique<RecordedFrames>(dir);
  if (frames->frame_count() != s.truth.frame_count() || s.imu.size() + 1 != s.truth.samples.size())
    throw std::runtime_error("dataset: frame, IMU and ground-truth counts disagree");
  s.frames = std::move(frames);
  return s;
}

}  // namespace ekfslam

#include "ekfslam/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace ekfslam {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;
constexpr double kRampTime = 2.0;
constexpr double kBurstRamp = 0.4;

// Value and first two derivatives of a scalar signal.
struct Jet {
  double f{0}, d1{0}, d2{0};
  Jet operator+(const Jet& o) const { return {f + o.f, d1 + o.d1, d2 + o.d2}; }
  Jet operator*(const Jet& o) const { return {f * o.f, d1 * o.f + f * o.d1, d2 * o.f + 2 * d1 * o.d1 + f * o.d2}; }
};

Jet sine(double amp, double omega, double phase, double t) {
  const double s = std::sin(omega * t + phase), c = std::cos(omega * t + phase);
  return {amp * s, amp * omega * c, -amp * omega * omega * s};
}

// Quintic smoothstep from 0 to 1 over [t0, t0 + len].
Jet smoothstep(double t, double t0, double len) {
  const double x = (t - t0) / len;
  if (x <= 0) return {0, 0, 0};
  if (x >= 1) return {1, 0, 0};
  return {x * x * x * (10 - 15 * x + 6 * x * x), 30 * x * x * (1 - x) * (1 - x) / len,
          60 * x * (1 - x) * (1 - 2 * x) / (len * len)};
}

struct Harmonic {
  double amp, omega, phase;
};

struct Profile {
  std::array<std::vector<Harmonic>, 3> pos;
  std::array<std::vector<Harmonic>, 3> ang;  // yaw, pitch, roll
  double yaw0{0};
  bool burst{false};
  double burst_t0{0}, burst_len{0};
  double burst_yaw_amp{0}, burst_y_amp{0}, burst_omega{0};
};

Jet eval(const std::vector<Harmonic>& hs, double t) {
  Jet j;
  for (const auto& h : hs) j = j + sine(h.amp, h.omega, h.phase, t);
  return j;
}

Jet burst_envelope(const Profile& pr, double t) {
  const Jet up = smoothstep(t, pr.burst_t0, kBurstRamp);
  const Jet down = smoothstep(t, pr.burst_t0 + pr.burst_len - kBurstRamp, kBurstRamp);
  return {up.f - down.f, up.d1 - down.d1, up.d2 - down.d2};
}

struct Kinematics {
  Vec3 p, v, a;
  Jet yaw, pitch, roll;
};

Kinematics evaluate(const Profile& pr, const Vec3& centre, double t) {
  const Jet ramp = smoothstep(t, 0.0, kRampTime);
  Kinematics k;
  std::array<Jet, 3> pos;
  for (int i = 0; i < 3; ++i) pos[i] = ramp * eval(pr.pos[i], t);
  std::array<Jet, 3> ang;
  for (int i = 0; i < 3; ++i) ang[i] = ramp * eval(pr.ang[i], t);
  if (pr.burst) {
    const Jet env = burst_envelope(pr, t);
    const double tb = t - pr.burst_t0;
    ang[0] = ang[0] + env * sine(pr.burst_yaw_amp, pr.burst_omega, 0.0, tb);
    pos[1] = pos[1] + env * sine(pr.burst_y_amp, pr.burst_omega, 0.0, tb);
  }
  k.p = centre + Vec3(pos[0].f, pos[1].f, pos[2].f);
  k.v = {pos[0].d1, pos[1].d1, pos[2].d1};
  k.a = {pos[0].d2, pos[1].d2, pos[2].d2};
  k.yaw = ang[0];
  k.yaw.f += pr.yaw0;
  k.pitch = ang[1];
  k.roll = ang[2];
  return k;
}

Vec3 body_rate(const Kinematics& k) {
  const double sp = std::sin(k.pitch.f), cp = std::cos(k.pitch.f);
  const double sr = std::sin(k.roll.f), cr = std::cos(k.roll.f);
  return {k.roll.d1 - k.yaw.d1 * sp, k.pitch.d1 * cr + k.yaw.d1 * cp * sr, -k.pitch.d1 * sr + k.yaw.d1 * cp * cr};
}

Profile make_profile(const TrajectorySpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto jitter = [&](double v) { return v * (0.8 + 0.4 * u01(rng)); };
  auto phase = [&]() { return 2 * kPi * u01(rng); };
  Profile pr;
  const double hz = 2 * kPi;
  pr.pos[0] = {{jitter(0.35), jitter(0.15) * hz, phase()}, {jitter(0.1), jitter(0.31) * hz, phase()}};
  pr.pos[1] = {{jitter(0.35), jitter(0.12) * hz, phase()}, {jitter(0.1), jitter(0.27) * hz, phase()}};
  pr.pos[2] = {{jitter(0.12), jitter(0.2) * hz, phase()}};
  pr.ang[0] = {{jitter(25 * kDeg), jitter(0.1) * hz, phase()}, {jitter(8 * kDeg), jitter(0.23) * hz, phase()}};
  pr.ang[1] = {{jitter(5 * kDeg), jitter(0.17) * hz, phase()}};
  pr.ang[2] = {{jitter(3 * kDeg), jitter(0.21) * hz, phase()}};
  pr.yaw0 = phase();
  if (spec.dynamics == Dynamics::High) {
    pr.burst = true;
    pr.burst_t0 = spec.burst_time;
    pr.burst_len = spec.burst_duration;
    pr.burst_omega = 2.0 * hz;
    pr.burst_yaw_amp = 420.0 * kDeg / pr.burst_omega;
    pr.burst_y_amp = 0.2;
  }
  return pr;
}

}  // namespace

void TrajectorySpec::validate() const {
  if (!(duration > 0 && camera_rate > 0 && imu_rate > 0)) throw std::invalid_argument("rates and duration must be positive");
  const double ratio = imu_rate / camera_rate;
  if (ratio < 1 || std::abs(ratio - std::round(ratio)) > 1e-9)
    throw std::invalid_argument("IMU rate must be an integer multiple of the camera rate");
  if (duration * camera_rate < 1) throw std::invalid_argument("trajectory shorter than one frame");
  if (dynamics == Dynamics::High &&
      (burst_time < kRampTime || burst_duration < 2 * kBurstRamp || burst_time + burst_duration > duration))
    throw std::invalid_argument("high-dynamics episode does not fit the trajectory");
}

int TrajectorySpec::imu_per_frame() const { return static_cast<int>(std::lround(imu_rate / camera_rate)); }

int GroundTruth::frame_count() const {
  return static_cast<int>((samples.size() - 1) / static_cast<std::size_t>(imu_per_frame)) + 1;
}

GroundTruth generate_trajectory(const TrajectorySpec& spec, std::uint64_t seed) {
  spec.validate();
  const Profile pr = make_profile(spec, seed);
  GroundTruth gt;
  gt.imu_dt = 1.0 / spec.imu_rate;
  gt.imu_per_frame = spec.imu_per_frame();
  const int frames = static_cast<int>(std::floor(spec.duration * spec.camera_rate + 1e-9));
  const int n = frames * gt.imu_per_frame + 1;
  gt.samples.resize(n);
  for (int i = 0; i < n; ++i) {
    const double t = i * gt.imu_dt;
    const Kinematics k = evaluate(pr, spec.centre, t);
    TruthSample& s = gt.samples[i];
    s.t = t;
    s.p = k.p;
    s.v = k.v;
    s.a = k.a;
    s.q = quat_from_euler(k.roll.f, k.pitch.f, k.yaw.f);
    s.w_body = body_rate(k);
  }
  return gt;
}

DynamicsSummary summarize_dynamics(const GroundTruth& gt) {
  DynamicsSummary d;
  const auto& s = gt.samples;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Vec3 w_world = quat_rotate(s[i].q, s[i].w_body);
    d.peak_yaw_rate_deg = std::max(d.peak_yaw_rate_deg, std::abs(w_world.z()) / kDeg);
    d.peak_angular_rate_deg = std::max(d.peak_angular_rate_deg, s[i].w_body.norm() / kDeg);
    d.peak_linear_acc_g = std::max(d.peak_linear_acc_g, s[i].a.norm() / 9.81);
    if (i > 0 && i + 1 < s.size()) {
      const Vec3 alpha = (s[i + 1].w_body - s[i - 1].w_body) / (s[i + 1].t - s[i - 1].t);
      d.peak_angular_acc_deg = std::max(d.peak_angular_acc_deg, alpha.norm() / kDeg);
    }
  }
  return d;
}

std::vector<ImuSample> synth_imu(const GroundTruth& gt, const ImuSimSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const double dt = gt.imu_dt;
  const double sa = std::sqrt(spec.acc_psd / dt), sg = std::sqrt(spec.gyro_psd / dt);
  std::vector<ImuSample> out;
  out.reserve(gt.samples.size());
  for (std::size_t k = 0; k + 1 < gt.samples.size(); ++k) {
    const TruthSample& a = gt.samples[k];
    const TruthSample& b = gt.samples[k + 1];
    ImuSample u;
    u.t = a.t;
    u.dt = dt;
    u.gyro = quat_to_rotation_vector(quat_product(a.q.conjugate(), b.q)) / dt + spec.gyro_bias;
    u.acc = quat_rotate_inverse(a.q, (b.v - a.v) / dt - spec.gravity) + spec.acc_bias;
    for (int i = 0; i < 3; ++i) {
      u.acc(i) += sa * n01(rng);
      u.gyro(i) += sg * n01(rng);
    }
    if (spec.clip)
      for (int i = 0; i < 3; ++i) u.gyro(i) = std::clamp(u.gyro(i), -spec.rate_limit, spec.rate_limit);
    flag_saturation(u, spec.rate_limit);
    out.push_back(u);
  }
  return out;
}

}  // namespace ekfslam

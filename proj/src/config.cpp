#include "ekfslam/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <variant>

namespace ekfslam {

namespace {

using Field = std::variant<std::string ExperimentConfig::*, std::uint64_t ExperimentConfig::*, int ExperimentConfig::*,
                           double ExperimentConfig::*, bool ExperimentConfig::*>;

struct Entry {
  const char* key;
  Field field;
};

#define EKF_FIELD(name) Entry{#name, &ExperimentConfig::name}

const std::vector<Entry>& table() {
  static const std::vector<Entry> t{
      EKF_FIELD(mode), EKF_FIELD(seed), EKF_FIELD(runs), EKF_FIELD(duration), EKF_FIELD(camera_rate),
      EKF_FIELD(imu_rate), EKF_FIELD(fu), EKF_FIELD(fv), EKF_FIELD(u0), EKF_FIELD(v0), EKF_FIELD(width),
      EKF_FIELD(height), EKF_FIELD(pixel_sigma), EKF_FIELD(extrinsic_x), EKF_FIELD(extrinsic_y),
      EKF_FIELD(extrinsic_z), EKF_FIELD(map_capacity), EKF_FIELD(rho0), EKF_FIELD(sigma_rho0), EKF_FIELD(patch_side),
      EKF_FIELD(linearity_threshold), EKF_FIELD(reparametrize), EKF_FIELD(min_corrections_for_conversion),
      EKF_FIELD(map_policy), EKF_FIELD(min_match_ratio), EKF_FIELD(max_consecutive_failures),
      EKF_FIELD(grace_frames), EKF_FIELD(max_landmarks), EKF_FIELD(ransac), EKF_FIELD(ransac_max_iterations),
      EKF_FIELD(ransac_probability), EKF_FIELD(strong_confidence), EKF_FIELD(gate_confidence),
      EKF_FIELD(search_sigma), EKF_FIELD(correction_budget), EKF_FIELD(time_budget_ms), EKF_FIELD(ranking),
      EKF_FIELD(grid_cols), EKF_FIELD(grid_rows), EKF_FIELD(max_detections), EKF_FIELD(harris_window),
      EKF_FIELD(harris_k), EKF_FIELD(harris_min_response), EKF_FIELD(zncc_threshold),
      EKF_FIELD(cv_linear_acc_psd), EKF_FIELD(cv_angular_acc_psd), EKF_FIELD(acc_psd), EKF_FIELD(gyro_psd),
      EKF_FIELD(acc_bias_psd), EKF_FIELD(gyro_bias_psd), EKF_FIELD(gyro_limit_deg), EKF_FIELD(saturation),
      EKF_FIELD(acc_bias_sigma), EKF_FIELD(gyro_bias_sigma), EKF_FIELD(imu_noise_scale), EKF_FIELD(init_pos_sigma),
      EKF_FIELD(init_ang_sigma_deg), EKF_FIELD(init_vel_sigma), EKF_FIELD(init_angvel_sigma),
      EKF_FIELD(init_acc_bias_sigma), EKF_FIELD(init_gyro_bias_sigma), EKF_FIELD(init_gravity_sigma),
      EKF_FIELD(world_points), EKF_FIELD(room_x), EKF_FIELD(room_y), EKF_FIELD(room_z), EKF_FIELD(relief),
      EKF_FIELD(disc_radius), EKF_FIELD(image_noise), EKF_FIELD(dynamics), EKF_FIELD(burst_time),
      EKF_FIELD(burst_duration), EKF_FIELD(outlier_fraction), EKF_FIELD(outlier_offset_min),
      EKF_FIELD(outlier_offset_max), EKF_FIELD(divergence_nees), EKF_FIELD(divergence_window),
      EKF_FIELD(truth_uncertainty), EKF_FIELD(truth_sigma_pos), EKF_FIELD(truth_sigma_ang_deg), EKF_FIELD(obs_log),
  };
  return t;
}

#undef EKF_FIELD

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("bad value for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

std::string format(const ExperimentConfig& c, const Field& f) {
  return std::visit(
      [&](auto member) -> std::string {
        const auto& v = c.*member;
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, std::string>) {
          return v;
        } else if constexpr (std::is_same_v<V, bool>) {
          return v ? "true" : "false";
        } else {
          char buf[64];
          const auto r = std::to_chars(buf, buf + sizeof buf, v);
          return std::string(buf, r.ptr);
        }
      },
      f);
}

}  // namespace

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  for (const auto& e : table()) {
    if (key != e.key) continue;
    std::visit(
        [&](auto member) {
          auto& v = c.*member;
          using V = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<V, std::string>) {
            v = value;
          } else if constexpr (std::is_same_v<V, bool>) {
            v = parse_bool(key, value);
          } else {
            v = parse_number<V>(key, value);
          }
        },
        e.field);
    return;
  }
  throw ConfigError("unknown config key: " + key);
}

std::vector<std::string> ExperimentConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& e : table()) out.emplace_back(e.key);
  return out;
}

void ExperimentConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  need(mode == "cv" || mode == "imu", "mode must be cv or imu");
  need(map_policy == "slam" || map_policy == "vo", "map_policy must be slam or vo");
  need(ranking == "det" || ranking == "trace", "ranking must be det or trace");
  need(dynamics == "low" || dynamics == "high", "dynamics must be low or high");
  need(runs > 0, "runs must be positive");
  need(duration > 0 && camera_rate > 0 && imu_rate > 0, "duration and rates must be positive");
  const double ratio = imu_rate / camera_rate;
  need(std::abs(ratio - std::round(ratio)) < 1e-9 && ratio >= 1, "imu_rate must be an integer multiple of camera_rate");
  need(fu > 0 && fv > 0 && width > 0 && height > 0 && u0 > 0 && u0 < width && v0 > 0 && v0 < height,
       "invalid camera intrinsics");
  need(pixel_sigma > 0, "pixel_sigma must be positive");
  need(patch_side > 0 && patch_side % 2 == 1, "patch_side must be odd");
  need(map_capacity > 0, "map_capacity must be positive");
  need(rho0 > 0 && sigma_rho0 > 0, "inverse-distance prior must be positive");
  need(strong_confidence > 0 && strong_confidence < gate_confidence && gate_confidence < 1,
       "confidences must satisfy 0 < strong < gate < 1");
  need(harris_window > 0 && harris_window % 2 == 1, "harris_window must be odd");
  need(zncc_threshold > -1 && zncc_threshold <= 1, "zncc_threshold must be in (-1, 1]");
  need(cv_linear_acc_psd >= 0 && cv_angular_acc_psd >= 0 && acc_psd >= 0 && gyro_psd >= 0 && acc_bias_psd >= 0 &&
           gyro_bias_psd >= 0,
       "noise densities must be non-negative");
  need(world_points > 0 && room_x > 0 && room_y > 0 && room_z > 0, "invalid world");
  need(imu_noise_scale >= 0 && acc_bias_sigma >= 0 && gyro_bias_sigma >= 0, "simulated IMU noise must be non-negative");
  need(outlier_fraction >= 0 && outlier_fraction <= 1, "outlier_fraction must be in [0, 1]");
  need(outlier_offset_min >= 0 && outlier_offset_max >= outlier_offset_min, "invalid outlier offsets");
  need(divergence_window > 0, "divergence_window must be positive");
  need(grid_cols > 0 && grid_rows > 0 && max_detections >= 0, "invalid search grid");
}

ExperimentConfig parse_config(std::istream& is, ExperimentConfig base) {
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected key=value");
    set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  base.validate();
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in, std::move(base));
}

void write_config(std::ostream& os, const ExperimentConfig& c) {
  for (const auto& e : table()) os << e.key << " = " << format(c, e.field) << '\n';
}

}  // namespace ekfslam

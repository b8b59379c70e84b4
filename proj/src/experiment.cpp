#include "ekfslam/experiment.hpp"

#include "ekfslam/stats.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

namespace ekfslam {

namespace {

constexpr double kBoundSigmas = 2.57;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

Eigen::Matrix<double, 4, 3> quat_angle_jacobian(const Quaternion& q) {
  return 0.5 * quat_left_matrix(q).rightCols<3>();
}

}  // namespace

DataManagerConfig data_manager_config(const ExperimentConfig& c) {
  DataManagerConfig d;
  d.ransac.enabled = c.ransac;
  d.ransac.max_iterations = c.ransac_max_iterations;
  d.ransac.success_probability = c.ransac_probability;
  d.ransac.strong_gate = chi2_quantile(c.strong_confidence, 2);
  d.ransac.gate = chi2_quantile(c.gate_confidence, 2);
  d.ransac.search_sigma = c.search_sigma;
  d.ransac.correction_budget = c.correction_budget;
  d.ransac.time_budget_ms = c.time_budget_ms;
  d.ransac.ranking = c.ranking == "trace" ? Ranking::Trace : Ranking::Determinant;
  d.grid_cols = c.grid_cols;
  d.grid_rows = c.grid_rows;
  d.max_detections = c.max_detections;
  d.harris = {c.harris_window, c.harris_k, c.harris_min_response};
  d.zncc_threshold = c.zncc_threshold;
  d.patch_side = c.patch_side;
  d.rho0 = c.rho0;
  d.sigma_rho0 = c.sigma_rho0;
  return d;
}

LandmarkQualityPolicy quality_policy(const ExperimentConfig& c) {
  LandmarkQualityPolicy p;
  p.kind = c.map_policy == "vo" ? MapPolicy::VisualOdometry : MapPolicy::Slam;
  p.min_match_ratio = c.min_match_ratio;
  p.max_consecutive_failures = c.max_consecutive_failures;
  p.grace_frames = c.grace_frames;
  p.min_corrections_for_conversion = c.min_corrections_for_conversion;
  p.linearity_threshold = c.linearity_threshold;
  p.reparametrize = c.reparametrize;
  p.max_landmarks = c.max_landmarks;
  return p;
}

SlamFilter make_filter(const ExperimentConfig& c, const GroundTruth& truth) {
  const bool imu = c.mode == "imu";
  const ContinuousNoiseSpec noise =
      imu ? ContinuousNoiseSpec::inertial(c.acc_psd, c.gyro_psd, c.acc_bias_psd, c.gyro_bias_psd)
          : ContinuousNoiseSpec::constant_velocity(c.cv_linear_acc_psd, c.cv_angular_acc_psd);
  SlamFilter f(c.map_capacity, imu ? MotionMode::Inertial : MotionMode::ConstantVelocity, noise);

  const TruthSample& s0 = truth.frame(0);
  const int n = f.robot_size();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  x.segment<3>(kPosOffset) = s0.p;
  x.segment<4>(kQuatOffset) = s0.q.to_vector();
  x.segment<3>(kVelOffset) = s0.v;
  p.block<3, 3>(kPosOffset, kPosOffset) = Mat3::Identity() * c.init_pos_sigma * c.init_pos_sigma;
  const double sa = c.init_ang_sigma_deg / kRadToDeg;
  const auto jq = quat_angle_jacobian(s0.q);
  p.block<4, 4>(kQuatOffset, kQuatOffset) = sa * sa * jq * jq.transpose();
  p.block<3, 3>(kVelOffset, kVelOffset) = Mat3::Identity() * c.init_vel_sigma * c.init_vel_sigma;
  if (imu) {
    x.segment<3>(16) = InertialState{}.gravity;
    p.block<3, 3>(10, 10) = Mat3::Identity() * c.init_acc_bias_sigma * c.init_acc_bias_sigma;
    p.block<3, 3>(13, 13) = Mat3::Identity() * c.init_gyro_bias_sigma * c.init_gyro_bias_sigma;
    p.block<3, 3>(16, 16) = Mat3::Identity() * c.init_gravity_sigma * c.init_gravity_sigma;
  } else {
    p.block<3, 3>(10, 10) = Mat3::Identity() * c.init_angvel_sigma * c.init_angvel_sigma;
  }
  f.init_robot(x, p);
  f.add_sensor({intrinsics_from(c), camera_extrinsic(c), c.pixel_sigma});
  return f;
}

RunMetrics run_slam(const Sequence& seq, const RunOptions& opt) {
  const ExperimentConfig& c = seq.config;
  const GroundTruth& gt = seq.truth;
  SlamFilter f = make_filter(c, gt);
  DataManager dm(0, data_manager_config(c), derive_seed(c.seed, 6));
  MapManager mm(quality_policy(c));

  RunMetrics m;
  m.seed = c.seed;
  m.mode = c.mode;
  for (const auto& u : seq.imu)
    if (u.any_saturated()) {
      m.saturation_time = u.t;
      break;
    }

  int frames = seq.frames->frame_count();
  if (opt.max_frames >= 0) frames = std::min(frames, opt.max_frames);
  const int ipf = gt.imu_per_frame;
  const double frame_dt = ipf * gt.imu_dt;

  for (int k = 0; k < frames; ++k) {
    FrameMetrics fm;
    fm.frame = k;
    fm.t = gt.frame(k).t;
    const RenderedFrame rf = seq.frames->frame(k);

    const auto t0 = Clock::now();
    if (k > 0) {
      if (f.mode() == MotionMode::Inertial) {
        for (int i = (k - 1) * ipf; i < k * ipf; ++i) fm.saturated |= f.predict(seq.imu.at(i));
      } else {
        f.predict(frame_dt);
        for (int i = (k - 1) * ipf; i < k * ipf && i < static_cast<int>(seq.imu.size()); ++i)
          fm.saturated |= seq.imu[i].any_saturated();
      }
    }
    fm.predict_ms = ms_since(t0);

    const auto t1 = Clock::now();
    const SearchImage img(rf.image);
    const FrameReport rep = dm.process_frame(f, img, k);
    fm.search_ms = ms_since(t1) - rep.correct_ms;
    fm.correct_ms = rep.correct_ms;

    const auto t2 = Clock::now();
    const auto created = dm.detect_new_landmarks(f, img, mm, k, [&](const Vec2& px) {
      return nearest_label(rf.labels, px, 3.0);
    });
    fm.detect_ms = ms_since(t2);

    // Outlier bookkeeping against the displaced labels of this frame. A
    // displaced landmark counts as used when its correction took the
    // displaced blob rather than the true projection.
    std::map<int, const PointLabel*> displaced;
    for (const auto& l : rf.labels)
      if (l.outlier) displaced[l.point] = &l;
    for (int id : rep.candidate_landmarks) {
      const Landmark& lm = f.landmark(id);
      auto it = displaced.find(lm.truth_id);
      if (it == displaced.end()) continue;
      ++fm.outliers;
      const Observation& o = lm.observations.at(0);
      if (std::find(rep.corrected_landmarks.begin(), rep.corrected_landmarks.end(), id) != rep.corrected_landmarks.end() &&
          o.measured && used_displaced_blob(*it->second, *o.measured))
        ++fm.outliers_corrected;
    }

    // Projection of every AHP landmark before maintenance, to check conversions.
    std::map<int, Vec2> before;
    const Frame cam = f.camera_frame(0);
    const PinholeIntrinsics& kk = f.sensor(0).intrinsics;
    for (const auto& [id, l] : f.landmarks())
      if (l.type == LandmarkType::Ahp)
        before[id] = pinhole_project(kk, landmark_in_camera(l.type, f.map().mean(l.block), cam).h).pixel;

    const auto t3 = Clock::now();
    const MaintenanceReport mr = mm.maintain(f, k);
    fm.maintain_ms = ms_since(t3);
    fm.total_ms = ms_since(t0);

    for (int id : mr.converted) {
      const Landmark& l = f.landmark(id);
      const Vec2 after = pinhole_project(kk, landmark_in_camera(l.type, f.map().mean(l.block), cam).h).pixel;
      m.max_conversion_shift_px = std::max(m.max_conversion_shift_px, (after - before.at(id)).norm());
    }

    if (opt.observation_log) {
      std::ostream& os = *opt.observation_log;
      for (const auto& [id, l] : f.landmarks()) {
        const Observation& o = l.observations.at(0);
        os << k << ',' << id << ',' << l.truth_id << ',' << to_string(o.status) << ',' << num(o.predicted.x()) << ','
           << num(o.predicted.y()) << ',' << (o.measured ? num(o.measured->x()) : "") << ','
           << (o.measured ? num(o.measured->y()) : "") << ',' << num(o.d2) << '\n';
      }
    }

    fm.landmarks = static_cast<int>(f.landmarks().size());
    fm.visible = rep.visible;
    fm.matched = rep.matched;
    fm.strong = rep.strong;
    fm.corrected = rep.corrected;
    fm.gated = rep.gated;
    fm.rescued = rep.rescued;
    fm.iterations = rep.ransac_iterations;
    fm.created = static_cast<int>(created.size());
    fm.removed = static_cast<int>(mr.removed.size());
    fm.converted = static_cast<int>(mr.converted.size());
    m.conversions += fm.converted;

    const Frame est = f.robot_frame();
    const TruthSample& ts = gt.frame(k);
    const Frame truth{ts.p, ts.q};
    const std::array<int, 7> idx{0, 1, 2, 3, 4, 5, 6};
    const Eigen::MatrixXd pr = f.map().covariance(f.robot());
    const Eigen::Matrix<double, 7, 7> p7 = pr(idx, idx);
    PoseError pe = pose_error(est, p7, truth);
    if (c.truth_uncertainty) add_truth_uncertainty(pe, gt.sigma_pos, gt.sigma_ang);
    fm.est_position = est.t;
    fm.true_position = truth.t;
    fm.est_orientation = est.q;
    fm.true_orientation = truth.q;
    fm.pos_error = pe.position;
    fm.ang_error = pe.rotation;
    fm.pos_sigma = pe.covariance.diagonal().head<3>().cwiseMax(0.0).cwiseSqrt();
    fm.ang_sigma = pe.covariance.diagonal().tail<3>().cwiseMax(0.0).cwiseSqrt();
    const auto v = nees(pe.vector(), pe.covariance);
    fm.nees_valid = v.has_value();
    fm.nees = v.value_or(std::numeric_limits<double>::infinity());
    m.outliers += fm.outliers;
    m.outliers_corrected += fm.outliers_corrected;
    m.frames.push_back(fm);
  }
  summarize(m, c);
  return m;
}

void summarize(RunMetrics& m, const ExperimentConfig& c) {
  m.diverged = false;
  m.divergence_time = -1.0;
  if (m.frames.empty()) return;
  std::vector<Vec3> est, tru;
  int run = 0;
  const double hi = chi2_interval(0.99, 6).second;
  std::size_t below = 0;
  std::array<std::size_t, 6> inside{};
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    const FrameMetrics& f = m.frames[i];
    est.push_back(f.est_position);
    tru.push_back(f.true_position);
    const bool bad = !f.nees_valid || !(f.nees <= c.divergence_nees);
    run = bad ? run + 1 : 0;
    if (run >= c.divergence_window && !m.diverged) {
      m.diverged = true;
      m.divergence_time = m.frames[i + 1 - static_cast<std::size_t>(run)].t;
    }
    below += f.nees_valid && f.nees <= hi;
    for (int a = 0; a < 3; ++a) {
      inside[a] += std::abs(f.pos_error(a)) <= kBoundSigmas * f.pos_sigma(a);
      inside[3 + a] += std::abs(f.ang_error(a)) <= kBoundSigmas * f.ang_sigma(a);
    }
  }
  const double n = static_cast<double>(m.frames.size());
  m.fraction_nees_below = below / n;
  m.fraction_within_bounds = *std::min_element(inside.begin(), inside.end()) / n;
  m.rmse_position = rmse(est, tru);
  m.final_position_error = m.frames.back().pos_error.norm();
  if (m.frames.size() >= 3) m.scale = scale_and_shape(est, tru);
}

RunMetrics run_experiment(const ExperimentConfig& c, const RunOptions& opt) {
  const Sequence s = make_synthetic_sequence(c);
  return run_slam(s, opt);
}

std::vector<RunMetrics> sweep(const ExperimentConfig& c, int runs) {
  std::vector<RunMetrics> out(static_cast<std::size_t>(runs));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(runs));
#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < runs; ++r) {
    ExperimentConfig cr = c;
    cr.seed = c.seed + static_cast<std::uint64_t>(r);
    try {
      out[static_cast<std::size_t>(r)] = run_experiment(cr);
    } catch (...) {
      errors[static_cast<std::size_t>(r)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

void write_metrics_csv(std::ostream& os, const RunMetrics& m) {
  os << "frame,t,err_x,err_y,err_z,err_rx,err_ry,err_rz,bound_x,bound_y,bound_z,bound_rx,bound_ry,bound_rz,nees,"
        "nees_valid,landmarks,visible,matched,strong,corrected,gated,rescued,iterations,created,removed,converted,"
        "saturated,outliers,outliers_corrected,predict_ms,search_ms,correct_ms,detect_ms,maintain_ms,total_ms\n";
  for (const auto& f : m.frames) {
    os << f.frame << ',' << num(f.t);
    for (int a = 0; a < 3; ++a) os << ',' << num(f.pos_error(a));
    for (int a = 0; a < 3; ++a) os << ',' << num(f.ang_error(a) * kRadToDeg);
    for (int a = 0; a < 3; ++a) os << ',' << num(kBoundSigmas * f.pos_sigma(a));
    for (int a = 0; a < 3; ++a) os << ',' << num(kBoundSigmas * f.ang_sigma(a) * kRadToDeg);
    os << ',' << num(f.nees) << ',' << f.nees_valid << ',' << f.landmarks << ',' << f.visible << ',' << f.matched << ','
       << f.strong << ',' << f.corrected << ',' << f.gated << ',' << f.rescued << ',' << f.iterations << ','
       << f.created << ',' << f.removed << ',' << f.converted << ',' << f.saturated << ',' << f.outliers << ','
       << f.outliers_corrected << ',' << num(f.predict_ms) << ',' << num(f.search_ms) << ',' << num(f.correct_ms)
       << ',' << num(f.detect_ms) << ',' << num(f.maintain_ms) << ',' << num(f.total_ms) << '\n';
  }
}

void write_trajectory_csv(std::ostream& os, const RunMetrics& m) {
  os << "frame,t,est_x,est_y,est_z,est_qw,est_qx,est_qy,est_qz,true_x,true_y,true_z,true_qw,true_qx,true_qy,true_qz\n";
  for (const auto& f : m.frames) {
    os << f.frame << ',' << num(f.t);
    for (int a = 0; a < 3; ++a) os << ',' << num(f.est_position(a));
    const Vec4 qe = f.est_orientation.to_vector(), qt = f.true_orientation.to_vector();
    for (int a = 0; a < 4; ++a) os << ',' << num(qe(a));
    for (int a = 0; a < 3; ++a) os << ',' << num(f.true_position(a));
    for (int a = 0; a < 4; ++a) os << ',' << num(qt(a));
    os << '\n';
  }
}

void write_summary_header(std::ostream& os) {
  os << "seed,mode,frames,rmse_position,final_position_error,scale_ratio,scale_error,shape_error,nees_below_fraction,"
        "within_bounds_fraction,diverged,divergence_time,saturation_time,conversions,max_conversion_shift_px,outliers,"
        "outliers_corrected,median_frame_ms\n";
}

void write_summary_row(std::ostream& os, const RunMetrics& m) {
  std::vector<double> t;
  for (const auto& f : m.frames) t.push_back(f.total_ms);
  double median = 0.0;
  if (!t.empty()) {
    std::nth_element(t.begin(), t.begin() + static_cast<long>(t.size() / 2), t.end());
    median = t[t.size() / 2];
  }
  os << m.seed << ',' << m.mode << ',' << m.frames.size() << ',' << num(m.rmse_position) << ','
     << num(m.final_position_error) << ',' << num(m.scale.scale_ratio) << ',' << num(m.scale.scale_error) << ','
     << num(m.scale.shape_error) << ',' << num(m.fraction_nees_below) << ',' << num(m.fraction_within_bounds) << ','
     << m.diverged << ',' << num(m.divergence_time) << ',' << num(m.saturation_time) << ',' << m.conversions << ','
     << num(m.max_conversion_shift_px) << ',' << m.outliers << ',' << m.outliers_corrected << ',' << num(median)
     << '\n';
}

namespace {

std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    std::istringstream is(line);
    std::string cell;
    while (std::getline(is, cell, ',')) {
      double v = 0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc()) {
        if (cell == "inf") v = std::numeric_limits<double>::infinity();
        else throw std::runtime_error("bad number in " + p.string() + ": " + cell);
      }
      r.push_back(v);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

RunMetrics read_run_csv(const std::filesystem::path& metrics, const std::filesystem::path& trajectory) {
  const auto mr = read_numeric_csv(metrics);
  const auto tr = read_numeric_csv(trajectory);
  if (mr.size() != tr.size()) throw std::runtime_error("metrics and trajectory logs have different lengths");
  RunMetrics m;
  for (std::size_t i = 0; i < mr.size(); ++i) {
    const auto& r = mr[i];
    const auto& q = tr[i];
    if (r.size() != 36 || q.size() != 16) throw std::runtime_error("unexpected column count in run logs");
    FrameMetrics f;
    f.frame = static_cast<int>(r[0]);
    f.t = r[1];
    for (int a = 0; a < 3; ++a) {
      f.pos_error(a) = r[2 + a];
      f.ang_error(a) = r[5 + a] / kRadToDeg;
      f.pos_sigma(a) = r[8 + a] / kBoundSigmas;
      f.ang_sigma(a) = r[11 + a] / kBoundSigmas / kRadToDeg;
    }
    f.nees = r[14];
    f.nees_valid = r[15] != 0;
    f.landmarks = static_cast<int>(r[16]);
    f.visible = static_cast<int>(r[17]);
    f.matched = static_cast<int>(r[18]);
    f.strong = static_cast<int>(r[19]);
    f.corrected = static_cast<int>(r[20]);
    f.gated = static_cast<int>(r[21]);
    f.rescued = static_cast<int>(r[22]);
    f.iterations = static_cast<int>(r[23]);
    f.created = static_cast<int>(r[24]);
    f.removed = static_cast<int>(r[25]);
    f.converted = static_cast<int>(r[26]);
    f.saturated = r[27] != 0;
    f.outliers = static_cast<int>(r[28]);
    f.outliers_corrected = static_cast<int>(r[29]);
    f.predict_ms = r[30];
    f.search_ms = r[31];
    f.correct_ms = r[32];
    f.detect_ms = r[33];
    f.maintain_ms = r[34];
    f.total_ms = r[35];
    f.est_position = {q[2], q[3], q[4]};
    f.est_orientation = {q[5], q[6], q[7], q[8]};
    f.true_position = {q[9], q[10], q[11]};
    f.true_orientation = {q[12], q[13], q[14], q[15]};
    m.conversions += f.converted;
    m.outliers += f.outliers;
    m.outliers_corrected += f.outliers_corrected;
    m.frames.push_back(f);
  }
  const auto info_path = metrics.parent_path() / "run_info.csv";
  if (std::filesystem::exists(info_path)) {
    std::ifstream in(info_path);
    std::string line;
    while (std::getline(in, line)) {
      const auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      const std::string key = line.substr(0, comma), value = line.substr(comma + 1);
      if (key == "seed") m.seed = std::stoull(value);
      else if (key == "mode") m.mode = value;
      else if (key == "saturation_time") m.saturation_time = std::stod(value);
      else if (key == "max_conversion_shift_px") m.max_conversion_shift_px = std::stod(value);
    }
  }
  return m;
}

void write_run(const std::filesystem::path& dir, const RunMetrics& m) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "metrics.csv");
    write_metrics_csv(os, m);
  }
  {
    std::ofstream os(dir / "trajectory.csv");
    write_trajectory_csv(os, m);
  }
  {
    std::ofstream os(dir / "run_info.csv");
    os << "seed," << m.seed << "\nmode," << m.mode << "\nsaturation_time," << num(m.saturation_time)
       << "\nmax_conversion_shift_px," << num(m.max_conversion_shift_px) << '\n';
  }
  std::ofstream os(dir / "summary.csv");
  write_summary_header(os);
  write_summary_row(os, m);
}

}  // namespace ekfslam

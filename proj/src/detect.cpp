#include "vigil/detect.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vigil {

DetectorKind detector_kind_from_string(const std::string& name) {
  if (name == "cs-ema" || name == "cs_ema") return DetectorKind::CsEma;
  if (name == "cusum") return DetectorKind::Cusum;
  if (name == "l1tw") return DetectorKind::L1Window;
  if (name == "l2tw") return DetectorKind::L2Window;
  throw ConfigError("unknown detector kind '" + name + "'");
}

std::string to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::CsEma: return "cs-ema";
    case DetectorKind::Cusum: return "cusum";
    case DetectorKind::L1Window: return "l1tw";
    case DetectorKind::L2Window: return "l2tw";
  }
  return "?";
}

std::string to_string(SensorType type) {
  switch (type) {
    case SensorType::Gps: return "gps";
    case SensorType::Gyro: return "gyro";
    case SensorType::Accel: return "accel";
    case SensorType::Baro: return "baro";
    case SensorType::Mag: return "mag";
  }
  return "?";
}

std::string to_string(MeasuredState state) {
  switch (state) {
    case MeasuredState::Position: return "position";
    case MeasuredState::Velocity: return "velocity";
    case MeasuredState::AngularVelocity: return "angular_velocity";
    case MeasuredState::SpecificForce: return "specific_force";
    case MeasuredState::Altitude: return "altitude";
    case MeasuredState::Heading: return "heading";
  }
  return "?";
}

void DetectorParams::validate() const {
  if (ema_lambda <= 0 || ema_lambda > 1)
    throw ConfigError("detector params: lambda must be in (0, 1]");
  if (cusum_shift <= 0)
    throw ConfigError("detector params: mean shift b must be positive");
  if (ema_cap <= ema_threshold)
    throw ConfigError("detector params: cap R must exceed the EMA threshold");
  if (window_length <= 0)
    throw ConfigError("detector params: window length must be positive");
  if (noise_std <= 0)
    throw ConfigError("detector params: noise std must be positive");
}

namespace {

struct Row {
  SensorType type;
  MeasuredState state;
  double l1_tau, l2_tau;
  int l1_len, l2_len;
  double cs_tau, cs_b;
  double ema_tau, ema_lambda, ema_cap;
  double noise_std;
};

// Shipped defaults. Thresholds/shifts/caps per detector family; the noise
// normalization stds are calibrated against the simulated sensor suite.
const Row kRows[] = {
    {SensorType::Gps, MeasuredState::Position,  //
     1.15, 1.402, 10, 10, 3.0, 0.50, 0.45, 0.01, 0.85, 2.0},
    {SensorType::Gps, MeasuredState::Velocity,  //
     3.10, 4.42, 10, 10, 3.5, 1.00, 0.50, 0.01, 1.10, 0.4},
    {SensorType::Baro, MeasuredState::Altitude,  //
     0.10, 0.02, 10, 10, 3.0, 0.25, 0.15, 0.05, 0.52, 1.2},
    {SensorType::Mag, MeasuredState::Heading,  //
     0.35, 0.20, 10, 10, 3.0, 0.25, 0.30, 0.01, 0.52, 0.12},
    {SensorType::Gyro, MeasuredState::AngularVelocity,  //
     0.464, 0.65, 10, 20, 3.0, 0.50, 0.25, 0.01, 0.85, 0.08},
    {SensorType::Accel, MeasuredState::SpecificForce,  //
     5.20, 30.25, 10, 10, 3.0, 1.00, 0.95, 0.01, 1.10, 0.35},
};

}  // namespace

DetectorTable DetectorTable::defaults() {
  DetectorTable t;
  for (const Row& r : kRows) {
    DetectorParams p;
    p.kind = DetectorKind::CsEma;
    p.cusum_threshold = r.cs_tau;
    p.cusum_shift = r.cs_b;
    p.ema_threshold = r.ema_tau;
    p.ema_lambda = r.ema_lambda;
    p.ema_cap = r.ema_cap;
    p.window_threshold = r.l1_tau;
    p.window_length = r.l1_len;
    p.noise_std = r.noise_std;
    t.table_[{r.type, r.state}] = p;
  }
  return t;
}

DetectorTable DetectorTable::from_config(const Config& cfg) {
  DetectorTable t = defaults();
  for (const Row& r : kRows) {
    std::string sec = "detector_" + to_string(r.type) +
                      (r.type == SensorType::Gps
                           ? "_" + to_string(r.state)
                           : std::string());
    DetectorParams& p = t.table_[{r.type, r.state}];
    auto key = [&sec](const char* k) { return sec + "." + k; };
    p.cusum_threshold = cfg.get_double(key("cusum_tau"), p.cusum_threshold);
    p.cusum_shift = cfg.get_double(key("cusum_b"), p.cusum_shift);
    p.ema_threshold = cfg.get_double(key("ema_tau"), p.ema_threshold);
    p.ema_lambda = cfg.get_double(key("ema_lambda"), p.ema_lambda);
    p.ema_cap = cfg.get_double(key("ema_cap"), p.ema_cap);
    p.window_threshold =
        cfg.get_double(key("window_tau"), p.window_threshold);
    p.window_length = cfg.get_int(key("window_length"), p.window_length);
    p.noise_std = cfg.get_double(key("noise_std"), p.noise_std);
    p.validate();
  }
  return t;
}

const DetectorParams& DetectorTable::params(SensorType type,
                                            MeasuredState state) const {
  auto it = table_.find({type, state});
  if (it == table_.end())
    throw ConfigError("no detector params for " + to_string(type) + "/" +
                      to_string(state));
  return it->second;
}

DetectorParams& DetectorTable::params(SensorType type, MeasuredState state) {
  auto it = table_.find({type, state});
  if (it == table_.end())
    throw ConfigError("no detector params for " + to_string(type) + "/" +
                      to_string(state));
  return it->second;
}

void DetectorTable::set_kind(DetectorKind kind) {
  for (auto& [key, p] : table_) {
    p.kind = kind;
    if (kind == DetectorKind::L2Window) {
      // The L2 defaults carry their own threshold/length columns.
      for (const Row& r : kRows) {
        if (r.type == key.first && r.state == key.second) {
          p.window_threshold = r.l2_tau;
          p.window_length = r.l2_len;
        }
      }
    } else if (kind == DetectorKind::L1Window) {
      for (const Row& r : kRows) {
        if (r.type == key.first && r.state == key.second) {
          p.window_threshold = r.l1_tau;
          p.window_length = r.l1_len;
        }
      }
    }
  }
}

std::string DetectorTable::to_config_text() const {
  std::ostringstream out;
  out.precision(12);
  for (const auto& [key, p] : table_) {
    out << "[detector_" << to_string(key.first)
        << (key.first == SensorType::Gps ? "_" + to_string(key.second)
                                         : std::string())
        << "]\n";
    out << "cusum_tau = " << p.cusum_threshold << "\n";
    out << "cusum_b = " << p.cusum_shift << "\n";
    out << "ema_tau = " << p.ema_threshold << "\n";
    out << "ema_lambda = " << p.ema_lambda << "\n";
    out << "ema_cap = " << p.ema_cap << "\n";
    out << "window_tau = " << p.window_threshold << "\n";
    out << "window_length = " << p.window_length << "\n";
    out << "noise_std = " << p.noise_std << "\n\n";
  }
  return out.str();
}

void DetectorState::reset() {
  cusum = 0.0;
  ema = 0.0;
  window.clear();
  window_sum = 0.0;
}

double normalize_residual(double raw, double noise_std) {
  if (noise_std <= 0)
    throw ConfigError("normalize_residual: noise std must be positive");
  return raw / noise_std;
}

double reduce_max_abs(const std::vector<double>& normalized) {
  double best = 0.0;
  for (double v : normalized) best = std::max(best, std::fabs(v));
  return best;
}

DetectorUpdate cusum_update(DetectorState& state, double r_norm,
                            const DetectorParams& p) {
  state.cusum = std::max(0.0, state.cusum + std::fabs(r_norm) - p.cusum_shift);
  DetectorUpdate u;
  if (state.cusum > p.cusum_threshold) {
    u.alarm = true;
    u.source = DetectorUpdate::Source::Cusum;
  }
  return u;
}

DetectorUpdate ema_update(DetectorState& state, double r_norm,
                          const DetectorParams& p) {
  double capped = std::clamp(r_norm, -p.ema_cap, p.ema_cap);
  state.ema = p.ema_lambda * capped + (1.0 - p.ema_lambda) * state.ema;
  DetectorUpdate u;
  if (std::fabs(state.ema) > p.ema_threshold) {
    u.alarm = true;
    u.source = DetectorUpdate::Source::Ema;
  }
  return u;
}

DetectorUpdate cs_ema_update(DetectorState& state, double r_norm_cusum,
                             double r_norm_ema, const DetectorParams& p) {
  DetectorUpdate cu = cusum_update(state, r_norm_cusum, p);
  DetectorUpdate eu = ema_update(state, r_norm_ema, p);
  if (cu.alarm) return cu;
  return eu;
}

DetectorUpdate window_update(DetectorState& state, double r_norm,
                             const DetectorParams& p, bool squared) {
  double v = squared ? r_norm * r_norm : std::fabs(r_norm);
  state.window.push_back(v);
  state.window_sum += v;
  if (static_cast<int>(state.window.size()) > p.window_length) {
    state.window_sum -= state.window.front();
    state.window.pop_front();
  }
  double stat = squared ? state.window_sum / p.window_length : state.window_sum;
  DetectorUpdate u;
  if (stat > p.window_threshold) {
    u.alarm = true;
    u.source = DetectorUpdate::Source::Window;
  }
  return u;
}

DetectorUpdate detector_update(DetectorState& state, double r_norm_cusum,
                               double r_norm_ema, const DetectorParams& p) {
  switch (p.kind) {
    case DetectorKind::CsEma:
      return cs_ema_update(state, r_norm_cusum, r_norm_ema, p);
    case DetectorKind::Cusum:
      return cusum_update(state, r_norm_cusum, p);
    case DetectorKind::L1Window:
      return window_update(state, r_norm_ema, p, false);
    case DetectorKind::L2Window:
      return window_update(state, r_norm_ema, p, true);
  }
  return {};
}

void DetectorBank::add_stream(int instance_id, SensorType type,
                              MeasuredState state, int axes,
                              const DetectorParams& params) {
  params.validate();
  Stream s;
  s.key = {instance_id, state};
  s.type = type;
  s.params = params;
  s.axes.resize(axes);
  streams_[s.key] = std::move(s);
}

void DetectorBank::arm(double) {
  for (auto& [key, s] : streams_) {
    for (auto& ax : s.axes) ax.reset();
    s.peak_cusum = s.peak_ema = s.peak_window = 0.0;
  }
  armed_ = true;
}

bool DetectorBank::update(int instance_id, MeasuredState state,
                          const std::vector<double>& raw_cusum,
                          const std::vector<double>& raw_ema, double t) {
  if (!armed_) return false;
  auto it = streams_.find({instance_id, state});
  if (it == streams_.end())
    throw ConfigError("detector update on unknown stream");
  Stream& s = it->second;
  bool fired = false;
  DetectorUpdate::Source source = DetectorUpdate::Source::None;
  for (size_t ax = 0; ax < s.axes.size(); ++ax) {
    double rc = normalize_residual(raw_cusum[ax], s.params.noise_std);
    double re = normalize_residual(raw_ema[ax], s.params.noise_std);
    DetectorUpdate u = detector_update(s.axes[ax], rc, re, s.params);
    s.peak_cusum = std::max(s.peak_cusum, s.axes[ax].cusum);
    s.peak_ema = std::max(s.peak_ema, std::fabs(s.axes[ax].ema));
    if (!s.axes[ax].window.empty()) {
      double stat = s.params.kind == DetectorKind::L2Window
                        ? s.axes[ax].window_sum / s.params.window_length
                        : s.axes[ax].window_sum;
      s.peak_window = std::max(s.peak_window, stat);
    }
    if (u.alarm && !fired) {
      fired = true;
      source = u.source;
    }
  }
  if (!fired) return false;
  auto& alarm = alarms_[instance_id];
  if (alarm.alarmed) return false;  // latched; keep the first timestamp
  alarm.alarmed = true;
  alarm.first_alarm_time = t;
  alarm.source = source;
  alarm.state = state;
  return true;
}

bool DetectorBank::instance_alarmed(int instance_id) const {
  auto it = alarms_.find(instance_id);
  return it != alarms_.end() && it->second.alarmed;
}

const DetectorBank::InstanceAlarm* DetectorBank::instance_alarm(
    int instance_id) const {
  auto it = alarms_.find(instance_id);
  return it == alarms_.end() ? nullptr : &it->second;
}

const DetectorBank::Stream* DetectorBank::stream(int instance_id,
                                                 MeasuredState state) const {
  auto it = streams_.find({instance_id, state});
  return it == streams_.end() ? nullptr : &it->second;
}

std::vector<const DetectorBank::Stream*> DetectorBank::streams() const {
  std::vector<const Stream*> out;
  for (const auto& [key, s] : streams_) out.push_back(&s);
  return out;
}

double DetectorBank::current_statistic(int instance_id,
                                       MeasuredState state) const {
  const Stream* s = stream(instance_id, state);
  if (!s) return 0.0;
  double best = 0.0;
  for (const auto& ax : s->axes) {
    best = std::max(best, ax.cusum);
    best = std::max(best, std::fabs(ax.ema));
  }
  return best;
}

}  // namespace vigil

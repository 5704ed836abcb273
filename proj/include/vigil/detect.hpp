#pragma once

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vigil/config.hpp"

namespace vigil {

enum class DetectorKind { CsEma, Cusum, L1Window, L2Window };

DetectorKind detector_kind_from_string(const std::string& name);
std::string to_string(DetectorKind kind);

enum class SensorType { Gps, Gyro, Accel, Baro, Mag };

std::string to_string(SensorType type);

// The state each sensor type reports on. GPS carries two of them.
enum class MeasuredState {
  Position,
  Velocity,
  AngularVelocity,
  SpecificForce,
  Altitude,
  Heading
};

std::string to_string(MeasuredState state);

// Per-(sensor type, measured state) detector configuration. Thresholds,
// shifts and caps are in noise-normalized units; noise_std converts raw
// residuals into those units.
struct DetectorParams {
  DetectorKind kind = DetectorKind::CsEma;
  double cusum_threshold = 3.0;  // tau of the CUSUM component
  double cusum_shift = 0.5;      // mean shift b
  double ema_threshold = 0.25;   // tau of the EMA component
  double ema_lambda = 0.01;      // smoothing factor, (0, 1]
  double ema_cap = 0.85;         // residual cap R, > ema_threshold
  double window_threshold = 0.464;
  int window_length = 10;
  double noise_std = 1.0;  // raw residual units per normalized unit

  void validate() const;
};

// Full parameter table keyed by (sensor type, measured state).
class DetectorTable {
 public:
  // Built-in defaults for every monitored stream.
  static DetectorTable defaults();
  static DetectorTable from_config(const Config& cfg);

  const DetectorParams& params(SensorType type, MeasuredState state) const;
  DetectorParams& params(SensorType type, MeasuredState state);
  void set_kind(DetectorKind kind);
  std::string to_config_text() const;

 private:
  std::map<std::pair<SensorType, MeasuredState>, DetectorParams> table_;
};

// Running statistics of one scalar detector (one axis of one stream).
struct DetectorState {
  double cusum = 0.0;        // S >= 0
  double ema = 0.0;          // moving average MA
  std::deque<double> window;  // recent normalized residuals
  double window_sum = 0.0;

  void reset();
};

struct DetectorUpdate {
  bool alarm = false;
  // Which component fired; meaningful only when alarm is set.
  enum class Source { None, Cusum, Ema, Window } source = Source::None;
};

double normalize_residual(double raw, double noise_std);

// Largest-magnitude element; the scalar reduction used when a multi-axis
// residual has to be reported as one number.
double reduce_max_abs(const std::vector<double>& normalized);

DetectorUpdate cusum_update(DetectorState& state, double r_norm,
                            const DetectorParams& p);
DetectorUpdate ema_update(DetectorState& state, double r_norm,
                          const DetectorParams& p);
// CUSUM and EMA components may consume different residual streams (the gyro
// detectors do); alarm on either.
DetectorUpdate cs_ema_update(DetectorState& state, double r_norm_cusum,
                             double r_norm_ema, const DetectorParams& p);
DetectorUpdate window_update(DetectorState& state, double r_norm,
                             const DetectorParams& p, bool squared);

// Single update of whatever algorithm the params select.
DetectorUpdate detector_update(DetectorState& state, double r_norm_cusum,
                               double r_norm_ema, const DetectorParams& p);

// One detector per (instance, measured state, axis) plus per-instance alarm
// latching, as the recovery monitor consumes instance-level alarms.
class DetectorBank {
 public:
  struct StreamKey {
    int instance_id;  // global instance id
    MeasuredState state;
    bool operator<(const StreamKey& o) const {
      return instance_id != o.instance_id ? instance_id < o.instance_id
                                          : state < o.state;
    }
  };

  struct Stream {
    StreamKey key;
    SensorType type;
    DetectorParams params;
    std::vector<DetectorState> axes;
    // Running maximum of each component statistic, for threshold sweeps.
    double peak_cusum = 0.0;
    double peak_ema = 0.0;
    double peak_window = 0.0;
  };

  struct InstanceAlarm {
    bool alarmed = false;
    double first_alarm_time = 0.0;
    DetectorUpdate::Source source = DetectorUpdate::Source::None;
    MeasuredState state = MeasuredState::Position;
  };

  void add_stream(int instance_id, SensorType type, MeasuredState state,
                  int axes, const DetectorParams& params);

  void arm(double t);
  bool armed() const { return armed_; }

  // Updates every axis of one stream; returns true when the update raised a
  // new alarm on the instance. CUSUM/EMA residual vectors must have the
  // stream's axis count; for non-gyro streams pass the same vector twice.
  bool update(int instance_id, MeasuredState state,
              const std::vector<double>& raw_cusum,
              const std::vector<double>& raw_ema, double t);

  bool instance_alarmed(int instance_id) const;
  const InstanceAlarm* instance_alarm(int instance_id) const;
  const std::map<int, InstanceAlarm>& alarms() const { return alarms_; }
  const Stream* stream(int instance_id, MeasuredState state) const;
  std::vector<const Stream*> streams() const;

  // Highest current statistic of a stream across axes, normalized units.
  double current_statistic(int instance_id, MeasuredState state) const;

 private:
  std::map<StreamKey, Stream> streams_;
  std::map<int, InstanceAlarm> alarms_;
  bool armed_ = false;
};

}  // namespace vigil

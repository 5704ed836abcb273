#pragma once

#include <map>
#include <memory>
#include <set>
#include <tuple>

#include "vigil/attacks.hpp"
#include "vigil/detect.hpp"
#include "vigil/estimator.hpp"
#include "vigil/flightlog.hpp"
#include "vigil/recovery.hpp"
#include "vigil/simworld.hpp"

namespace vigil {

// Everything a single closed-loop flight needs, assembled from a scenario
// config file plus command-line overrides.
struct ScenarioOptions {
  MissionKind mission = MissionKind::Hovering;
  uint64_t seed = 1;
  double control_rate_hz = 250.0;
  double max_flight_s = 600.0;
  double waypoint_radius = 1.0;
  double divergence_stop_m = 5.0;
  double alarm_delay_s = 0.0;
  bool recovery_enabled = true;
  bool log_detector_stats = false;
  // Batch runs keep only the columns the metrics need.
  bool lean_log = false;

  PhysicalParams plant_params;   // ground truth airframe
  PhysicalParams model_params;   // defense-side copy (may be coarse)
  WindModel wind;
  SensorNoise noise;
  BatteryModel battery;
  EstimatorOptions estimator;
  ControllerGains gains;
  DetectorTable detectors = DetectorTable::defaults();
  std::vector<AttackSpec> attacks;

  static ScenarioOptions from_config(const Config& cfg);
  static ScenarioOptions from_file(const std::string& path);

  void set_detector_kind(DetectorKind kind) { detectors.set_kind(kind); }
  void set_coarse_model() {
    model_params.fidelity = ModelFidelity::coarse();
  }
  void disable_buffer() { estimator.buffer_hold_time = 0.0; }
};

// Autopilot-side complementary filter standing in for the stock estimator.
// It consumes whatever data the recovery monitor selects for each state.
class VanillaEstimator {
 public:
  struct Inputs {
    std::optional<Vec3> gyro;
    std::optional<Vec3> specific_force;
    std::optional<Vec3> position_xy;  // z ignored
    std::optional<Vec3> velocity;
    std::optional<double> altitude;   // positive up
    std::optional<double> heading;
  };

  void reset(const RigidState& initial, double gravity);
  void step(const Inputs& in, double dt);
  const RigidState& estimate() const { return estimate_; }

 private:
  RigidState estimate_;
  double gravity_ = 9.81;
};

// Per-flight results consumed by the evaluation pipeline.
struct FlightArtifacts {
  FlightLog log;
  TerminalCondition terminal = TerminalCondition::MissionComplete;
  double armed_at = -1.0;
  double sim_seconds = 0.0;
  double wall_seconds = 0.0;
  uint64_t seed = 0;

  double attack_start = -1.0;           // earliest spec start; -1 if none
  std::set<int> attacked_instances;     // global ids
  std::map<int, double> first_alarms;   // global id -> detector alarm time
  std::map<int, std::string> instance_label;

  // Cumulative-max detection statistic envelopes, for threshold sweeps.
  // Key: instance id, measured state, component (0 cusum, 1 ema, 2 window).
  using EnvelopeKey = std::tuple<int, int, int>;
  std::map<EnvelopeKey, std::vector<std::pair<double, double>>> envelopes;

  // Normalized residual magnitudes on the first targeted axis of each
  // stealthily attacked instance, per sample while the attack is active:
  // (CUSUM-stream, EMA-stream).
  std::map<int, std::vector<std::pair<double, double>>> stealth_residuals;
};

// The closed loop: plant, sensors, attacks, detectors, recovery monitor,
// reference estimator, autopilot estimator, controller, logging.
class FlightRunner {
 public:
  explicit FlightRunner(const ScenarioOptions& opts);

  void step();
  bool finished() const { return finished_; }
  FlightArtifacts run();

  double time() const { return time_; }
  const RigidState& truth() const { return plant_.state(); }
  const ReferenceState& reference() const { return estimator_.state(); }
  const RigidState& vanilla() const { return vanilla_.estimate(); }
  const RecoveryMonitor& monitor() const { return monitor_; }
  const DetectorBank& bank() const { return bank_; }
  const ReferenceEstimator& estimator() const { return estimator_; }
  const SensorSuite& suite() const { return suite_; }
  bool reference_control() const { return reference_control_; }
  double armed_at() const { return armed_at_; }
  RigidState active_estimate() const;
  std::string instance_label(int instance_id) const;

 private:
  void arm_detectors();
  void process_measurements(const std::vector<Measurement>& measurements);
  void update_mission(const RigidState& active);
  ControllerSetpoint current_setpoint(double t_script,
                                      const RigidState& active);
  void check_terminal();
  void log_row(const std::vector<Measurement>& measurements);

  ScenarioOptions opts_;
  double dt_;
  double time_ = 0.0;
  long tick_ = 0;
  bool finished_ = false;
  TerminalCondition terminal_ = TerminalCondition::TimeLimit;

  std::mt19937_64 rng_;
  Plant plant_;
  WindModel wind_;
  AirState air_;
  BatteryState battery_;
  SensorSuite suite_;
  Mission mission_;
  size_t waypoint_index_ = 0;
  double dwell_until_ = -1.0;
  bool mission_done_ = false;
  bool airborne_ = false;

  ControllerState controller_;
  ControlInput last_input_;

  ReferenceEstimator estimator_;
  VanillaEstimator vanilla_;
  DetectorBank bank_;
  RecoveryMonitor monitor_;
  AttackInjector injector_;
  bool reference_control_ = false;
  double armed_at_ = -1.0;

  // Latest samples held for logging between sensor updates.
  FlightRow held_;
  FlightArtifacts artifacts_;
};

}  // namespace vigil

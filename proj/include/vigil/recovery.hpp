#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "vigil/detect.hpp"

namespace vigil {

// Data source categories a recovered state can be served from. Reference is
// the estimate of the defense-side state estimator and is always available.
enum class SourceClass { Reference, Gps, Baro, Imu, Mag };

std::string to_string(SourceClass c);

// The state kinds the recovery policy arbitrates.
enum class RecoveredState { AngularVelocity, Altitude, HorizontalPosition, Attitude };

std::string to_string(RecoveredState s);

struct SelectedSource {
  SourceClass source = SourceClass::Reference;
  int instance_id = -1;  // -1 for the reference state
  std::string label() const;
};

// Per-instance validated/compromised flags. Instances never rejoin once
// flagged within a flight.
class SensorHealth {
 public:
  void register_instance(int instance_id, SensorType type);
  // Idempotent; records the first flag time only.
  void flag(int instance_id, double t);
  bool compromised(int instance_id) const;
  double flag_time(int instance_id) const;
  std::vector<int> validated_instances(SensorType type) const;
  std::vector<int> instances(SensorType type) const;
  const std::map<int, SensorType>& all() const { return types_; }

 private:
  std::map<int, SensorType> types_;
  std::map<int, double> flagged_;  // instance -> flag timestamp
};

// Priority order per recovered state, best source last. The reference state
// is the implicit bottom of every order and never appears in the lists.
struct SourcePriority {
  // Ascending priority, i.e. {Gps, Baro} means Baro preferred over Gps.
  std::map<RecoveredState, std::vector<SourceClass>> order;

  static SourcePriority defaults();
};

// Snapshot of the per-type availability sets for one recovered state.
struct LatticeStatus {
  // Parallel to the priority order of the state, plus the reference at the
  // bottom; each entry is the set of validated instance ids of that class.
  std::vector<std::pair<SourceClass, std::set<int>>> availability;

  bool operator==(const LatticeStatus& o) const {
    return availability == o.availability;
  }
  // True when every availability set of this status is a subset of the
  // other's (this status is at or below the other in the lattice).
  bool descends_from(const LatticeStatus& o) const;
  std::string to_string() const;
};

// Applies detection reports to the health list, recomputes lattice statuses
// and exposes the per-state source selection. Alarm effects can be delayed
// by a configurable interval to emulate slow reporting paths.
class RecoveryMonitor {
 public:
  RecoveryMonitor() : priority_(SourcePriority::defaults()) {}
  explicit RecoveryMonitor(SourcePriority priority)
      : priority_(std::move(priority)) {}

  void register_instance(int instance_id, SensorType type);
  void set_alarm_delay(double seconds) { alarm_delay_ = seconds; }
  void set_enabled(bool enabled) { enabled_ = enabled; }
  bool enabled() const { return enabled_; }

  // Queues an alarm; the flag becomes effective at t + alarm_delay.
  void report_alarm(int instance_id, double t);
  // Promotes queued alarms whose effective time has arrived.
  void step(double t);

  const SensorHealth& health() const { return health_; }
  bool isolated(int instance_id) const;

  SelectedSource select_source(RecoveredState state) const;
  LatticeStatus lattice_status(RecoveredState state) const;

  // True from the tick the last gyro instance is flagged: flight control
  // must take the reference states instead of the autopilot estimator.
  bool reference_control_active() const;

 private:
  SensorType class_sensor(SourceClass c) const;

  SensorHealth health_;
  SourcePriority priority_;
  std::vector<std::pair<int, double>> pending_;  // instance, effective time
  double alarm_delay_ = 0.0;
  bool enabled_ = true;
};

}  // namespace vigil

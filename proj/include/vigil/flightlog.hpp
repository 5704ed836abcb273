#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "vigil/physmodel.hpp"

namespace vigil {

// One control-tick record. Sensor columns hold the latest sample (sampled
// values repeat between updates; the *_fresh flags mark update ticks).
struct FlightRow {
  double t = 0.0;
  int attack_active = 0;

  Vec3 truth_position = Vec3::Zero();
  Vec3 truth_velocity = Vec3::Zero();
  Quat truth_attitude = Quat::Identity();
  Vec3 truth_angular_velocity = Vec3::Zero();

  Vec3 ref_position = Vec3::Zero();
  Vec3 ref_velocity = Vec3::Zero();
  Quat ref_attitude = Quat::Identity();
  Vec3 ref_angular_velocity = Vec3::Zero();
  Vec3 ref_angular_velocity_cs = Vec3::Zero();
  Vec3 ref_specific_force = Vec3::Zero();
  Vec3 ref_wind = Vec3::Zero();

  Vec3 active_position = Vec3::Zero();  // estimate the controller flies on

  std::array<double, 4> actuator_us{0, 0, 0, 0};

  // Instance-0 measurement streams kept for offline fitting and tuning.
  Vec3 gyro0 = Vec3::Zero();
  Vec3 accel0 = Vec3::Zero();
  double baro0_altitude = 0.0;
  double baro0_density = 1.225;
  double mag0_heading = 0.0;
  Vec3 gps_position = Vec3::Zero();
  Vec3 gps_velocity = Vec3::Zero();
  int gps_fresh = 0;
  int baro_fresh = 0;
  int mag_fresh = 0;

  double battery_voltage = 0.0;
  double battery_current = 0.0;

  // Latched per-instance alarm flags, by global instance id.
  std::vector<int> alarms;

  std::string src_omega = "IMU0";
  std::string src_altitude = "BAR0";
  std::string src_hpos = "GPS0";
  std::string src_attitude = "MAG0";
  int reference_control = 0;

  // Optional per-tick detector statistics (see FlightLog::stat_labels).
  std::vector<double> stats;
};

enum class TerminalCondition { MissionComplete, Crash, Divergence, TimeLimit };

std::string to_string(TerminalCondition c);

struct FlightLog {
  std::vector<std::string> instance_labels;  // column meaning of alarms[]
  std::vector<std::string> stat_labels;      // column meaning of stats[]
  std::vector<FlightRow> rows;
  TerminalCondition terminal = TerminalCondition::MissionComplete;
  double detectors_armed_at = -1.0;

  void write_csv(const std::string& path) const;
  static FlightLog read_csv(const std::string& path);
};

}  // namespace vigil

#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vigil/detect.hpp"
#include "vigil/physmodel.hpp"

namespace vigil {

// Random-walk wind in the NED frame. sigma is the accumulated standard
// deviation over time_scale seconds of flight; the per-step increment is
// sigma / sqrt(rate * time_scale).
struct WindModel {
  Vec3 mean = Vec3::Zero();
  Vec3 sigma = Vec3(6.0, 8.0, 0.0);
  double time_scale = 300.0;  // s
  double rate_hz = 250.0;

  Vec3 state = Vec3::Zero();

  Vec3 step(std::mt19937_64& rng);
  Vec3 current() const { return mean + state; }
};

// One physical sensor instance and its sampling/noise properties.
struct SensorConfig {
  int instance_id = 0;
  SensorType type = SensorType::Gyro;
  double rate_hz = 250.0;
  double noise_std = 0.0;  // per measured axis, in measurement units
};

struct Measurement {
  int instance_id = 0;
  SensorType type = SensorType::Gyro;
  double t = 0.0;
  // Semantics by type: Gps = position(0..2) + velocity(3..5); Gyro = angular
  // velocity; Accel = body specific force; Baro = altitude(0) + density(1);
  // Mag = heading(0).
  std::vector<double> values;
};

struct SensorNoise {
  double gyro = 0.01;    // rad/s
  double accel = 0.05;   // m/s^2
  double gps_pos = 0.5;  // m
  double gps_vel = 0.1;  // m/s
  double baro = 0.2;     // m
  double mag = 0.02;     // rad
};

// The redundant sensor complement: 1 GPS, 3 gyro+accel pairs, 2 baros,
// 2 magnetometers. Instance ids are globally unique.
class SensorSuite {
 public:
  static SensorSuite standard(const SensorNoise& noise);

  const std::vector<SensorConfig>& sensors() const { return sensors_; }
  std::vector<int> instances_of(SensorType type) const;

  // True truth-sampling: emits every instance whose sample grid includes
  // tick_index at the base rate.
  std::vector<Measurement> sample(const RigidState& truth,
                                  const Vec3& specific_force_body,
                                  const AirState& air,
                                  const BatteryState& battery,
                                  long tick_index, double base_rate_hz,
                                  double t, std::mt19937_64& rng) const;

 private:
  std::vector<SensorConfig> sensors_;
  SensorNoise noise_;
};

enum class MissionKind { Hovering, Moving, Maneuver, SysId };

MissionKind mission_kind_from_string(const std::string& name);
std::string to_string(MissionKind kind);

struct Waypoint {
  Vec3 position = Vec3::Zero();
  double hover_s = 0.0;  // dwell at the waypoint before moving on
};

struct Mission {
  MissionKind kind = MissionKind::Hovering;
  std::vector<Waypoint> waypoints;
  int attack_waypoint = 1;  // index of the preset attack waypoint
};

// Waypoint plans for the three standard missions.
Mission mission_waypoints(MissionKind kind);

// Cascaded position -> velocity -> attitude -> rate controller with the
// quad-X mixer. Runs at the control rate on whatever estimate it is handed.
struct ControllerGains {
  double pos_p = 1.2;
  double vel_p = 3.0;
  double vel_i = 1.2;
  double att_p = 10.0;
  double rate_p = 30.0;
  double rate_i = 15.0;
  double yaw_p = 2.0;
  double max_vel_xy = 5.0;    // m/s
  double max_vel_z = 2.5;     // m/s
  double max_accel_xy = 6.0;  // m/s^2
  double max_rate = 3.0;      // rad/s
};

struct ControllerState {
  ControllerGains gains;
  Vec3 vel_integral = Vec3::Zero();
  Vec3 rate_integral = Vec3::Zero();
  double yaw_setpoint = 0.0;
};

struct ControllerSetpoint {
  Vec3 position = Vec3::Zero();
  std::optional<Vec3> velocity;  // overrides the position loop when set
  std::optional<double> yaw_rate;
};

// Desired wrench in mixer units: per-axis torque scaled by the actuation
// coefficients plus total relative thrust.
struct WrenchCommand {
  double roll = 0.0;   // (t2 + t3 - t1 - t4)
  double pitch = 0.0;  // (t1 + t3 - t2 - t4)
  double yaw = 0.0;    // (t1 + t2 - t3 - t4)
  double thrust = 0.0; // sum of t_i
};

// Inverse of the rotor sign pattern; exact for commands within limits.
Rotor4 mix_wrench(const WrenchCommand& w);
WrenchCommand wrench_of_thrusts(const Rotor4& t);

ControlInput controller_step(const RigidState& estimate,
                             const ControllerSetpoint& target,
                             ControllerState& ctl, double dt,
                             const PhysicalParams& params,
                             const BatteryState& battery);

// Ground-truth plant. Uses classic RK4 on the rigid-body equations with the
// rotor thrust filter advanced once per control tick.
class Plant {
 public:
  Plant(const PhysicalParams& params, const RigidState& initial);

  void step(const ControlInput& input, const AirState& air,
            const BatteryState& battery, double dt);

  const RigidState& state() const { return state_; }
  const ThrustState& thrust() const { return thrust_; }
  // Body-frame specific force at the current state (what an ideal
  // accelerometer mounted at the CoG reads).
  Vec3 specific_force(const AirState& air) const;

 private:
  PhysicalParams params_;
  RigidState state_;
  ThrustState thrust_;
};

// Load-dependent battery: current follows total commanded thrust, voltage
// sags across the internal resistance.
struct BatteryModel {
  double voltage_full = 16.0;
  double resistance = 0.0;
  double current_per_thrust = 5.0;  // A per unit total relative thrust

  BatteryState state(const ThrustState& thrust) const {
    BatteryState b;
    b.current = current_per_thrust * thrust.total();
    b.voltage = voltage_full - resistance * b.current;
    return b;
  }
};

}  // namespace vigil

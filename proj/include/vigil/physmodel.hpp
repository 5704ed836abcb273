#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>

#include "vigil/config.hpp"

namespace vigil {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

constexpr int kRotorCount = 4;
using Rotor4 = std::array<double, kRotorCount>;

// Which submodels of the nonlinear model are enabled. Disabling all of them
// degrades the model to a coarse rigid-body-only variant used for ablation
// comparisons (--model coarse in the CLI).
struct ModelFidelity {
  bool battery_adjustment = true;  // voltage/current compensation of thrust
  bool rotor_lag = true;           // first-order rotor speed delay
  bool rotor_gyro = true;          // gyroscopic moment of rotor acceleration
  bool drag = true;                // momentum + ballistic aerodynamic drag

  static ModelFidelity full() { return ModelFidelity{}; }
  static ModelFidelity coarse() { return {false, false, false, false}; }
};

// Airframe and propulsion parameter set of the quadrotor model.
struct PhysicalParams {
  double mass = 0.80;          // kg
  double arm_length = 0.165;   // m, motor to CoG
  Mat3 inertia = (Eigen::Matrix3d() << 5.0e-3, 0, 0,  //
                  0, 5.0e-3, 0,                       //
                  0, 0, 9.0e-3)
                     .finished();          // kg m^2
  double thrust_coeff = 4.0;               // N per unit relative thrust
  double torque_coeff = 0.05;              // N m per unit relative thrust
  double rotor_gyro_coeff = 0.0;           // N m s
  double time_constant = 0.005;            // s, rotor spin-up/down
  double pwm_min = 1000.0;                 // us, minimum command T0
  double pwm_range = 1000.0;               // us
  double voltage_ref = 16.0;               // V, full-charge nominal
  double resistance_internal = 0.0;        // ohm
  double momentum_drag = 0.001;            // 1/s
  Vec3 ballistic = Vec3(0.022, 0.022, 0);  // m^2/kg, z forced to 0
  double gravity = 9.81;                   // m/s^2
  ModelFidelity fidelity;

  // Throws ConfigError when a positivity/definiteness constraint is violated.
  void validate() const;

  static PhysicalParams from_config(const Config& cfg,
                                    const std::string& section = "physical");
  std::string to_config_text(const std::string& section = "physical") const;
};

// Position/velocity/attitude state of the rigid body. NED inertial frame,
// FRD body frame, q rotates body vectors into NED.
struct RigidState {
  Vec3 position = Vec3::Zero();      // m
  Vec3 velocity = Vec3::Zero();      // m/s
  Vec3 acceleration = Vec3::Zero();  // m/s^2, as of last propagation
  Quat attitude = Quat::Identity();
  Vec3 angular_velocity = Vec3::Zero();  // rad/s body frame
};

// Four actuator setpoints in microseconds, clamped to the PWM range.
struct ControlInput {
  Rotor4 setpoint_us{1000, 1000, 1000, 1000};

  void clamp(const PhysicalParams& p);
};

// Relative thrust estimates per rotor, plus the previous step for the rotor
// acceleration proxy.
struct ThrustState {
  Rotor4 thrust{0, 0, 0, 0};
  Rotor4 previous{0, 0, 0, 0};
  bool initialized = false;

  double total() const { return thrust[0] + thrust[1] + thrust[2] + thrust[3]; }
};

struct BatteryState {
  double voltage = 16.0;  // V under load
  double current = 0.0;   // A
};

struct AirState {
  Vec3 wind = Vec3::Zero();  // m/s NED
  double density = 1.225;    // kg/m^3
};

// Force (as body-frame acceleration) and torque produced by the rotors.
struct ControlWrench {
  Vec3 accel = Vec3::Zero();   // m/s^2 body frame, along -z
  Vec3 torque = Vec3::Zero();  // N m body frame
};

Mat3 skew(const Vec3& v);

// Quaternion advance by a constant body rate over dt, renormalized.
Quat integrate_quat(const Quat& q, const Vec3& omega, double dt);

// ZYX Euler angles (roll, pitch, yaw) of a body->NED quaternion.
Vec3 quat_to_euler(const Quat& q);
double quat_yaw(const Quat& q);
Quat quat_from_euler(double roll, double pitch, double yaw);
double wrap_angle(double a);  // into (-pi, pi]

// Dimensionless thrust command from a PWM setpoint and the battery load
// state. With battery adjustment disabled the voltage factor is 1.
double normalized_thrust_setpoint(double setpoint_us, const BatteryState& bat,
                                  const PhysicalParams& p);

// First-order rotor response: thrust[i] <- a*thrust[i] + (1-a)*command[i]
// with a = exp(-dt/time_constant). The first call latches the command.
ThrustState update_thrust_estimate(const ThrustState& prev,
                                   const Rotor4& command, double dt,
                                   const PhysicalParams& p);

// Rotor wrench with squared rotor speed identified with relative thrust.
// The gyroscopic yaw term differentiates sqrt(thrust) as the speed proxy.
ControlWrench control_wrench(const ThrustState& thrust, double dt,
                             const PhysicalParams& p);

// Aerodynamic drag acceleration opposing the body-frame airspeed.
Vec3 drag_acceleration(const Vec3& airspeed_body, double density,
                       const PhysicalParams& p);

// Body-frame airspeed from inertial velocity and wind.
Vec3 relative_airspeed(const Quat& attitude, const Vec3& velocity,
                       const Vec3& wind);

// Rigid-body angular acceleration from momentum exchange and control torque.
Vec3 angular_acceleration(const Vec3& omega, const Vec3& torque,
                          const PhysicalParams& p);

// One semi-implicit Euler step of the rigid body under the given wrench.
RigidState propagate(const RigidState& state, const Vec3& ctrl_accel_body,
                     const Vec3& drag_accel_body, const Vec3& angular_accel,
                     double dt, const PhysicalParams& p);

// Per-rotor relative thrust that balances gravity, and the matching PWM.
double hover_thrust_per_rotor(const PhysicalParams& p);

}  // namespace vigil

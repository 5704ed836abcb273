#include "vigil/physmodel.hpp"

#include <cmath>
#include <sstream>

namespace vigil {

void PhysicalParams::validate() const {
  auto fail = [](const std::string& what) {
    throw ConfigError("physical params: " + what);
  };
  if (mass <= 0) fail("mass must be positive");
  if (arm_length <= 0) fail("arm_length must be positive");
  if (thrust_coeff <= 0) fail("thrust_coeff must be positive");
  if (time_constant <= 0) fail("time_constant must be positive");
  if (pwm_range <= 0) fail("pwm_range must be positive");
  if (voltage_ref <= 0) fail("voltage_ref must be positive");
  if (gravity <= 0) fail("gravity must be positive");
  Eigen::LLT<Mat3> llt(inertia);
  if (llt.info() != Eigen::Success)
    fail("inertia matrix must be positive definite");
  if (ballistic.z() != 0.0) fail("ballistic_z must be 0");
}

PhysicalParams PhysicalParams::from_config(const Config& cfg,
                                           const std::string& section) {
  auto key = [&section](const char* k) { return section + "." + k; };
  PhysicalParams p;
  p.mass = cfg.get_double(key("mass"), p.mass);
  p.arm_length = cfg.get_double(key("arm_length"), p.arm_length);
  p.inertia.setZero();
  p.inertia(0, 0) = cfg.get_double(key("inertia_xx"), 5.0e-3);
  p.inertia(1, 1) = cfg.get_double(key("inertia_yy"), 5.0e-3);
  p.inertia(2, 2) = cfg.get_double(key("inertia_zz"), 9.0e-3);
  p.inertia(0, 1) = p.inertia(1, 0) = cfg.get_double(key("inertia_xy"), 0.0);
  p.inertia(0, 2) = p.inertia(2, 0) = cfg.get_double(key("inertia_xz"), 0.0);
  p.inertia(1, 2) = p.inertia(2, 1) = cfg.get_double(key("inertia_yz"), 0.0);
  p.thrust_coeff = cfg.get_double(key("thrust_coeff"), p.thrust_coeff);
  p.torque_coeff = cfg.get_double(key("torque_coeff"), p.torque_coeff);
  p.rotor_gyro_coeff =
      cfg.get_double(key("rotor_gyro_coeff"), p.rotor_gyro_coeff);
  p.time_constant = cfg.get_double(key("time_constant"), p.time_constant);
  p.pwm_min = cfg.get_double(key("pwm_min"), p.pwm_min);
  p.pwm_range = cfg.get_double(key("pwm_range"), p.pwm_range);
  p.voltage_ref = cfg.get_double(key("voltage_ref"), p.voltage_ref);
  p.resistance_internal =
      cfg.get_double(key("resistance_internal"), p.resistance_internal);
  p.momentum_drag = cfg.get_double(key("momentum_drag"), p.momentum_drag);
  p.ballistic.x() = cfg.get_double(key("ballistic_x"), p.ballistic.x());
  p.ballistic.y() = cfg.get_double(key("ballistic_y"), p.ballistic.y());
  p.ballistic.z() = 0.0;
  p.gravity = cfg.get_double(key("gravity"), p.gravity);
  p.fidelity.battery_adjustment =
      cfg.get_bool(key("enable_battery_adjustment"), true);
  p.fidelity.rotor_lag = cfg.get_bool(key("enable_rotor_lag"), true);
  p.fidelity.rotor_gyro = cfg.get_bool(key("enable_rotor_gyro"), true);
  p.fidelity.drag = cfg.get_bool(key("enable_drag"), true);
  p.validate();
  return p;
}

std::string PhysicalParams::to_config_text(const std::string& section) const {
  std::ostringstream out;
  out.precision(12);
  out << "[" << section << "]\n";
  out << "mass = " << mass << "\n";
  out << "arm_length = " << arm_length << "\n";
  out << "inertia_xx = " << inertia(0, 0) << "\n";
  out << "inertia_yy = " << inertia(1, 1) << "\n";
  out << "inertia_zz = " << inertia(2, 2) << "\n";
  out << "inertia_xy = " << inertia(0, 1) << "\n";
  out << "inertia_xz = " << inertia(0, 2) << "\n";
  out << "inertia_yz = " << inertia(1, 2) << "\n";
  out << "thrust_coeff = " << thrust_coeff << "\n";
  out << "torque_coeff = " << torque_coeff << "\n";
  out << "rotor_gyro_coeff = " << rotor_gyro_coeff << "\n";
  out << "time_constant = " << time_constant << "\n";
  out << "pwm_min = " << pwm_min << "\n";
  out << "pwm_range = " << pwm_range << "\n";
  out << "voltage_ref = " << voltage_ref << "\n";
  out << "resistance_internal = " << resistance_internal << "\n";
  out << "momentum_drag = " << momentum_drag << "\n";
  out << "ballistic_x = " << ballistic.x() << "\n";
  out << "ballistic_y = " << ballistic.y() << "\n";
  out << "gravity = " << gravity << "\n";
  return out.str();
}

void ControlInput::clamp(const PhysicalParams& p) {
  for (double& s : setpoint_us) {
    s = std::min(std::max(s, p.pwm_min), p.pwm_min + p.pwm_range);
  }
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(),  //
      v.z(), 0, -v.x(),   //
      -v.y(), v.x(), 0;
  return m;
}

Quat integrate_quat(const Quat& q, const Vec3& omega, double dt) {
  const double angle = omega.norm() * dt;
  Quat dq;
  if (angle < 1e-12) {
    Vec3 half = 0.5 * omega * dt;
    dq = Quat(1.0, half.x(), half.y(), half.z());
  } else {
    Vec3 axis = omega.normalized();
    dq = Quat(Eigen::AngleAxisd(angle, axis));
  }
  Quat out = q * dq;
  out.normalize();
  return out;
}

Vec3 quat_to_euler(const Quat& q) {
  double roll = std::atan2(2 * (q.w() * q.x() + q.y() * q.z()),
                           1 - 2 * (q.x() * q.x() + q.y() * q.y()));
  double sinp = 2 * (q.w() * q.y() - q.z() * q.x());
  sinp = std::clamp(sinp, -1.0, 1.0);
  double pitch = std::asin(sinp);
  double yaw = std::atan2(2 * (q.w() * q.z() + q.x() * q.y()),
                          1 - 2 * (q.y() * q.y() + q.z() * q.z()));
  return Vec3(roll, pitch, yaw);
}

double quat_yaw(const Quat& q) { return quat_to_euler(q).z(); }

Quat quat_from_euler(double roll, double pitch, double yaw) {
  return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
              Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
              Eigen::AngleAxisd(roll, Vec3::UnitX()));
}

double wrap_angle(double a) {
  while (a > M_PI) a -= 2 * M_PI;
  while (a <= -M_PI) a += 2 * M_PI;
  return a;
}

double normalized_thrust_setpoint(double setpoint_us, const BatteryState& bat,
                                  const PhysicalParams& p) {
  if (p.pwm_range <= 0 || p.voltage_ref <= 0)
    throw ConfigError("normalized_thrust_setpoint: invalid pwm/voltage config");
  double duty = (setpoint_us - p.pwm_min) / p.pwm_range;
  double volt = 1.0;
  if (p.fidelity.battery_adjustment) {
    volt = (bat.voltage + p.resistance_internal * bat.current) / p.voltage_ref;
  }
  return std::max(0.0, duty * volt);
}

ThrustState update_thrust_estimate(const ThrustState& prev,
                                   const Rotor4& command, double dt,
                                   const PhysicalParams& p) {
  ThrustState next;
  next.initialized = true;
  if (!prev.initialized) {
    next.thrust = command;
    next.previous = command;
    return next;
  }
  double alpha =
      p.fidelity.rotor_lag ? std::exp(-dt / p.time_constant) : 0.0;
  for (int i = 0; i < kRotorCount; ++i) {
    next.previous[i] = prev.thrust[i];
    next.thrust[i] =
        std::max(0.0, alpha * prev.thrust[i] + (1.0 - alpha) * command[i]);
  }
  return next;
}

ControlWrench control_wrench(const ThrustState& thrust, double dt,
                             const PhysicalParams& p) {
  const Rotor4& t = thrust.thrust;
  ControlWrench w;
  double total = t[0] + t[1] + t[2] + t[3];
  // Thrust acts along body -z so that level hover cancels NED +z gravity.
  w.accel = (p.thrust_coeff / p.mass) * total * Vec3(0, 0, -1);

  double roll = p.thrust_coeff * p.arm_length * (t[1] + t[2] - t[0] - t[3]);
  double pitch = p.thrust_coeff * p.arm_length * (t[0] + t[2] - t[1] - t[3]);
  double yaw = p.torque_coeff * (t[0] + t[1] - t[2] - t[3]);
  if (p.fidelity.rotor_gyro && p.rotor_gyro_coeff != 0.0 && dt > 0) {
    // Rotor speed proxy is sqrt(relative thrust); differentiate it.
    auto rate = [&](int i) {
      return (std::sqrt(std::max(0.0, t[i])) -
              std::sqrt(std::max(0.0, thrust.previous[i]))) /
             dt;
    };
    yaw += p.rotor_gyro_coeff * (rate(0) + rate(1) - rate(2) - rate(3));
  }
  w.torque = Vec3(roll, pitch, yaw);
  return w;
}

Vec3 drag_acceleration(const Vec3& airspeed_body, double density,
                       const PhysicalParams& p) {
  if (!p.fidelity.drag) return Vec3::Zero();
  Vec3 linear = p.momentum_drag * airspeed_body;
  Vec3 quadratic = 0.5 * density * airspeed_body.norm() *
                   p.ballistic.cwiseProduct(airspeed_body);
  return -(linear + quadratic);
}

Vec3 relative_airspeed(const Quat& attitude, const Vec3& velocity,
                       const Vec3& wind) {
  return attitude.conjugate() * (velocity - wind);
}

Vec3 angular_acceleration(const Vec3& omega, const Vec3& torque,
                          const PhysicalParams& p) {
  Eigen::FullPivLU<Mat3> lu(p.inertia);
  if (!lu.isInvertible())
    throw ConfigError("angular_acceleration: singular inertia matrix");
  return lu.solve(skew(p.inertia * omega) * omega + torque);
}

RigidState propagate(const RigidState& state, const Vec3& ctrl_accel_body,
                     const Vec3& drag_accel_body, const Vec3& angular_accel,
                     double dt, const PhysicalParams& p) {
  RigidState next = state;
  next.acceleration = p.gravity * Vec3(0, 0, 1) +
                      state.attitude * (ctrl_accel_body + drag_accel_body);
  next.velocity = state.velocity + next.acceleration * dt;
  next.position = state.position + next.velocity * dt;
  next.angular_velocity = state.angular_velocity + angular_accel * dt;
  next.attitude = integrate_quat(state.attitude, state.angular_velocity, dt);
  return next;
}

double hover_thrust_per_rotor(const PhysicalParams& p) {
  return p.mass * p.gravity / (p.thrust_coeff * kRotorCount);
}

}  // namespace vigil

#include "vigil/simworld.hpp"

#include <cmath>

namespace vigil {

Vec3 WindModel::step(std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  for (int ax = 0; ax < 3; ++ax) {
    if (sigma[ax] <= 0.0) continue;
    double per_step = sigma[ax] / std::sqrt(rate_hz * time_scale);
    state[ax] += per_step * unit(rng);
  }
  return current();
}

SensorSuite SensorSuite::standard(const SensorNoise& noise) {
  SensorSuite s;
  s.noise_ = noise;
  int id = 0;
  for (int i = 0; i < 3; ++i)
    s.sensors_.push_back({id++, SensorType::Gyro, 250.0, noise.gyro});
  for (int i = 0; i < 3; ++i)
    s.sensors_.push_back({id++, SensorType::Accel, 250.0, noise.accel});
  s.sensors_.push_back({id++, SensorType::Gps, 10.0, noise.gps_pos});
  for (int i = 0; i < 2; ++i)
    s.sensors_.push_back({id++, SensorType::Baro, 50.0, noise.baro});
  for (int i = 0; i < 2; ++i)
    s.sensors_.push_back({id++, SensorType::Mag, 50.0, noise.mag});
  return s;
}

std::vector<int> SensorSuite::instances_of(SensorType type) const {
  std::vector<int> out;
  for (const auto& s : sensors_) {
    if (s.type == type) out.push_back(s.instance_id);
  }
  return out;
}

std::vector<Measurement> SensorSuite::sample(
    const RigidState& truth, const Vec3& specific_force_body,
    const AirState& air, const BatteryState&, long tick_index,
    double base_rate_hz, double t, std::mt19937_64& rng) const {
  std::vector<Measurement> out;
  std::normal_distribution<double> unit(0.0, 1.0);
  auto noisy = [&](double v, double std) {
    return std > 0 ? v + std * unit(rng) : v;
  };

  for (const auto& s : sensors_) {
    long period = std::lround(base_rate_hz / s.rate_hz);
    if (period <= 0) period = 1;
    if (tick_index % period != 0) continue;

    Measurement m;
    m.instance_id = s.instance_id;
    m.type = s.type;
    m.t = t;
    switch (s.type) {
      case SensorType::Gyro:
        for (int ax = 0; ax < 3; ++ax)
          m.values.push_back(noisy(truth.angular_velocity[ax], s.noise_std));
        break;
      case SensorType::Accel:
        for (int ax = 0; ax < 3; ++ax)
          m.values.push_back(noisy(specific_force_body[ax], s.noise_std));
        break;
      case SensorType::Gps:
        for (int ax = 0; ax < 3; ++ax)
          m.values.push_back(noisy(truth.position[ax], noise_.gps_pos));
        for (int ax = 0; ax < 3; ++ax)
          m.values.push_back(noisy(truth.velocity[ax], noise_.gps_vel));
        break;
      case SensorType::Baro:
        m.values.push_back(noisy(-truth.position.z(), s.noise_std));
        m.values.push_back(air.density);
        break;
      case SensorType::Mag:
        m.values.push_back(
            wrap_angle(noisy(quat_yaw(truth.attitude), s.noise_std)));
        break;
    }
    out.push_back(std::move(m));
  }
  return out;
}

MissionKind mission_kind_from_string(const std::string& name) {
  if (name == "hovering" || name == "hover") return MissionKind::Hovering;
  if (name == "moving") return MissionKind::Moving;
  if (name == "maneuver") return MissionKind::Maneuver;
  if (name == "sysid") return MissionKind::SysId;
  throw ConfigError("unknown mission kind '" + name + "'");
}

std::string to_string(MissionKind kind) {
  switch (kind) {
    case MissionKind::Hovering: return "hovering";
    case MissionKind::Moving: return "moving";
    case MissionKind::Maneuver: return "maneuver";
    case MissionKind::SysId: return "sysid";
  }
  return "?";
}

Mission mission_waypoints(MissionKind kind) {
  Mission m;
  m.kind = kind;
  switch (kind) {
    case MissionKind::Hovering:
      m.waypoints.push_back({Vec3(0, 0, -15), 0});
      m.waypoints.push_back({Vec3(10, 10, -15), 300.0});
      m.waypoints.push_back({Vec3(0, 0, -15), 0});
      m.attack_waypoint = 1;
      break;
    case MissionKind::Moving: {
      m.waypoints.push_back({Vec3(0, 0, -50), 0});
      m.waypoints.push_back({Vec3(10, 10, -50), 0});
      double leg = 1000.0 / std::sqrt(2.0);
      m.waypoints.push_back({Vec3(10 + leg, 10 + leg, -50), 0});
      m.waypoints.push_back({Vec3(0, 0, -50), 0});
      m.attack_waypoint = 1;
      break;
    }
    case MissionKind::Maneuver: {
      // Equilateral triangle, edge 2.5 m, direction alternating each lap.
      Vec3 v0(0, 0, -15);
      Vec3 v1(2.5, 0, -15);
      Vec3 v2(1.25, 2.5 * std::sqrt(3.0) / 2.0, -15);
      m.waypoints.push_back({v0, 0});
      for (int lap = 0; lap < 10; ++lap) {
        if (lap % 2 == 0) {
          m.waypoints.push_back({v1, 0});
          m.waypoints.push_back({v2, 0});
        } else {
          m.waypoints.push_back({v2, 0});
          m.waypoints.push_back({v1, 0});
        }
        m.waypoints.push_back({v0, 0});
      }
      m.attack_waypoint = 2;
      break;
    }
    case MissionKind::SysId:
      m.waypoints.push_back({Vec3(0, 0, -20), 0});
      m.attack_waypoint = 0;
      break;
  }
  return m;
}

Rotor4 mix_wrench(const WrenchCommand& w) {
  return Rotor4{
      0.25 * (w.thrust - w.roll + w.pitch + w.yaw),
      0.25 * (w.thrust + w.roll - w.pitch + w.yaw),
      0.25 * (w.thrust + w.roll + w.pitch - w.yaw),
      0.25 * (w.thrust - w.roll - w.pitch - w.yaw),
  };
}

WrenchCommand wrench_of_thrusts(const Rotor4& t) {
  WrenchCommand w;
  w.thrust = t[0] + t[1] + t[2] + t[3];
  w.roll = t[1] + t[2] - t[0] - t[3];
  w.pitch = t[0] + t[2] - t[1] - t[3];
  w.yaw = t[0] + t[1] - t[2] - t[3];
  return w;
}

namespace {

Vec3 clamp_xy_norm(Vec3 v, double limit) {
  double n = std::hypot(v.x(), v.y());
  if (n > limit) {
    v.x() *= limit / n;
    v.y() *= limit / n;
  }
  return v;
}

}  // namespace

ControlInput controller_step(const RigidState& estimate,
                             const ControllerSetpoint& target,
                             ControllerState& ctl, double dt,
                             const PhysicalParams& params,
                             const BatteryState& battery) {
  const ControllerGains& g = ctl.gains;

  Vec3 vel_sp = target.velocity
                    ? *target.velocity
                    : g.pos_p * (target.position - estimate.position);
  vel_sp = clamp_xy_norm(vel_sp, g.max_vel_xy);
  vel_sp.z() = std::clamp(vel_sp.z(), -g.max_vel_z, g.max_vel_z);

  Vec3 vel_err = vel_sp - estimate.velocity;
  ctl.vel_integral += vel_err * dt;
  double i_limit = 2.0 / std::max(g.vel_i, 1e-6);
  for (int ax = 0; ax < 3; ++ax)
    ctl.vel_integral[ax] = std::clamp(ctl.vel_integral[ax], -i_limit, i_limit);

  Vec3 accel_sp = g.vel_p * vel_err + g.vel_i * ctl.vel_integral;
  accel_sp = clamp_xy_norm(accel_sp, g.max_accel_xy);
  accel_sp.z() = std::clamp(accel_sp.z(), -6.0, 6.0);

  // Desired specific force; thrust points along body -z.
  Vec3 f_des = accel_sp - params.gravity * Vec3(0, 0, 1);
  f_des.z() = std::min(f_des.z(), -2.0);
  double thrust_total =
      params.mass * f_des.norm() / params.thrust_coeff;
  thrust_total = std::clamp(thrust_total, 0.0, 4.0);

  if (target.yaw_rate) {
    ctl.yaw_setpoint = wrap_angle(ctl.yaw_setpoint + *target.yaw_rate * dt);
  }
  Vec3 z_body = -f_des.normalized();
  Vec3 x_heading(std::cos(ctl.yaw_setpoint), std::sin(ctl.yaw_setpoint), 0);
  Vec3 y_body = z_body.cross(x_heading);
  if (y_body.norm() < 1e-6) y_body = Vec3(0, 1, 0);
  y_body.normalize();
  Vec3 x_body = y_body.cross(z_body);
  Mat3 rot_des;
  rot_des.col(0) = x_body;
  rot_des.col(1) = y_body;
  rot_des.col(2) = z_body;
  Quat q_des(rot_des);

  Quat q_err = estimate.attitude.conjugate() * q_des;
  if (q_err.w() < 0) q_err.coeffs() = -q_err.coeffs();
  Vec3 rate_sp = g.att_p * 2.0 * q_err.vec();
  for (int ax = 0; ax < 3; ++ax)
    rate_sp[ax] = std::clamp(rate_sp[ax], -g.max_rate, g.max_rate);

  Vec3 rate_err = rate_sp - estimate.angular_velocity;
  ctl.rate_integral += rate_err * dt;
  double ri_limit = 1.0 / std::max(g.rate_i, 1e-6);
  for (int ax = 0; ax < 3; ++ax)
    ctl.rate_integral[ax] =
        std::clamp(ctl.rate_integral[ax], -ri_limit, ri_limit);

  Vec3 torque = params.inertia *
                (g.rate_p * rate_err + g.rate_i * ctl.rate_integral);

  WrenchCommand w;
  w.roll = torque.x() / (params.thrust_coeff * params.arm_length);
  w.pitch = torque.y() / (params.thrust_coeff * params.arm_length);
  w.yaw = torque.z() / params.torque_coeff;
  w.thrust = thrust_total;
  Rotor4 thrusts = mix_wrench(w);

  // Invert the battery-adjusted normalization so the plant realizes the
  // commanded relative thrust.
  double volt_factor = 1.0;
  if (params.fidelity.battery_adjustment) {
    volt_factor = (battery.voltage +
                   params.resistance_internal * battery.current) /
                  params.voltage_ref;
  }
  ControlInput input;
  for (int i = 0; i < kRotorCount; ++i) {
    double duty = thrusts[i] / std::max(volt_factor, 1e-3);
    input.setpoint_us[i] = params.pwm_min + params.pwm_range * duty;
  }
  input.clamp(params);
  return input;
}

Plant::Plant(const PhysicalParams& params, const RigidState& initial)
    : params_(params), state_(initial) {
  params_.fidelity = ModelFidelity::full();  // the plant is always physical
}

void Plant::step(const ControlInput& input, const AirState& air,
                 const BatteryState& battery, double dt) {
  Rotor4 command;
  for (int i = 0; i < kRotorCount; ++i)
    command[i] =
        normalized_thrust_setpoint(input.setpoint_us[i], battery, params_);
  thrust_ = update_thrust_estimate(thrust_, command, dt, params_);
  ControlWrench wrench = control_wrench(thrust_, dt, params_);

  // Classic RK4 over [p, v, q, w] with the wrench held for the tick.
  struct Deriv {
    Vec3 dp, dv, dw;
    Eigen::Vector4d dq;
  };
  auto quat_vec = [](const Quat& q) {
    return Eigen::Vector4d(q.w(), q.x(), q.y(), q.z());
  };
  auto deriv = [&](const Vec3& v, const Eigen::Vector4d& qv, const Vec3& w) {
    Quat q(qv[0], qv[1], qv[2], qv[3]);
    q.normalize();
    Vec3 airspeed = relative_airspeed(q, v, air.wind);
    Vec3 drag = drag_acceleration(airspeed, air.density, params_);
    Deriv d;
    d.dp = v;
    d.dv = params_.gravity * Vec3(0, 0, 1) + q * (wrench.accel + drag);
    Quat omega_q(0, w.x(), w.y(), w.z());
    Quat qdot = q * omega_q;
    d.dq = 0.5 * Eigen::Vector4d(qdot.w(), qdot.x(), qdot.y(), qdot.z());
    d.dw = angular_acceleration(w, wrench.torque, params_);
    return d;
  };

  Vec3 p0 = state_.position, v0 = state_.velocity, w0 = state_.angular_velocity;
  Eigen::Vector4d q0 = quat_vec(state_.attitude);

  Deriv k1 = deriv(v0, q0, w0);
  Deriv k2 = deriv(v0 + 0.5 * dt * k1.dv, q0 + 0.5 * dt * k1.dq,
                   w0 + 0.5 * dt * k1.dw);
  Deriv k3 = deriv(v0 + 0.5 * dt * k2.dv, q0 + 0.5 * dt * k2.dq,
                   w0 + 0.5 * dt * k2.dw);
  Deriv k4 = deriv(v0 + dt * k3.dv, q0 + dt * k3.dq, w0 + dt * k3.dw);

  state_.position =
      p0 + dt / 6.0 * (k1.dp + 2 * k2.dp + 2 * k3.dp + k4.dp);
  state_.velocity =
      v0 + dt / 6.0 * (k1.dv + 2 * k2.dv + 2 * k3.dv + k4.dv);
  Eigen::Vector4d q1 =
      q0 + dt / 6.0 * (k1.dq + 2 * k2.dq + 2 * k3.dq + k4.dq);
  state_.attitude = Quat(q1[0], q1[1], q1[2], q1[3]);
  state_.attitude.normalize();
  state_.angular_velocity =
      w0 + dt / 6.0 * (k1.dw + 2 * k2.dw + 2 * k3.dw + k4.dw);

  // Ground plane: the vehicle rests at z = 0 until thrust lifts it.
  if (state_.position.z() > 0.0) {
    state_.position.z() = 0.0;
    if (state_.velocity.z() > 0.0) state_.velocity.z() = 0.0;
  }

  Vec3 airspeed =
      relative_airspeed(state_.attitude, state_.velocity, air.wind);
  Vec3 drag = drag_acceleration(airspeed, air.density, params_);
  state_.acceleration = params_.gravity * Vec3(0, 0, 1) +
                        state_.attitude * (wrench.accel + drag);
}

Vec3 Plant::specific_force(const AirState& air) const {
  ControlWrench wrench = control_wrench(thrust_, 1.0, params_);
  Vec3 airspeed =
      relative_airspeed(state_.attitude, state_.velocity, air.wind);
  return wrench.accel + drag_acceleration(airspeed, air.density, params_);
}

}  // namespace vigil

#include "vigil/estimator.hpp"

#include <algorithm>
#include <cmath>

namespace vigil {

int buffer_size(double hold_time, double rate_hz) {
  if (hold_time < 0 || rate_hz <= 0)
    throw ConfigError("buffer_size: invalid hold time or rate");
  return 1 + static_cast<int>(std::ceil(hold_time * rate_hz - 1e-9));
}

void FrontEnd::configure(const EstimatorOptions& opts,
                         const std::vector<int>& gyro_instances) {
  opts_ = opts;
  omega_ = Vec3::Zero();
  omega_cs_ = Vec3::Zero();
  fusion_log_.clear();
  measurement_buffers_.clear();
  int capacity = buffer_size(opts.buffer_hold_time, opts.imu_rate_hz);
  estimate_buffer_ = FifoBuffer<Vec3>(capacity);
  for (int id : gyro_instances) {
    measurement_buffers_[id] = FifoBuffer<Vec3>(capacity);
  }
}

void FrontEnd::predict(const Vec3& torque, const ThrustState&, double dt,
                       const PhysicalParams& params) {
  omega_ += angular_acceleration(omega_, torque, params) * dt;
  omega_cs_ += angular_acceleration(omega_cs_, torque, params) * dt;
}

void FrontEnd::correct(const std::vector<ImuSample>& validated,
                       const std::vector<int>& flagged, double t) {
  for (int id : flagged) {
    auto it = measurement_buffers_.find(id);
    if (it != measurement_buffers_.end()) it->second.clear();
  }

  const double half_period = 0.5 / opts_.imu_rate_hz;
  const bool delayed = opts_.buffer_hold_time > 0.0;

  if (!delayed) {
    // Degenerate variant: fuse the newest measurement directly.
    if (!validated.empty()) {
      const ImuSample& s = validated.front();
      Vec3 residual = s.gyro - omega_;
      omega_ += opts_.fusion_gain * residual;
      omega_cs_ += opts_.fusion_gain * (s.gyro - omega_cs_);
      fusion_log_.push_back({s.instance_id, s.t, t});
    }
    return;
  }

  // Run the delay lines: the estimate and every instance buffer advance one
  // slot per tick, so the popped entries are time-aligned by construction.
  std::map<int, FifoBuffer<Vec3>::Entry> popped;
  for (const ImuSample& s : validated) {
    auto it = measurement_buffers_.find(s.instance_id);
    if (it == measurement_buffers_.end()) continue;
    auto old = it->second.push(s.t, s.gyro);
    if (old) popped[s.instance_id] = *old;
  }
  auto old_estimate = estimate_buffer_.push(t, omega_);

  if (old_estimate) {
    for (auto& [id, entry] : popped) {
      if (std::fabs(entry.t - old_estimate->t) > half_period) continue;
      Vec3 residual = entry.value - old_estimate->value;
      Vec3 correction = opts_.fusion_gain * residual;
      omega_ += correction;
      for (auto& buffered : estimate_buffer_) buffered.value += correction;
      fusion_log_.push_back({id, entry.t, t});
      break;  // one fused measurement per tick
    }
  }

  if (!validated.empty()) {
    const ImuSample& newest = validated.front();
    omega_cs_ += opts_.fusion_gain * (newest.gyro - omega_cs_);
  }
}

void WindEstimator::update(const Vec3& specific_force_meas,
                           const Vec3& ctrl_accel_body, const Quat& attitude,
                           const Vec3& velocity, double density,
                           const PhysicalParams& params, double dt) {
  if (!params.fidelity.drag) return;

  Vec3 drag_meas = specific_force_meas - ctrl_accel_body;

  // Invert the drag law for the horizontal airspeed; the vertical ballistic
  // coefficient is zero so the z axis carries no usable signal.
  Vec3 airspeed = relative_airspeed(attitude, velocity, wind_);
  for (int iter = 0; iter < 3; ++iter) {
    double speed = airspeed.norm();
    for (int ax = 0; ax < 2; ++ax) {
      double denom = params.momentum_drag +
                     0.5 * density * params.ballistic[ax] * speed;
      denom = std::max(denom, 1e-4);
      airspeed[ax] = std::clamp(-drag_meas[ax] / denom, -60.0, 60.0);
    }
  }

  Vec3 wind_new = velocity - attitude * airspeed;
  double alpha = std::clamp(dt / tau_, 0.0, 1.0);
  wind_.x() += alpha * (wind_new.x() - wind_.x());
  wind_.y() += alpha * (wind_new.y() - wind_.y());
  wind_.z() = 0.0;
}

void ReferenceEstimator::configure(const EstimatorOptions& opts,
                                   const PhysicalParams& params,
                                   const std::vector<int>& gyro_instances) {
  opts_ = opts;
  params_ = params;
  front_end_.configure(opts, gyro_instances);
  wind_estimator_.configure(opts.wind_tau);
}

void ReferenceEstimator::reset(const RigidState& initial,
                               const BatteryState&, double density,
                               double t) {
  state_ = ReferenceState{};
  state_.t = t;
  state_.position = initial.position;
  state_.velocity = initial.velocity;
  state_.attitude = initial.attitude;
  state_.angular_velocity = initial.angular_velocity;
  state_.angular_velocity_cs = initial.angular_velocity;
  state_.air_density = density;
  thrust_ = ThrustState{};
  wind_estimator_.reset(Vec3::Zero());
  time_ = t;
}

const ReferenceState& ReferenceEstimator::predict(const ControlInput& input,
                                                  const BatteryState& battery,
                                                  double dt) {
  Rotor4 command;
  for (int i = 0; i < kRotorCount; ++i) {
    command[i] = normalized_thrust_setpoint(input.setpoint_us[i], battery,
                                            params_);
  }
  thrust_ = update_thrust_estimate(thrust_, command, dt, params_);
  ControlWrench wrench = control_wrench(thrust_, dt, params_);
  last_ctrl_accel_ = wrench.accel;

  front_end_.predict(wrench.torque, thrust_, dt, params_);
  state_.angular_velocity = front_end_.estimate();
  state_.angular_velocity_cs = front_end_.estimate_newest();

  state_.attitude =
      integrate_quat(state_.attitude, state_.angular_velocity, dt);

  Vec3 airspeed = relative_airspeed(state_.attitude, state_.velocity,
                                    state_.wind);
  Vec3 drag = drag_acceleration(airspeed, state_.air_density, params_);
  state_.specific_force = wrench.accel + drag;

  Vec3 accel = params_.gravity * Vec3(0, 0, 1) +
               state_.attitude * state_.specific_force;
  state_.velocity += accel * dt;
  state_.position += state_.velocity * dt;

  time_ += dt;
  state_.t = time_;
  return state_;
}

void ReferenceEstimator::correct(const std::vector<ImuSample>& validated_gyro,
                                 const std::vector<int>& flagged_gyro,
                                 const BackEndCorrections& corrections,
                                 double t) {
  front_end_.correct(validated_gyro, flagged_gyro, t);
  state_.angular_velocity = front_end_.estimate();
  state_.angular_velocity_cs = front_end_.estimate_newest();

  if (corrections.gps_position) {
    Vec3 innov = *corrections.gps_position - state_.position;
    state_.position.x() += opts_.gps_pos_gain * innov.x();
    state_.position.y() += opts_.gps_pos_gain * innov.y();
  }
  if (corrections.baro_altitude) {
    double z_meas = -*corrections.baro_altitude;
    state_.position.z() += opts_.baro_gain * (z_meas - state_.position.z());
  }
  if (corrections.gps_velocity) {
    state_.velocity +=
        opts_.gps_vel_gain * (*corrections.gps_velocity - state_.velocity);
  }
  if (corrections.mag_heading) {
    double innov = wrap_angle(*corrections.mag_heading - quat_yaw(state_.attitude));
    Quat dq(Eigen::AngleAxisd(opts_.mag_gain * innov, Vec3(0, 0, 1)));
    state_.attitude = dq * state_.attitude;
    state_.attitude.normalize();
  }
  if (corrections.accel_specific_force) {
    double dt = 1.0 / opts_.imu_rate_hz;
    wind_estimator_.update(*corrections.accel_specific_force,
                           last_ctrl_accel_, state_.attitude, state_.velocity,
                           state_.air_density, params_, dt);
  }
  state_.wind = wind_estimator_.wind();
}

}  // namespace vigil

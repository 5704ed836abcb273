#include "vigil/flight.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace vigil {

ScenarioOptions ScenarioOptions::from_file(const std::string& path) {
  return from_config(Config::from_file(path));
}

ScenarioOptions ScenarioOptions::from_config(const Config& cfg) {
  ScenarioOptions o;
  o.mission = mission_kind_from_string(
      cfg.get_string("scenario.mission", "hovering"));
  o.seed = static_cast<uint64_t>(cfg.get_double("scenario.seed", 1));
  o.control_rate_hz = cfg.get_double("scenario.control_rate", 250.0);
  o.max_flight_s = cfg.get_double("scenario.max_flight_s", 600.0);
  o.waypoint_radius = cfg.get_double("scenario.waypoint_radius", 1.0);
  o.divergence_stop_m = cfg.get_double("scenario.divergence_stop", 5.0);
  o.alarm_delay_s = cfg.get_double("scenario.alarm_delay", 0.0);
  o.recovery_enabled = cfg.get_bool("scenario.recovery", true);
  o.log_detector_stats = cfg.get_bool("scenario.log_detector_stats", false);

  if (cfg.has("scenario.physical_params")) {
    Config pc = Config::from_file(
        cfg.resolve_path(cfg.get_string("scenario.physical_params")));
    o.plant_params = PhysicalParams::from_config(pc);
  } else {
    o.plant_params = PhysicalParams::from_config(cfg);  // inline [physical]
  }
  o.model_params = o.plant_params;
  if (cfg.get_string("scenario.model", "full") == "coarse")
    o.set_coarse_model();

  if (cfg.has("scenario.detector_params")) {
    Config dc = Config::from_file(
        cfg.resolve_path(cfg.get_string("scenario.detector_params")));
    o.detectors = DetectorTable::from_config(dc);
  } else {
    o.detectors = DetectorTable::from_config(cfg);
  }
  o.set_detector_kind(detector_kind_from_string(
      cfg.get_string("scenario.detector", "cs-ema")));

  auto mu = cfg.get_doubles("wind.mu", {0, 0, 0});
  auto sigma = cfg.get_doubles("wind.sigma", {6, 8, 0});
  o.wind.mean = Vec3(mu.at(0), mu.at(1), mu.at(2));
  o.wind.sigma = Vec3(sigma.at(0), sigma.at(1), sigma.at(2));
  o.wind.time_scale = cfg.get_double("wind.time_scale", 300.0);
  o.wind.rate_hz = o.control_rate_hz;

  o.noise.gyro = cfg.get_double("sensors.gyro_noise", o.noise.gyro);
  o.noise.accel = cfg.get_double("sensors.accel_noise", o.noise.accel);
  o.noise.gps_pos = cfg.get_double("sensors.gps_pos_noise", o.noise.gps_pos);
  o.noise.gps_vel = cfg.get_double("sensors.gps_vel_noise", o.noise.gps_vel);
  o.noise.baro = cfg.get_double("sensors.baro_noise", o.noise.baro);
  o.noise.mag = cfg.get_double("sensors.mag_noise", o.noise.mag);

  o.battery.voltage_full =
      cfg.get_double("battery.voltage_full", o.plant_params.voltage_ref);
  o.battery.resistance = cfg.get_double(
      "battery.resistance", o.plant_params.resistance_internal);
  o.battery.current_per_thrust =
      cfg.get_double("battery.current_per_thrust", 5.0);

  o.estimator.buffer_hold_time =
      cfg.get_double("estimator.buffer_hold_time", 0.5);
  o.estimator.imu_rate_hz = o.control_rate_hz;
  o.estimator.fusion_gain = cfg.get_double("estimator.fusion_gain", 0.5);
  o.estimator.gps_pos_gain = cfg.get_double("estimator.gps_pos_gain", 0.25);
  o.estimator.gps_vel_gain = cfg.get_double("estimator.gps_vel_gain", 0.25);
  o.estimator.baro_gain = cfg.get_double("estimator.baro_gain", 0.10);
  o.estimator.mag_gain = cfg.get_double("estimator.mag_gain", 0.10);
  o.estimator.wind_tau = cfg.get_double("estimator.wind_tau", 2.0);

  SensorSuite suite = SensorSuite::standard(o.noise);
  o.attacks = attacks_from_config(cfg, suite);
  return o;
}

void VanillaEstimator::reset(const RigidState& initial, double gravity) {
  estimate_ = initial;
  gravity_ = gravity;
}

void VanillaEstimator::step(const Inputs& in, double dt) {
  if (in.gyro) estimate_.angular_velocity = *in.gyro;
  estimate_.attitude =
      integrate_quat(estimate_.attitude, estimate_.angular_velocity, dt);

  Vec3 accel_ned = gravity_ * Vec3(0, 0, 1);
  if (in.specific_force) {
    accel_ned += estimate_.attitude * (*in.specific_force);
    // Quasi-static tilt correction from the measured gravity direction,
    // gated to near-1g conditions so maneuvers do not pollute the attitude.
    double g_mag = in.specific_force->norm();
    if (g_mag > 0.9 * gravity_ && g_mag < 1.1 * gravity_ &&
        estimate_.angular_velocity.norm() < 0.5) {
      Vec3 down_meas = -in.specific_force->normalized();
      Vec3 down_pred = estimate_.attitude.conjugate() * Vec3(0, 0, 1);
      Vec3 err = down_meas.cross(down_pred);  // body-frame small rotation
      Quat dq(1.0, 0.002 * err.x(), 0.002 * err.y(), 0.002 * err.z());
      estimate_.attitude = estimate_.attitude * dq;
      estimate_.attitude.normalize();
    }
  }
  estimate_.acceleration = accel_ned;
  estimate_.velocity += accel_ned * dt;
  estimate_.position += estimate_.velocity * dt;

  if (in.velocity)
    estimate_.velocity += 0.25 * (*in.velocity - estimate_.velocity);
  if (in.position_xy) {
    estimate_.position.x() +=
        0.25 * (in.position_xy->x() - estimate_.position.x());
    estimate_.position.y() +=
        0.25 * (in.position_xy->y() - estimate_.position.y());
  }
  if (in.altitude)
    estimate_.position.z() +=
        0.10 * (-*in.altitude - estimate_.position.z());
  if (in.heading) {
    double innov = wrap_angle(*in.heading - quat_yaw(estimate_.attitude));
    Quat dq(Eigen::AngleAxisd(0.05 * innov, Vec3(0, 0, 1)));
    estimate_.attitude = dq * estimate_.attitude;
    estimate_.attitude.normalize();
  }
}

namespace {

RigidState initial_state() {
  RigidState s;  // at rest on the pad, level, heading north
  return s;
}

}  // namespace

FlightRunner::FlightRunner(const ScenarioOptions& opts)
    : opts_(opts),
      dt_(1.0 / opts.control_rate_hz),
      rng_(opts.seed),
      plant_(opts.plant_params, initial_state()),
      wind_(opts.wind),
      suite_(SensorSuite::standard(opts.noise)),
      mission_(mission_waypoints(opts.mission)),
      injector_(opts.attacks, opts.detectors) {
  air_.wind = wind_.current();
  battery_ = opts_.battery.state(plant_.thrust());
  controller_.gains = opts_.gains;

  std::vector<int> gyro_ids = suite_.instances_of(SensorType::Gyro);
  estimator_.configure(opts_.estimator, opts_.model_params, gyro_ids);
  estimator_.reset(plant_.state(), battery_, air_.density, 0.0);
  vanilla_.reset(plant_.state(), opts_.plant_params.gravity);

  for (const auto& s : suite_.sensors()) {
    monitor_.register_instance(s.instance_id, s.type);
    switch (s.type) {
      case SensorType::Gyro:
        bank_.add_stream(s.instance_id, s.type, MeasuredState::AngularVelocity,
                         3, opts_.detectors.params(SensorType::Gyro,
                                                   MeasuredState::AngularVelocity));
        break;
      case SensorType::Accel:
        bank_.add_stream(s.instance_id, s.type, MeasuredState::SpecificForce,
                         3, opts_.detectors.params(SensorType::Accel,
                                                   MeasuredState::SpecificForce));
        break;
      case SensorType::Gps:
        bank_.add_stream(s.instance_id, s.type, MeasuredState::Position, 3,
                         opts_.detectors.params(SensorType::Gps,
                                                MeasuredState::Position));
        bank_.add_stream(s.instance_id, s.type, MeasuredState::Velocity, 3,
                         opts_.detectors.params(SensorType::Gps,
                                                MeasuredState::Velocity));
        break;
      case SensorType::Baro:
        bank_.add_stream(s.instance_id, s.type, MeasuredState::Altitude, 1,
                         opts_.detectors.params(SensorType::Baro,
                                                MeasuredState::Altitude));
        break;
      case SensorType::Mag:
        bank_.add_stream(s.instance_id, s.type, MeasuredState::Heading, 1,
                         opts_.detectors.params(SensorType::Mag,
                                                MeasuredState::Heading));
        break;
    }
  }
  monitor_.set_alarm_delay(opts_.alarm_delay_s);
  monitor_.set_enabled(opts_.recovery_enabled);

  for (const auto& s : suite_.sensors()) {
    artifacts_.instance_label[s.instance_id] = instance_label(s.instance_id);
    artifacts_.log.instance_labels.push_back(instance_label(s.instance_id));
  }
  for (const AttackSpec& a : opts_.attacks) {
    if (artifacts_.attack_start < 0 || a.start_time < artifacts_.attack_start)
      artifacts_.attack_start = a.start_time;
    for (int id : a.instances) artifacts_.attacked_instances.insert(id);
  }
  artifacts_.seed = opts_.seed;
  if (opts_.log_detector_stats) {
    for (const auto* s : bank_.streams()) {
      artifacts_.log.stat_labels.push_back(
          instance_label(s->key.instance_id) + "_" +
          to_string(s->key.state));
    }
  }
}

std::string FlightRunner::instance_label(int instance_id) const {
  for (const auto& s : suite_.sensors()) {
    if (s.instance_id != instance_id) continue;
    int ordinal = 0;
    for (const auto& other : suite_.sensors())
      if (other.type == s.type && other.instance_id < instance_id) ++ordinal;
    return to_string(s.type) + std::to_string(ordinal);
  }
  return "id" + std::to_string(instance_id);
}

RigidState FlightRunner::active_estimate() const {
  if (reference_control_) {
    const ReferenceState& r = estimator_.state();
    RigidState s;
    s.position = r.position;
    s.velocity = r.velocity;
    s.attitude = r.attitude;
    s.angular_velocity = r.angular_velocity;
    return s;
  }
  return vanilla_.estimate();
}

void FlightRunner::arm_detectors() {
  bank_.arm(time_);
  armed_at_ = time_;
  artifacts_.armed_at = time_;
  artifacts_.log.detectors_armed_at = time_;
}

ControllerSetpoint FlightRunner::current_setpoint(double t_script,
                                                  const RigidState& active) {
  ControllerSetpoint sp;
  if (opts_.mission == MissionKind::SysId && armed_at_ >= 0) {
    // Excitation script: horizontal speed sweeps, vertical thrust steps,
    // then yaw doublets. Identification needs all three in one record.
    double t = t_script;
    sp.position = mission_.waypoints.front().position;
    double vz_hold = std::clamp(
        0.95 * (sp.position.z() - active.position.z()), -1.5, 1.5);
    if (t < 40.0) {
      static const double vx[] = {3, -3, 6, -6, 0, 0, 0, 0};
      static const double vy[] = {0, 0, 0, 0, 3, -3, 6, -6};
      int block = std::min(7, static_cast<int>(t / 5.0));
      sp.velocity = Vec3(vx[block], vy[block], vz_hold);
    } else if (t < 56.0) {
      int block = static_cast<int>((t - 40.0) / 2.0);
      sp.velocity = Vec3(0, 0, block % 2 == 0 ? 1.5 : -1.5);
    } else if (t < 76.0) {
      int block = static_cast<int>((t - 56.0) / 1.0);
      sp.velocity = Vec3(0, 0, vz_hold);
      sp.yaw_rate = block % 2 == 0 ? 1.5 : -1.5;
    } else {
      mission_done_ = true;
      sp.velocity = Vec3(0, 0, vz_hold);
    }
    return sp;
  }
  sp.position = mission_.waypoints[waypoint_index_].position;
  return sp;
}

void FlightRunner::update_mission(const RigidState& active) {
  if (mission_done_) return;
  const Waypoint& wp = mission_.waypoints[waypoint_index_];
  double dist = (active.position - wp.position).norm();
  if (dist > opts_.waypoint_radius) return;

  if (waypoint_index_ == 0 && armed_at_ < 0) arm_detectors();

  if (wp.hover_s > 0 && dwell_until_ < 0) {
    dwell_until_ = time_ + wp.hover_s;
    return;
  }
  if (dwell_until_ >= 0 && time_ < dwell_until_) return;

  dwell_until_ = -1.0;
  if (opts_.mission == MissionKind::SysId) return;  // scripted from here on
  if (waypoint_index_ + 1 < mission_.waypoints.size()) {
    ++waypoint_index_;
  } else {
    mission_done_ = true;
  }
}

void FlightRunner::process_measurements(
    const std::vector<Measurement>& measurements) {
  const ReferenceState& ref = estimator_.state();

  auto trace_stealth = [this](const Measurement& m, MeasuredState state,
                              const std::vector<double>& r_cs,
                              const std::vector<double>& r_ema) {
    for (const AttackSpec& spec : opts_.attacks) {
      if (spec.deviation != DeviationKind::AdaptiveStealthy) continue;
      if (!spec.active(time_) || spec.sensor != m.type) continue;
      if (!std::count(spec.instances.begin(), spec.instances.end(),
                      m.instance_id))
        continue;
      int ax = spec.axes.front();
      double std = bank_.stream(m.instance_id, state)->params.noise_std;
      artifacts_.stealth_residuals[m.instance_id].emplace_back(
          std::fabs(r_cs[ax]) / std, std::fabs(r_ema[ax]) / std);
    }
  };

  for (const Measurement& m : measurements) {
    std::vector<double> r_cs, r_ema;
    MeasuredState state;
    switch (m.type) {
      case SensorType::Gyro: {
        state = MeasuredState::AngularVelocity;
        for (int ax = 0; ax < 3; ++ax) {
          r_cs.push_back(m.values[ax] - ref.angular_velocity_cs[ax]);
          r_ema.push_back(m.values[ax] - ref.angular_velocity[ax]);
        }
        break;
      }
      case SensorType::Accel: {
        state = MeasuredState::SpecificForce;
        for (int ax = 0; ax < 3; ++ax)
          r_cs.push_back(m.values[ax] - ref.specific_force[ax]);
        r_ema = r_cs;
        break;
      }
      case SensorType::Gps: {
        // Position stream first, velocity stream after.
        std::vector<double> pos, vel;
        for (int ax = 0; ax < 3; ++ax)
          pos.push_back(m.values[ax] - ref.position[ax]);
        for (int ax = 0; ax < 3; ++ax)
          vel.push_back(m.values[3 + ax] - ref.velocity[ax]);
        if (bank_.update(m.instance_id, MeasuredState::Position, pos, pos,
                         time_))
          monitor_.report_alarm(m.instance_id, time_);
        if (bank_.update(m.instance_id, MeasuredState::Velocity, vel, vel,
                         time_))
          monitor_.report_alarm(m.instance_id, time_);
        trace_stealth(m, MeasuredState::Position, pos, pos);
        continue;
      }
      case SensorType::Baro: {
        state = MeasuredState::Altitude;
        r_cs.push_back(m.values[0] - (-ref.position.z()));
        r_ema = r_cs;
        break;
      }
      case SensorType::Mag: {
        state = MeasuredState::Heading;
        r_cs.push_back(wrap_angle(m.values[0] - quat_yaw(ref.attitude)));
        r_ema = r_cs;
        break;
      }
      default:
        continue;
    }
    if (bank_.update(m.instance_id, state, r_cs, r_ema, time_))
      monitor_.report_alarm(m.instance_id, time_);
    trace_stealth(m, state, r_cs, r_ema);
  }

  // Statistic envelopes for offline threshold sweeps.
  if (bank_.armed()) {
    for (const auto* s : bank_.streams()) {
      double peak_c = 0, peak_e = 0, peak_w = 0;
      for (const auto& ax : s->axes) {
        peak_c = std::max(peak_c, ax.cusum);
        peak_e = std::max(peak_e, std::fabs(ax.ema));
        double wstat = s->params.kind == DetectorKind::L2Window
                           ? ax.window_sum / s->params.window_length
                           : ax.window_sum;
        peak_w = std::max(peak_w, wstat);
      }
      auto push = [&](int comp, double v) {
        auto& env = artifacts_.envelopes[{s->key.instance_id,
                                          static_cast<int>(s->key.state),
                                          comp}];
        if (env.empty() || v > env.back().second) env.emplace_back(time_, v);
      };
      push(0, peak_c);
      push(1, peak_e);
      push(2, peak_w);
    }
  }
}

void FlightRunner::check_terminal() {
  const RigidState& truth = plant_.state();
  Vec3 euler = quat_to_euler(truth.attitude);
  if (-truth.position.z() > 1.0) airborne_ = true;

  bool crash = std::fabs(euler.x()) > M_PI / 2 ||
               std::fabs(euler.y()) > M_PI / 2 ||
               (airborne_ && truth.position.z() > -0.05);
  if (crash) {
    finished_ = true;
    terminal_ = TerminalCondition::Crash;
    return;
  }
  double d = (truth.position - active_estimate().position).norm();
  if (airborne_ && d >= opts_.divergence_stop_m) {
    finished_ = true;
    terminal_ = TerminalCondition::Divergence;
    return;
  }
  if (mission_done_) {
    finished_ = true;
    terminal_ = TerminalCondition::MissionComplete;
    return;
  }
  if (time_ >= opts_.max_flight_s) {
    finished_ = true;
    terminal_ = TerminalCondition::TimeLimit;
  }
}

void FlightRunner::log_row(const std::vector<Measurement>& measurements) {
  FlightRow& r = held_;
  r.t = time_;
  r.attack_active = injector_.any_active(time_) ? 1 : 0;

  if (opts_.lean_log) {
    FlightRow lean;
    lean.t = time_;
    lean.attack_active = r.attack_active;
    lean.truth_position = plant_.state().position;
    lean.active_position = active_estimate().position;
    lean.reference_control = reference_control_ ? 1 : 0;
    artifacts_.log.rows.push_back(std::move(lean));
    return;
  }

  const RigidState& truth = plant_.state();
  r.truth_position = truth.position;
  r.truth_velocity = truth.velocity;
  r.truth_attitude = truth.attitude;
  r.truth_angular_velocity = truth.angular_velocity;

  const ReferenceState& ref = estimator_.state();
  r.ref_position = ref.position;
  r.ref_velocity = ref.velocity;
  r.ref_attitude = ref.attitude;
  r.ref_angular_velocity = ref.angular_velocity;
  r.ref_angular_velocity_cs = ref.angular_velocity_cs;
  r.ref_specific_force = ref.specific_force;
  r.ref_wind = ref.wind;

  r.active_position = active_estimate().position;
  r.actuator_us = last_input_.setpoint_us;

  r.gps_fresh = r.baro_fresh = r.mag_fresh = 0;
  std::vector<int> gyro0 = suite_.instances_of(SensorType::Gyro);
  std::vector<int> accel0 = suite_.instances_of(SensorType::Accel);
  std::vector<int> gps0 = suite_.instances_of(SensorType::Gps);
  std::vector<int> baro0 = suite_.instances_of(SensorType::Baro);
  std::vector<int> mag0 = suite_.instances_of(SensorType::Mag);
  for (const Measurement& m : measurements) {
    if (m.instance_id == gyro0.front())
      r.gyro0 = Vec3(m.values[0], m.values[1], m.values[2]);
    if (m.instance_id == accel0.front())
      r.accel0 = Vec3(m.values[0], m.values[1], m.values[2]);
    if (m.instance_id == gps0.front()) {
      r.gps_position = Vec3(m.values[0], m.values[1], m.values[2]);
      r.gps_velocity = Vec3(m.values[3], m.values[4], m.values[5]);
      r.gps_fresh = 1;
    }
    if (m.instance_id == baro0.front()) {
      r.baro0_altitude = m.values[0];
      r.baro0_density = m.values[1];
      r.baro_fresh = 1;
    }
    if (m.instance_id == mag0.front()) {
      r.mag0_heading = m.values[0];
      r.mag_fresh = 1;
    }
  }

  r.battery_voltage = battery_.voltage;
  r.battery_current = battery_.current;

  r.alarms.clear();
  for (const auto& s : suite_.sensors())
    r.alarms.push_back(bank_.instance_alarmed(s.instance_id) ? 1 : 0);

  auto label_of = [this](const SelectedSource& src) {
    if (src.source == SourceClass::Reference) return std::string("SE");
    return instance_label(src.instance_id);
  };
  r.src_omega = label_of(monitor_.select_source(RecoveredState::AngularVelocity));
  r.src_altitude = label_of(monitor_.select_source(RecoveredState::Altitude));
  r.src_hpos =
      label_of(monitor_.select_source(RecoveredState::HorizontalPosition));
  r.src_attitude = label_of(monitor_.select_source(RecoveredState::Attitude));
  r.reference_control = reference_control_ ? 1 : 0;

  if (opts_.log_detector_stats) {
    r.stats.clear();
    for (const auto* s : bank_.streams())
      r.stats.push_back(
          bank_.current_statistic(s->key.instance_id, s->key.state));
  }
  artifacts_.log.rows.push_back(r);
}

void FlightRunner::step() {
  if (finished_) return;

  // Controller on the freshest estimate, matching sources to health.
  RigidState active = active_estimate();
  update_mission(active);
  ControllerSetpoint sp =
      current_setpoint(time_ - std::max(armed_at_, 0.0), active);
  last_input_ = controller_step(active, sp, controller_, dt_,
                                opts_.plant_params, battery_);

  // World advances one control tick.
  battery_ = opts_.battery.state(plant_.thrust());
  air_.wind = wind_.step(rng_);
  plant_.step(last_input_, air_, battery_, dt_);
  time_ += dt_;
  ++tick_;

  // Defense-side model prediction driven by the same actuator setpoints.
  estimator_.predict(last_input_, battery_, dt_);

  // Sensors sample the new truth; attacks rewrite the streams in flight.
  Vec3 specific_force = plant_.specific_force(air_);
  std::vector<Measurement> measurements =
      suite_.sample(plant_.state(), specific_force, air_, battery_, tick_,
                    opts_.control_rate_hz, time_, rng_);
  for (Measurement& m : measurements)
    injector_.apply(m, estimator_.state(), bank_, time_);

  // Detection, isolation, then fusion of what remains validated.
  monitor_.step(time_);
  process_measurements(measurements);
  monitor_.step(time_);

  std::vector<ImuSample> validated_gyro;
  std::vector<int> flagged_gyro;
  for (int id : suite_.instances_of(SensorType::Gyro))
    if (monitor_.isolated(id)) flagged_gyro.push_back(id);
  std::optional<Vec3> accel_meas;
  std::optional<Vec3> gps_pos, gps_vel;
  std::optional<double> baro_alt[2];
  int baro_ids[2] = {-1, -1};
  std::optional<double> mag_heading[2];
  int mag_ids[2] = {-1, -1};
  {
    int baro_seen = 0, mag_seen = 0;
    for (const Measurement& m : measurements) {
      if (m.type == SensorType::Gyro && !monitor_.isolated(m.instance_id)) {
        validated_gyro.push_back(
            {m.instance_id, m.t, Vec3(m.values[0], m.values[1], m.values[2])});
      } else if (m.type == SensorType::Accel && !accel_meas &&
                 !monitor_.isolated(m.instance_id)) {
        accel_meas = Vec3(m.values[0], m.values[1], m.values[2]);
      } else if (m.type == SensorType::Gps &&
                 !monitor_.isolated(m.instance_id)) {
        gps_pos = Vec3(m.values[0], m.values[1], m.values[2]);
        gps_vel = Vec3(m.values[3], m.values[4], m.values[5]);
      } else if (m.type == SensorType::Baro && baro_seen < 2) {
        baro_ids[baro_seen] = m.instance_id;
        baro_alt[baro_seen] = m.values[0];
        if (!monitor_.isolated(m.instance_id)) air_.density = m.values[1];
        ++baro_seen;
      } else if (m.type == SensorType::Mag && mag_seen < 2) {
        mag_ids[mag_seen] = m.instance_id;
        mag_heading[mag_seen] = m.values[0];
        ++mag_seen;
      }
    }
  }
  std::sort(validated_gyro.begin(), validated_gyro.end(),
            [](const ImuSample& a, const ImuSample& b) {
              return a.instance_id < b.instance_id;
            });

  SelectedSource alt_src = monitor_.select_source(RecoveredState::Altitude);
  SelectedSource hpos_src =
      monitor_.select_source(RecoveredState::HorizontalPosition);
  SelectedSource att_src = monitor_.select_source(RecoveredState::Attitude);
  SelectedSource omega_src =
      monitor_.select_source(RecoveredState::AngularVelocity);

  BackEndCorrections corr;
  if (hpos_src.source == SourceClass::Gps && gps_pos) {
    corr.gps_position = gps_pos;
    corr.gps_velocity = gps_vel;
  }
  if (alt_src.source == SourceClass::Baro) {
    for (int i = 0; i < 2; ++i)
      if (baro_ids[i] == alt_src.instance_id && baro_alt[i])
        corr.baro_altitude = baro_alt[i];
  } else if (alt_src.source == SourceClass::Gps && gps_pos) {
    corr.baro_altitude = -gps_pos->z();
  }
  if (att_src.source == SourceClass::Mag) {
    for (int i = 0; i < 2; ++i)
      if (mag_ids[i] == att_src.instance_id && mag_heading[i])
        corr.mag_heading = mag_heading[i];
  }
  if (accel_meas) corr.accel_specific_force = accel_meas;
  estimator_.correct(validated_gyro, flagged_gyro, corr, time_);

  // The autopilot estimator consumes the selected sources.
  reference_control_ = monitor_.reference_control_active();
  VanillaEstimator::Inputs vin;
  if (omega_src.source == SourceClass::Imu) {
    for (const ImuSample& s : validated_gyro)
      if (s.instance_id == omega_src.instance_id) vin.gyro = s.gyro;
  } else {
    vin.gyro = estimator_.state().angular_velocity;
  }
  vin.specific_force =
      accel_meas ? accel_meas
                 : std::optional<Vec3>(estimator_.state().specific_force);
  bool gps_tick = tick_ % std::lround(opts_.control_rate_hz / 10.0) == 0;
  bool baro_tick = tick_ % std::lround(opts_.control_rate_hz / 50.0) == 0;
  if (hpos_src.source == SourceClass::Gps && gps_pos) {
    vin.position_xy = gps_pos;
    vin.velocity = gps_vel;
  } else if (hpos_src.source == SourceClass::Reference && gps_tick) {
    vin.position_xy = estimator_.state().position;
    vin.velocity = estimator_.state().velocity;
  }
  if (alt_src.source == SourceClass::Baro) {
    for (int i = 0; i < 2; ++i)
      if (baro_ids[i] == alt_src.instance_id && baro_alt[i])
        vin.altitude = baro_alt[i];
  } else if (alt_src.source == SourceClass::Gps && gps_pos) {
    vin.altitude = -gps_pos->z();
  } else if (alt_src.source == SourceClass::Reference && baro_tick) {
    vin.altitude = -estimator_.state().position.z();
  }
  if (att_src.source == SourceClass::Mag) {
    for (int i = 0; i < 2; ++i)
      if (mag_ids[i] == att_src.instance_id && mag_heading[i])
        vin.heading = mag_heading[i];
  } else if (att_src.source == SourceClass::Reference && baro_tick) {
    vin.heading = quat_yaw(estimator_.state().attitude);
  }
  vanilla_.step(vin, dt_);

  for (const auto& [id, alarm] : bank_.alarms()) {
    if (alarm.alarmed && !artifacts_.first_alarms.count(id))
      artifacts_.first_alarms[id] = alarm.first_alarm_time;
  }

  check_terminal();
  log_row(measurements);
}

FlightArtifacts FlightRunner::run() {
  auto start = std::chrono::steady_clock::now();
  while (!finished_) step();
  auto end = std::chrono::steady_clock::now();
  artifacts_.terminal = terminal_;
  artifacts_.log.terminal = terminal_;
  artifacts_.sim_seconds = time_;
  artifacts_.wall_seconds =
      std::chrono::duration<double>(end - start).count();
  return std::move(artifacts_);
}

}  // namespace vigil

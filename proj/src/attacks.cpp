#include "vigil/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace vigil {

AttackCategory attack_category_from_string(const std::string& name) {
  if (name == "overt") return AttackCategory::Overt;
  if (name == "stealthy") return AttackCategory::Stealthy;
  if (name == "multi") return AttackCategory::Multi;
  throw ConfigError("unknown attack category '" + name + "'");
}

std::string to_string(AttackCategory c) {
  switch (c) {
    case AttackCategory::Overt: return "OA";
    case AttackCategory::Stealthy: return "SA";
    case AttackCategory::Multi: return "MA";
  }
  return "?";
}

std::string AttackSpec::label() const {
  std::ostringstream out;
  out << to_string(category) << "_" << to_string(sensor) << "^"
      << instances.size();
  if (deviation == DeviationKind::Sinusoid) {
    out << "(" << amplitude << "@" << frequency_hz << "Hz)";
  } else if (deviation == DeviationKind::JointPosVel) {
    out << "(joint " << ramp_rate << "m/s)";
  } else if (deviation == DeviationKind::AdaptiveStealthy) {
    out << "(adaptive)";
  } else {
    out << "(" << amplitude << ")";
  }
  return out.str();
}

double acoustic_signal(const AttackSpec& spec, double t) {
  if (t < spec.start_time) return 0.0;
  return spec.amplitude *
         std::cos(2.0 * M_PI * spec.frequency_hz * (t - spec.start_time));
}

AttackSpec acoustic_profile_icm20602(double start_time) {
  AttackSpec s;
  s.category = AttackCategory::Overt;
  s.sensor = SensorType::Gyro;
  s.instances = {0, 1, 2};
  s.deviation = DeviationKind::Sinusoid;
  s.amplitude = 0.927;     // rad/s
  s.frequency_hz = 19.7;   // Hz
  s.start_time = start_time;
  return s;
}

AttackSpec acoustic_profile_icm20689(double start_time) {
  AttackSpec s = acoustic_profile_icm20602(start_time);
  s.amplitude = 1.899;
  s.frequency_hz = 205.9;
  return s;
}

std::vector<AttackSpec> compose_multi(const std::vector<AttackSpec>& specs) {
  std::set<std::pair<SensorType, int>> seen;
  for (const AttackSpec& s : specs) {
    for (int id : s.instances) {
      auto key = std::make_pair(s.sensor, id);
      if (seen.count(key)) {
        // Overlapping targets are only consistent when simultaneous.
        bool consistent = false;
        for (const AttackSpec& other : specs) {
          if (&other == &s) continue;
          if (other.sensor == s.sensor &&
              std::count(other.instances.begin(), other.instances.end(), id) &&
              other.start_time == s.start_time)
            consistent = true;
        }
        if (!consistent)
          throw ConfigError("inconsistent overlapping attack specs on " +
                            to_string(s.sensor) + " instance " +
                            std::to_string(id));
      }
      seen.insert(key);
    }
  }
  return specs;
}

double sustained_stealthy_bound(const DetectorParams& p) {
  switch (p.kind) {
    case DetectorKind::Cusum:
      return p.cusum_shift;
    case DetectorKind::CsEma:
      return std::min(p.cusum_shift, p.ema_threshold);
    case DetectorKind::L1Window:
      return p.window_threshold / p.window_length;
    case DetectorKind::L2Window:
      return std::sqrt(p.window_threshold);
  }
  return 0.0;
}

bool AttackInjector::any_active(double t) const {
  return std::any_of(specs_.begin(), specs_.end(),
                     [t](const AttackSpec& s) { return s.active(t); });
}

bool AttackInjector::instance_attacked(int instance_id, double t) const {
  for (const AttackSpec& s : specs_) {
    if (!s.active(t)) continue;
    if (std::count(s.instances.begin(), s.instances.end(), instance_id))
      return true;
  }
  return false;
}

void AttackInjector::apply(Measurement& m, const ReferenceState& reference,
                           const DetectorBank& bank, double t) const {
  for (const AttackSpec& spec : specs_) {
    if (!spec.active(t)) continue;
    if (spec.sensor != m.type) continue;
    if (!std::count(spec.instances.begin(), spec.instances.end(),
                    m.instance_id))
      continue;
    if (spec.deviation == DeviationKind::AdaptiveStealthy) {
      apply_stealthy(m, spec, reference, bank);
    } else {
      apply_overt(m, spec, t);
    }
  }
}

void AttackInjector::apply_overt(Measurement& m, const AttackSpec& spec,
                                 double t) const {
  switch (spec.deviation) {
    case DeviationKind::ConstantBias:
      for (int ax : spec.axes) m.values.at(ax) += spec.amplitude;
      break;
    case DeviationKind::Sinusoid: {
      double dev = acoustic_signal(spec, t);
      for (int ax : spec.axes) m.values.at(ax) += dev;
      break;
    }
    case DeviationKind::JointPosVel: {
      double elapsed = t - spec.start_time;
      for (int ax : spec.axes) {
        m.values.at(ax) += spec.ramp_rate * elapsed;  // position ramp
        m.values.at(3 + ax) += spec.ramp_rate;        // matching velocity
      }
      break;
    }
    case DeviationKind::AdaptiveStealthy:
      break;
  }
}

namespace {

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  void intersect(double lo2, double hi2) {
    lo = std::max(lo, lo2);
    hi = std::min(hi, hi2);
  }
};

// Admissible normalized-residual interval keeping the CUSUM statistic under
// its (slack-reduced) threshold after the next update.
Interval cusum_interval(const DetectorState& st, const DetectorParams& p,
                        double slack) {
  double budget =
      p.cusum_shift + p.cusum_threshold * (1.0 - slack) - st.cusum;
  budget = std::max(budget, 0.0);
  return {-budget, budget};
}

Interval ema_interval(const DetectorState& st, const DetectorParams& p,
                      double slack) {
  double tau = p.ema_threshold * (1.0 - slack);
  double carry = (1.0 - p.ema_lambda) * st.ema;
  Interval iv;
  // Residuals beyond the cap do not move the moving average further, so a
  // satisfied constraint at the cap means no constraint at all.
  if (p.ema_lambda * p.ema_cap + carry > tau)
    iv.hi = (tau - carry) / p.ema_lambda;
  if (-p.ema_lambda * p.ema_cap + carry < -tau)
    iv.lo = (-tau - carry) / p.ema_lambda;
  return iv;
}

Interval window_interval(const DetectorState& st, const DetectorParams& p,
                         double slack, bool squared) {
  double tau = p.window_threshold * (1.0 - slack);
  double sum_after_pop = st.window_sum;
  if (static_cast<int>(st.window.size()) >= p.window_length &&
      !st.window.empty())
    sum_after_pop -= st.window.front();
  if (squared) {
    double room = tau * p.window_length - sum_after_pop;
    double r = room > 0 ? std::sqrt(room) : 0.0;
    return {-r, r};
  }
  double room = std::max(tau - sum_after_pop, 0.0);
  return {-room, room};
}

}  // namespace

void AttackInjector::apply_stealthy(Measurement& m, const AttackSpec& spec,
                                    const ReferenceState& reference,
                                    const DetectorBank& bank) const {
  MeasuredState state;
  switch (spec.sensor) {
    case SensorType::Gyro: state = MeasuredState::AngularVelocity; break;
    case SensorType::Gps: state = MeasuredState::Position; break;
    case SensorType::Accel: state = MeasuredState::SpecificForce; break;
    case SensorType::Baro: state = MeasuredState::Altitude; break;
    case SensorType::Mag: state = MeasuredState::Heading; break;
    default: return;
  }
  const DetectorBank::Stream* stream = bank.stream(m.instance_id, state);
  const DetectorParams& p = table_.params(spec.sensor, state);

  for (int ax : spec.axes) {
    // Reference values of the two residual streams this axis is checked
    // against. Only the gyro detectors run two distinct streams.
    double ref_cs = 0.0, ref_ema = 0.0;
    switch (state) {
      case MeasuredState::AngularVelocity:
        ref_cs = reference.angular_velocity_cs[ax];
        ref_ema = reference.angular_velocity[ax];
        break;
      case MeasuredState::Position:
        ref_cs = ref_ema = reference.position[ax];
        break;
      case MeasuredState::Velocity:
        ref_cs = ref_ema = reference.velocity[ax];
        break;
      case MeasuredState::SpecificForce:
        ref_cs = ref_ema = reference.specific_force[ax];
        break;
      case MeasuredState::Altitude:
        ref_cs = ref_ema = -reference.position.z();
        break;
      case MeasuredState::Heading:
        ref_cs = ref_ema = quat_yaw(reference.attitude);
        break;
    }

    Interval allowed;  // admissible measurement values
    const DetectorState* ds =
        stream && ax < static_cast<int>(stream->axes.size())
            ? &stream->axes[ax]
            : nullptr;
    DetectorState empty;
    const DetectorState& st = ds ? *ds : empty;

    switch (p.kind) {
      case DetectorKind::CsEma: {
        Interval c = cusum_interval(st, p, kStealthSlack);
        Interval e = ema_interval(st, p, kStealthSlack);
        allowed.intersect(ref_cs + c.lo * p.noise_std,
                          ref_cs + c.hi * p.noise_std);
        allowed.intersect(ref_ema + e.lo * p.noise_std,
                          ref_ema + e.hi * p.noise_std);
        break;
      }
      case DetectorKind::Cusum: {
        Interval c = cusum_interval(st, p, kStealthSlack);
        allowed.intersect(ref_cs + c.lo * p.noise_std,
                          ref_cs + c.hi * p.noise_std);
        break;
      }
      case DetectorKind::L1Window:
      case DetectorKind::L2Window: {
        Interval w = window_interval(st, p, kStealthSlack,
                                     p.kind == DetectorKind::L2Window);
        allowed.intersect(ref_ema + w.lo * p.noise_std,
                          ref_ema + w.hi * p.noise_std);
        break;
      }
    }

    // Push the measurement to the top of the admissible interval. An empty
    // interval means the references disagree beyond the combined slack; the
    // midpoint is then the least-exposed choice.
    if (allowed.hi >= allowed.lo) {
      m.values.at(ax) = allowed.hi;
    } else {
      m.values.at(ax) = 0.5 * (allowed.lo + allowed.hi);
    }
  }
}

std::vector<AttackSpec> attacks_from_config(const Config& cfg,
                                            const SensorSuite& suite) {
  std::vector<AttackSpec> specs;
  for (const std::string& section :
       {std::string("attack"), std::string("attack2"), std::string("attack3"),
        std::string("attack4")}) {
    if (!cfg.has(section + ".sensor")) continue;
    auto key = [&section](const char* k) { return section + "." + k; };
    AttackSpec s;
    s.category =
        attack_category_from_string(cfg.get_string(key("category"), "overt"));
    std::string sensor = cfg.get_string(key("sensor"));
    if (sensor == "gyro") s.sensor = SensorType::Gyro;
    else if (sensor == "gps") s.sensor = SensorType::Gps;
    else if (sensor == "accel") s.sensor = SensorType::Accel;
    else if (sensor == "baro") s.sensor = SensorType::Baro;
    else if (sensor == "mag") s.sensor = SensorType::Mag;
    else throw ConfigError("unknown attack sensor '" + sensor + "'");

    std::vector<int> of_type = suite.instances_of(s.sensor);
    std::string inst = cfg.get_string(key("instances"), "all");
    if (inst == "all") {
      s.instances = of_type;
    } else {
      for (double v : cfg.get_doubles(key("instances"))) {
        int ordinal = static_cast<int>(v);
        if (ordinal < 0 || ordinal >= static_cast<int>(of_type.size()))
          throw ConfigError("attack instance ordinal out of range");
        s.instances.push_back(of_type[ordinal]);
      }
    }
    if (s.instances.empty())
      throw ConfigError("attack spec has an empty instance mask");

    std::string dev = cfg.get_string(key("deviation"), "constant");
    if (dev == "constant") s.deviation = DeviationKind::ConstantBias;
    else if (dev == "sinusoid") s.deviation = DeviationKind::Sinusoid;
    else if (dev == "joint") s.deviation = DeviationKind::JointPosVel;
    else if (dev == "adaptive") s.deviation = DeviationKind::AdaptiveStealthy;
    else throw ConfigError("unknown deviation kind '" + dev + "'");

    s.amplitude = cfg.get_double(key("amplitude"), 0.0);
    s.frequency_hz = cfg.get_double(key("frequency"), 0.0);
    s.ramp_rate = cfg.get_double(key("ramp_rate"), 1.0);
    s.start_time = cfg.get_double(key("start"), 60.0);
    if (cfg.has(key("axes"))) {
      s.axes.clear();
      for (double v : cfg.get_doubles(key("axes")))
        s.axes.push_back(static_cast<int>(v));
    }
    if (s.deviation == DeviationKind::Sinusoid && s.amplitude <= 0)
      throw ConfigError("sinusoid attack needs a positive amplitude");
    specs.push_back(std::move(s));
  }
  return compose_multi(specs);
}

}  // namespace vigil

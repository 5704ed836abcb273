#include "vigil/learn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vigil {

SimplexResult nelder_mead(
    const std::function<double(const std::vector<double>&)>& objective,
    const std::vector<double>& initial, const SimplexConfig& cfg) {
  const size_t n = initial.size();
  struct Vertex {
    std::vector<double> x;
    double f;
  };

  auto eval = [&](const std::vector<double>& x) {
    double f = objective(x);
    if (!std::isfinite(f))
      throw ConfigError("nelder_mead: objective is not finite");
    return f;
  };

  std::vector<Vertex> simplex;
  simplex.push_back({initial, eval(initial)});
  for (size_t i = 0; i < n; ++i) {
    std::vector<double> x = initial;
    double step = cfg.initial_step * std::fabs(x[i]);
    if (step < 1e-8) step = cfg.initial_step * 0.1;
    x[i] += step;
    simplex.push_back({x, eval(x)});
  }

  auto by_value = [](const Vertex& a, const Vertex& b) { return a.f < b.f; };

  SimplexResult result;
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    std::sort(simplex.begin(), simplex.end(), by_value);
    result.iterations = iter;

    double diameter = 0.0;
    for (size_t i = 1; i <= n; ++i)
      for (size_t d = 0; d < n; ++d)
        diameter = std::max(diameter,
                            std::fabs(simplex[i].x[d] - simplex[0].x[d]));
    if (diameter < cfg.tolerance) {
      result.converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (size_t i = 0; i < n; ++i)
      for (size_t d = 0; d < n; ++d) centroid[d] += simplex[i].x[d] / n;

    auto along = [&](double coef) {
      std::vector<double> x(n);
      for (size_t d = 0; d < n; ++d)
        x[d] = centroid[d] + coef * (centroid[d] - simplex[n].x[d]);
      return x;
    };

    std::vector<double> xr = along(cfg.reflection);
    double fr = eval(xr);
    if (fr < simplex[0].f) {
      std::vector<double> xe = along(cfg.expansion);
      double fe = eval(xe);
      if (fe < fr) {
        simplex[n] = {xe, fe};
      } else {
        simplex[n] = {xr, fr};
      }
    } else if (fr < simplex[n - 1].f) {
      simplex[n] = {xr, fr};
    } else {
      std::vector<double> xc = along(fr < simplex[n].f ? cfg.contraction
                                                       : -cfg.contraction);
      double fc = eval(xc);
      if (fc < std::min(fr, simplex[n].f)) {
        simplex[n] = {xc, fc};
      } else {
        for (size_t i = 1; i <= n; ++i) {
          for (size_t d = 0; d < n; ++d)
            simplex[i].x[d] = simplex[0].x[d] +
                              cfg.shrink * (simplex[i].x[d] - simplex[0].x[d]);
          simplex[i].f = eval(simplex[i].x);
        }
      }
    }
  }

  std::sort(simplex.begin(), simplex.end(), by_value);
  result.argmin = simplex[0].x;
  result.min_value = simplex[0].f;
  return result;
}

FitData FitData::from_log(const FlightLog& log) {
  FitData d;
  if (log.rows.size() < 2) throw ConfigError("flight log too short to fit");
  d.dt = log.rows[1].t - log.rows[0].t;
  for (const FlightRow& r : log.rows) {
    d.attitude.push_back(r.ref_attitude);
    d.velocity.push_back(r.ref_velocity);
    d.wind.push_back(r.ref_wind);
    d.density.push_back(r.baro0_density);
    d.body_accel.push_back(r.accel0);
    d.angular_velocity.push_back(r.gyro0);
    d.actuator_us.push_back(r.actuator_us);
    d.battery_voltage.push_back(r.battery_voltage);
    d.battery_current.push_back(r.battery_current);
  }
  return d;
}

void FitData::append(const FitData& other) {
  auto cat = [](auto& a, const auto& b) { a.insert(a.end(), b.begin(), b.end()); };
  cat(attitude, other.attitude);
  cat(velocity, other.velocity);
  cat(wind, other.wind);
  cat(density, other.density);
  cat(body_accel, other.body_accel);
  cat(angular_velocity, other.angular_velocity);
  cat(actuator_us, other.actuator_us);
  cat(battery_voltage, other.battery_voltage);
  cat(battery_current, other.battery_current);
}

double drag_objective(const FitData& data, const PhysicalParams& base,
                      double momentum_drag, double ballistic_x,
                      double ballistic_y) {
  PhysicalParams p = base;
  p.momentum_drag = momentum_drag;
  p.ballistic = Vec3(ballistic_x, ballistic_y, 0);
  p.fidelity.drag = true;

  double sse = 0.0;
  for (size_t i = 0; i < data.size(); ++i) {
    Vec3 airspeed =
        relative_airspeed(data.attitude[i], data.velocity[i], data.wind[i]);
    Vec3 pred = drag_acceleration(airspeed, data.density[i], p);
    double ex = pred.x() - data.body_accel[i].x();
    double ey = pred.y() - data.body_accel[i].y();
    sse += ex * ex + ey * ey;
  }
  return sse;
}

DragFit fit_drag_params(const FitData& data, const PhysicalParams& base,
                        const SimplexConfig& cfg) {
  DragFit fit;
  double excitation = 0.0;
  for (size_t i = 0; i < data.size(); ++i) {
    Vec3 airspeed =
        relative_airspeed(data.attitude[i], data.velocity[i], data.wind[i]);
    excitation = std::max(excitation,
                          std::hypot(airspeed.x(), airspeed.y()));
  }
  if (excitation < 0.5) {
    fit.well_conditioned = false;
    fit.warning = "no horizontal airspeed excitation; drag fit is ill-conditioned";
  }

  auto objective = [&](const std::vector<double>& x) {
    return drag_objective(data, base, x[0], x[1], x[2]);
  };
  SimplexResult r = nelder_mead(objective, {0.05, 0.05, 0.05}, cfg);
  fit.momentum_drag = r.argmin[0];
  fit.ballistic_x = r.argmin[1];
  fit.ballistic_y = r.argmin[2];
  fit.objective = r.min_value;
  return fit;
}

namespace {

// Relative thrust series from the actuator/battery record under a trial
// rotor time constant.
std::vector<ThrustState> thrust_series(const FitData& data,
                                       const PhysicalParams& p) {
  std::vector<ThrustState> out;
  out.reserve(data.size());
  ThrustState t;
  for (size_t i = 0; i < data.size(); ++i) {
    BatteryState b{data.battery_voltage[i], data.battery_current[i]};
    Rotor4 cmd;
    for (int r = 0; r < kRotorCount; ++r)
      cmd[r] = normalized_thrust_setpoint(data.actuator_us[i][r], b, p);
    t = update_thrust_estimate(t, cmd, data.dt, p);
    out.push_back(t);
  }
  return out;
}

}  // namespace

double time_constant_objective(const FitData& data, const PhysicalParams& base,
                               const DragFit& drag, double time_constant) {
  if (time_constant <= 1e-5) return 1e30;  // keep the filter well defined
  PhysicalParams p = base;
  p.time_constant = time_constant;
  p.momentum_drag = drag.momentum_drag;
  p.ballistic = Vec3(drag.ballistic_x, drag.ballistic_y, 0);
  std::vector<ThrustState> thrust = thrust_series(data, p);

  double sse = 0.0;
  for (size_t i = 0; i < data.size(); ++i) {
    // Control acceleration target: measured body accel minus fitted drag.
    Vec3 airspeed =
        relative_airspeed(data.attitude[i], data.velocity[i], data.wind[i]);
    Vec3 drag_pred = drag_acceleration(airspeed, data.density[i], p);
    double target = data.body_accel[i].z() - drag_pred.z();
    double pred = -(p.thrust_coeff / p.mass) * thrust[i].total();
    double e = pred - target;
    sse += e * e;
  }
  return sse;
}

FitResult fit_time_constant(const FitData& data, const PhysicalParams& base,
                            const DragFit& drag, const SimplexConfig& cfg) {
  FitResult fit;
  // Identifiability needs thrust transients in the record.
  double span = 0.0, lo = 1e30, hi = -1e30;
  for (const auto& u : data.actuator_us) {
    double total = u[0] + u[1] + u[2] + u[3];
    lo = std::min(lo, total);
    hi = std::max(hi, total);
  }
  span = hi - lo;
  if (span < 4.0) {
    fit.well_conditioned = false;
    fit.warning = "constant thrust record; time constant is unidentifiable";
  }

  auto objective = [&](const std::vector<double>& x) {
    return time_constant_objective(data, base, drag, x[0]);
  };
  SimplexResult r = nelder_mead(objective, {0.1}, cfg);
  fit.value = r.argmin[0];
  fit.objective = r.min_value;
  return fit;
}

double rotor_gyro_objective(const FitData& data, const PhysicalParams& base,
                            double time_constant, double rotor_gyro) {
  PhysicalParams p = base;
  p.time_constant = time_constant;
  p.rotor_gyro_coeff = rotor_gyro;
  p.fidelity.rotor_gyro = true;
  std::vector<ThrustState> thrust = thrust_series(data, p);

  double sse = 0.0;
  for (size_t i = 1; i + 1 < data.size(); ++i) {
    // Angular acceleration target by central differences of the gyro data.
    Vec3 target = (data.angular_velocity[i + 1] - data.angular_velocity[i - 1]) /
                  (2.0 * data.dt);
    ControlWrench w = control_wrench(thrust[i], data.dt, p);
    Vec3 pred = angular_acceleration(data.angular_velocity[i], w.torque, p);
    sse += (pred - target).squaredNorm();
  }
  return sse;
}

FitResult fit_rotor_gyro(const FitData& data, const PhysicalParams& base,
                         double time_constant, const SimplexConfig& cfg) {
  FitResult fit;
  double yaw_excitation = 0.0;
  for (const Vec3& w : data.angular_velocity)
    yaw_excitation = std::max(yaw_excitation, std::fabs(w.z()));
  if (yaw_excitation < 0.2) {
    fit.well_conditioned = false;
    fit.warning = "no yaw excitation; rotor gyro coefficient is unidentifiable";
  }

  auto objective = [&](const std::vector<double>& x) {
    return rotor_gyro_objective(data, base, time_constant, x[0]);
  };
  SimplexResult r = nelder_mead(objective, {0.1}, cfg);
  fit.value = r.argmin[0];
  fit.objective = r.min_value;
  return fit;
}

PhysicalParams LearnedParams::apply_to(const PhysicalParams& base) const {
  PhysicalParams p = base;
  p.momentum_drag = drag.momentum_drag;
  p.ballistic = Vec3(drag.ballistic_x, drag.ballistic_y, 0);
  p.time_constant = time_constant.value;
  p.rotor_gyro_coeff = rotor_gyro.value;
  return p;
}

LearnedParams learn_parameters(const FitData& data, const PhysicalParams& base,
                               const SimplexConfig& cfg) {
  LearnedParams out;
  out.drag = fit_drag_params(data, base, cfg);
  out.time_constant = fit_time_constant(data, base, out.drag, cfg);
  out.rotor_gyro =
      fit_rotor_gyro(data, base, out.time_constant.value, cfg);
  return out;
}

}  // namespace vigil

#include "vigil/flightlog.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vigil/config.hpp"

namespace vigil {

std::string to_string(TerminalCondition c) {
  switch (c) {
    case TerminalCondition::MissionComplete: return "mission_complete";
    case TerminalCondition::Crash: return "crash";
    case TerminalCondition::Divergence: return "divergence";
    case TerminalCondition::TimeLimit: return "time_limit";
  }
  return "?";
}

namespace {

TerminalCondition terminal_from_string(const std::string& s) {
  if (s == "mission_complete") return TerminalCondition::MissionComplete;
  if (s == "crash") return TerminalCondition::Crash;
  if (s == "divergence") return TerminalCondition::Divergence;
  if (s == "time_limit") return TerminalCondition::TimeLimit;
  throw ConfigError("bad terminal condition '" + s + "'");
}

void put(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  out += buf;
  out += ',';
}

void put(std::string& out, const Vec3& v) {
  put(out, v.x());
  put(out, v.y());
  put(out, v.z());
}

void put(std::string& out, const Quat& q) {
  put(out, q.w());
  put(out, q.x());
  put(out, q.y());
  put(out, q.z());
}

}  // namespace

void FlightLog::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open log file for writing: " + path);

  out << "# terminal=" << to_string(terminal)
      << " armed_at=" << detectors_armed_at << "\n";
  out << "t,attack_active,"
         "tp_x,tp_y,tp_z,tv_x,tv_y,tv_z,tq_w,tq_x,tq_y,tq_z,tw_x,tw_y,tw_z,"
         "rp_x,rp_y,rp_z,rv_x,rv_y,rv_z,rq_w,rq_x,rq_y,rq_z,rw_x,rw_y,rw_z,"
         "rwcs_x,rwcs_y,rwcs_z,rsf_x,rsf_y,rsf_z,rwind_x,rwind_y,rwind_z,"
         "ap_x,ap_y,ap_z,u1,u2,u3,u4,"
         "gyro0_x,gyro0_y,gyro0_z,accel0_x,accel0_y,accel0_z,"
         "baro0_alt,baro0_rho,mag0_heading,"
         "gps_px,gps_py,gps_pz,gps_vx,gps_vy,gps_vz,"
         "gps_fresh,baro_fresh,mag_fresh,batt_v,batt_i";
  for (const auto& label : instance_labels) out << ",alarm_" << label;
  out << ",src_omega,src_altitude,src_hpos,src_attitude,reference_control";
  for (const auto& label : stat_labels) out << ",stat_" << label;
  out << "\n";

  std::string line;
  for (const FlightRow& r : rows) {
    line.clear();
    put(line, r.t);
    line += std::to_string(r.attack_active);
    line += ',';
    put(line, r.truth_position);
    put(line, r.truth_velocity);
    put(line, r.truth_attitude);
    put(line, r.truth_angular_velocity);
    put(line, r.ref_position);
    put(line, r.ref_velocity);
    put(line, r.ref_attitude);
    put(line, r.ref_angular_velocity);
    put(line, r.ref_angular_velocity_cs);
    put(line, r.ref_specific_force);
    put(line, r.ref_wind);
    put(line, r.active_position);
    for (double u : r.actuator_us) put(line, u);
    put(line, r.gyro0);
    put(line, r.accel0);
    put(line, r.baro0_altitude);
    put(line, r.baro0_density);
    put(line, r.mag0_heading);
    put(line, r.gps_position);
    put(line, r.gps_velocity);
    line += std::to_string(r.gps_fresh);
    line += ',';
    line += std::to_string(r.baro_fresh);
    line += ',';
    line += std::to_string(r.mag_fresh);
    line += ',';
    put(line, r.battery_voltage);
    put(line, r.battery_current);
    for (int a : r.alarms) {
      line += std::to_string(a);
      line += ',';
    }
    line += r.src_omega;
    line += ',';
    line += r.src_altitude;
    line += ',';
    line += r.src_hpos;
    line += ',';
    line += r.src_attitude;
    line += ',';
    line += std::to_string(r.reference_control);
    for (double s : r.stats) {
      line += ',';
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.10g", s);
      line += buf;
    }
    line += '\n';
    out << line;
  }
}

FlightLog FlightLog::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open log file: " + path);

  FlightLog log;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# terminal=", 0) != 0)
    throw ConfigError(path + ": missing log preamble");
  {
    std::istringstream meta(line.substr(2));
    std::string tok;
    while (meta >> tok) {
      auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
      if (k == "terminal") log.terminal = terminal_from_string(v);
      if (k == "armed_at") log.detectors_armed_at = std::stod(v);
    }
  }

  if (!std::getline(in, line)) throw ConfigError(path + ": missing header");
  std::vector<std::string> columns;
  {
    std::istringstream hdr(line);
    std::string col;
    while (std::getline(hdr, col, ',')) columns.push_back(col);
  }
  size_t alarm_begin = 0, alarm_end = 0;
  for (size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].rfind("alarm_", 0) == 0) {
      if (!alarm_begin) alarm_begin = i;
      alarm_end = i + 1;
      log.instance_labels.push_back(columns[i].substr(6));
    }
    if (columns[i].rfind("stat_", 0) == 0)
      log.stat_labels.push_back(columns[i].substr(5));
  }

  std::vector<std::string> fields;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    fields.clear();
    std::istringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (fields.size() != columns.size())
      throw ConfigError(path + ": ragged row with " +
                        std::to_string(fields.size()) + " fields");

    size_t i = 0;
    auto num = [&]() { return std::stod(fields.at(i++)); };
    auto vec = [&]() {
      Vec3 v;
      v.x() = num(); v.y() = num(); v.z() = num();
      return v;
    };
    auto quat = [&]() {
      double w = num(), x = num(), y = num(), z = num();
      return Quat(w, x, y, z);
    };

    FlightRow r;
    r.t = num();
    r.attack_active = static_cast<int>(num());
    r.truth_position = vec();
    r.truth_velocity = vec();
    r.truth_attitude = quat();
    r.truth_angular_velocity = vec();
    r.ref_position = vec();
    r.ref_velocity = vec();
    r.ref_attitude = quat();
    r.ref_angular_velocity = vec();
    r.ref_angular_velocity_cs = vec();
    r.ref_specific_force = vec();
    r.ref_wind = vec();
    r.active_position = vec();
    for (double& u : r.actuator_us) u = num();
    r.gyro0 = vec();
    r.accel0 = vec();
    r.baro0_altitude = num();
    r.baro0_density = num();
    r.mag0_heading = num();
    r.gps_position = vec();
    r.gps_velocity = vec();
    r.gps_fresh = static_cast<int>(num());
    r.baro_fresh = static_cast<int>(num());
    r.mag_fresh = static_cast<int>(num());
    r.battery_voltage = num();
    r.battery_current = num();
    for (size_t a = alarm_begin; a < alarm_end; ++a)
      r.alarms.push_back(static_cast<int>(std::stod(fields.at(i++))));
    r.src_omega = fields.at(i++);
    r.src_altitude = fields.at(i++);
    r.src_hpos = fields.at(i++);
    r.src_attitude = fields.at(i++);
    r.reference_control = static_cast<int>(std::stod(fields.at(i++)));
    while (i < fields.size()) r.stats.push_back(std::stod(fields.at(i++)));
    log.rows.push_back(std::move(r));
  }
  return log;
}

}  // namespace vigil

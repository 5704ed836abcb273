#include "vigil/recovery.hpp"

#include <algorithm>
#include <sstream>

namespace vigil {

std::string to_string(SourceClass c) {
  switch (c) {
    case SourceClass::Reference: return "SE";
    case SourceClass::Gps: return "GPS";
    case SourceClass::Baro: return "BAR";
    case SourceClass::Imu: return "IMU";
    case SourceClass::Mag: return "MAG";
  }
  return "?";
}

std::string to_string(RecoveredState s) {
  switch (s) {
    case RecoveredState::AngularVelocity: return "angular_velocity";
    case RecoveredState::Altitude: return "altitude";
    case RecoveredState::HorizontalPosition: return "horizontal_position";
    case RecoveredState::Attitude: return "attitude";
  }
  return "?";
}

std::string SelectedSource::label() const {
  if (source == SourceClass::Reference) return "SE";
  return to_string(source) + std::to_string(instance_id);
}

void SensorHealth::register_instance(int instance_id, SensorType type) {
  types_[instance_id] = type;
}

void SensorHealth::flag(int instance_id, double t) {
  if (!types_.count(instance_id))
    throw ConfigError("flag on unknown sensor instance " +
                      std::to_string(instance_id));
  flagged_.emplace(instance_id, t);  // keeps the first timestamp
}

bool SensorHealth::compromised(int instance_id) const {
  return flagged_.count(instance_id) != 0;
}

double SensorHealth::flag_time(int instance_id) const {
  auto it = flagged_.find(instance_id);
  return it == flagged_.end() ? -1.0 : it->second;
}

std::vector<int> SensorHealth::validated_instances(SensorType type) const {
  std::vector<int> out;
  for (const auto& [id, t] : types_) {
    if (t == type && !compromised(id)) out.push_back(id);
  }
  return out;
}

std::vector<int> SensorHealth::instances(SensorType type) const {
  std::vector<int> out;
  for (const auto& [id, t] : types_) {
    if (t == type) out.push_back(id);
  }
  return out;
}

SourcePriority SourcePriority::defaults() {
  SourcePriority p;
  p.order[RecoveredState::Altitude] = {SourceClass::Gps, SourceClass::Baro};
  p.order[RecoveredState::AngularVelocity] = {SourceClass::Imu};
  p.order[RecoveredState::HorizontalPosition] = {SourceClass::Gps};
  p.order[RecoveredState::Attitude] = {SourceClass::Mag};
  return p;
}

bool LatticeStatus::descends_from(const LatticeStatus& o) const {
  if (availability.size() != o.availability.size()) return false;
  for (size_t i = 0; i < availability.size(); ++i) {
    if (availability[i].first != o.availability[i].first) return false;
    if (!std::includes(o.availability[i].second.begin(),
                       o.availability[i].second.end(),
                       availability[i].second.begin(),
                       availability[i].second.end()))
      return false;
  }
  return true;
}

std::string LatticeStatus::to_string() const {
  std::ostringstream out;
  out << "(";
  for (size_t i = 0; i < availability.size(); ++i) {
    if (i) out << ", ";
    const auto& [cls, ids] = availability[i];
    if (ids.empty() && cls != SourceClass::Reference) {
      out << "_|_";
      continue;
    }
    out << vigil::to_string(cls) << "{";
    bool first = true;
    for (int id : ids) {
      if (!first) out << " ";
      out << id;
      first = false;
    }
    out << "}";
  }
  out << ")";
  return out.str();
}

void RecoveryMonitor::register_instance(int instance_id, SensorType type) {
  health_.register_instance(instance_id, type);
}

void RecoveryMonitor::report_alarm(int instance_id, double t) {
  if (!enabled_) return;
  if (health_.compromised(instance_id)) return;
  pending_.emplace_back(instance_id, t + alarm_delay_);
}

void RecoveryMonitor::step(double t) {
  if (!enabled_) return;
  auto it = pending_.begin();
  while (it != pending_.end()) {
    if (it->second <= t) {
      health_.flag(it->first, it->second);
      it = pending_.erase(it);
    } else {
      ++it;
    }
  }
}

bool RecoveryMonitor::isolated(int instance_id) const {
  return enabled_ && health_.compromised(instance_id);
}

SensorType RecoveryMonitor::class_sensor(SourceClass c) const {
  switch (c) {
    case SourceClass::Gps: return SensorType::Gps;
    case SourceClass::Baro: return SensorType::Baro;
    case SourceClass::Imu: return SensorType::Gyro;
    case SourceClass::Mag: return SensorType::Mag;
    case SourceClass::Reference: break;
  }
  throw ConfigError("reference class has no sensor type");
}

SelectedSource RecoveryMonitor::select_source(RecoveredState state) const {
  auto it = priority_.order.find(state);
  if (it == priority_.order.end())
    throw ConfigError("no source priority for state " + to_string(state));
  // Walk from the best (last) class down; the reference is the fallback.
  for (auto cls = it->second.rbegin(); cls != it->second.rend(); ++cls) {
    std::vector<int> ok = health_.validated_instances(class_sensor(*cls));
    if (!enabled_) ok = health_.instances(class_sensor(*cls));
    if (!ok.empty()) {
      return SelectedSource{*cls, *std::min_element(ok.begin(), ok.end())};
    }
  }
  return SelectedSource{};
}

LatticeStatus RecoveryMonitor::lattice_status(RecoveredState state) const {
  auto it = priority_.order.find(state);
  if (it == priority_.order.end())
    throw ConfigError("no source priority for state " + to_string(state));
  LatticeStatus status;
  for (auto cls = it->second.rbegin(); cls != it->second.rend(); ++cls) {
    std::vector<int> ok = health_.validated_instances(class_sensor(*cls));
    status.availability.emplace_back(*cls,
                                     std::set<int>(ok.begin(), ok.end()));
  }
  status.availability.emplace_back(SourceClass::Reference, std::set<int>{-1});
  return status;
}

bool RecoveryMonitor::reference_control_active() const {
  if (!enabled_) return false;
  return health_.validated_instances(SensorType::Gyro).empty();
}

}  // namespace vigil

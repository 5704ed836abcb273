#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vigil/detect.hpp"
#include "vigil/estimator.hpp"
#include "vigil/simworld.hpp"

namespace vigil {

enum class AttackCategory { Overt, Stealthy, Multi };

AttackCategory attack_category_from_string(const std::string& name);
std::string to_string(AttackCategory c);

enum class DeviationKind {
  ConstantBias,      // fixed offset on masked axes
  Sinusoid,          // A * cos(2*pi*F*(t - t_atk)), acoustic injection
  JointPosVel,       // coordinated position ramp + matching velocity bias
  AdaptiveStealthy,  // solved online against the mirrored detectors
};

// One attack on one sensor type. Component attacks of a multi-type attack
// are stored as separate specs sharing a start time.
struct AttackSpec {
  AttackCategory category = AttackCategory::Overt;
  SensorType sensor = SensorType::Gyro;
  std::vector<int> instances;  // compromised instance ids
  DeviationKind deviation = DeviationKind::ConstantBias;
  double amplitude = 0.0;    // bias (units of the state) or sinusoid A
  double frequency_hz = 0.0; // sinusoid F
  double ramp_rate = 1.0;    // m/s, joint GPS position ramp
  double start_time = 60.0;  // s
  // Axis mask within the measured state vector; for GPS the mask addresses
  // position axes and the joint profile pairs them with velocity.
  std::vector<int> axes{0};

  bool active(double t) const { return t >= start_time; }
  std::string label() const;
};

// Sinusoidal deviation of the unmodulated acoustic attack.
double acoustic_signal(const AttackSpec& spec, double t);

// Ready-made acoustic profiles of the two targeted gyro models.
AttackSpec acoustic_profile_icm20602(double start_time);
AttackSpec acoustic_profile_icm20689(double start_time);

// Merges component specs; they must target disjoint (type, instance) pairs
// or share the same start time.
std::vector<AttackSpec> compose_multi(const std::vector<AttackSpec>& specs);

// Steady-state residual magnitude (normalized units) a per-step optimal
// stealthy adversary sustains against the given detector params.
double sustained_stealthy_bound(const DetectorParams& p);

// Applies attack deviations to a measurement stream. The stealthy adversary
// mirrors the defender's detector bank and reference states, injecting the
// largest deviation that keeps every mirrored statistic under threshold.
class AttackInjector {
 public:
  // Fractional headroom kept below each threshold by the stealthy solver.
  static constexpr double kStealthSlack = 0.01;

  AttackInjector() = default;
  AttackInjector(std::vector<AttackSpec> specs, const DetectorTable& table)
      : specs_(std::move(specs)), table_(table) {}

  const std::vector<AttackSpec>& specs() const { return specs_; }
  bool any_active(double t) const;
  bool instance_attacked(int instance_id, double t) const;

  // Rewrites measurement values in place. `reference` carries the values the
  // defender's detectors will difference against this tick; `bank` is the
  // defender's detector bank (read-only mirror for the stealthy solver).
  void apply(Measurement& m, const ReferenceState& reference,
             const DetectorBank& bank, double t) const;

 private:
  void apply_overt(Measurement& m, const AttackSpec& spec, double t) const;
  void apply_stealthy(Measurement& m, const AttackSpec& spec,
                      const ReferenceState& reference,
                      const DetectorBank& bank) const;

  std::vector<AttackSpec> specs_;
  DetectorTable table_;
};

// Parses the [attack] section of a scenario config. Returns an empty list
// when the section is absent (attack-free flight).
std::vector<AttackSpec> attacks_from_config(const Config& cfg,
                                            const SensorSuite& suite);

}  // namespace vigil

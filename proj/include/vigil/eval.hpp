#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vigil/flight.hpp"

namespace vigil {

struct EvalConfig {
  // Effective-alarm bounds per sensor type, seconds after attack start.
  double alarm_bound_gps = 20.0;
  double alarm_bound_gyro = 1.0;
  double alarm_bound_other = 5.0;
  double recovery_epsilon = 3.0;  // m
  double recovery_cap = 300.0;    // s
  int records_per_case = 50;
  int roc_thresholds = 50;

  double alarm_bound(SensorType type) const;
};

enum class DetectionClass { TruePositive, FalsePositive, TrueNegative, FalseNegative };

std::string to_string(DetectionClass c);

struct InstanceOutcome {
  int instance_id = 0;
  std::string label;
  bool attacked = false;
  bool alarmed = false;
  double alarm_time = -1.0;
  DetectionClass cls = DetectionClass::TrueNegative;
  std::optional<double> ttd;  // set only for true positives
};

struct FlightOutcome {
  uint64_t seed = 0;
  TerminalCondition terminal = TerminalCondition::MissionComplete;
  double attack_start = -1.0;
  double first_alarm = -1.0;  // earliest across instances, -1 if none
  std::vector<InstanceOutcome> instances;
  // Effective recovery duration; empty when no alarm was raised.
  std::optional<double> recovery_duration;
  bool recovery_capped = false;
  double sim_seconds = 0.0;
  double wall_seconds = 0.0;
};

// Per-instance detection classification over one flight.
std::vector<InstanceOutcome> classify_detection(const FlightArtifacts& flight,
                                                const SensorSuite& suite,
                                                const EvalConfig& cfg);

// TTD of one classified instance; empty marker stands for ">= T_alarm".
std::optional<double> ttd(const InstanceOutcome& outcome, double attack_start);

// Time from the first alarm until the truth/estimate distance first exceeds
// epsilon (or flight end), capped at recovery_cap.
struct RecoveryDuration {
  double seconds = 0.0;
  bool capped = false;
};
std::optional<RecoveryDuration> recovery_duration(const FlightLog& log,
                                                  double first_alarm,
                                                  const EvalConfig& cfg);

FlightOutcome evaluate_flight(const FlightArtifacts& flight,
                              const SensorSuite& suite,
                              const EvalConfig& cfg);

struct RocPoint {
  double threshold_scale = 1.0;
  double tpr = 0.0;
  double fpr = 0.0;
};

// Threshold sweep over the recorded statistic envelopes. The scale
// multiplies every component threshold of the active detector family.
std::vector<RocPoint> roc_sweep(const std::vector<FlightArtifacts>& flights,
                                const DetectorTable& table,
                                const EvalConfig& cfg, int points);

double auc_trapezoid(std::vector<RocPoint> points);

struct BatchCase {
  std::string name;
  ScenarioOptions scenario;  // seed is re-derived per record
};

struct BatchResult {
  std::string name;
  std::vector<FlightOutcome> outcomes;
  std::vector<RocPoint> roc;
  double auc = 0.0;

  double tpr() const;
  double fpr() const;
  double mean_ttd() const;      // over true positives
  double mean_recovery() const; // over flights with a duration
  int alarmed_flights() const;
};

// Seed for record index i of a batch; stable across runs and job counts.
uint64_t batch_seed(uint64_t base_seed, int record_index);

// Runs records_per_case flights of one case. The parallel variant fans
// flights out over OpenMP threads; results are identical to the serial
// reference in either mode.
BatchResult run_case(const BatchCase& batch, const EvalConfig& cfg,
                     bool parallel, int jobs = 0);

std::string outcomes_to_csv(const BatchResult& result);
std::string roc_to_csv(const BatchResult& result);
std::string summarize(const std::vector<BatchResult>& results,
                      const EvalConfig& cfg);

}  // namespace vigil

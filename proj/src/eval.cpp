#include "vigil/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vigil {

double EvalConfig::alarm_bound(SensorType type) const {
  switch (type) {
    case SensorType::Gps: return alarm_bound_gps;
    case SensorType::Gyro: return alarm_bound_gyro;
    default: return alarm_bound_other;
  }
}

std::string to_string(DetectionClass c) {
  switch (c) {
    case DetectionClass::TruePositive: return "TP";
    case DetectionClass::FalsePositive: return "FP";
    case DetectionClass::TrueNegative: return "TN";
    case DetectionClass::FalseNegative: return "FN";
  }
  return "?";
}

std::vector<InstanceOutcome> classify_detection(const FlightArtifacts& flight,
                                                const SensorSuite& suite,
                                                const EvalConfig& cfg) {
  std::vector<InstanceOutcome> out;
  for (const SensorConfig& s : suite.sensors()) {
    InstanceOutcome o;
    o.instance_id = s.instance_id;
    auto label_it = flight.instance_label.find(s.instance_id);
    o.label = label_it != flight.instance_label.end()
                  ? label_it->second
                  : std::to_string(s.instance_id);
    o.attacked = flight.attacked_instances.count(s.instance_id) &&
                 flight.attack_start >= 0;
    auto alarm_it = flight.first_alarms.find(s.instance_id);
    o.alarmed = alarm_it != flight.first_alarms.end();
    if (o.alarmed) o.alarm_time = alarm_it->second;

    if (o.attacked) {
      double bound = cfg.alarm_bound(s.type);
      bool effective = o.alarmed && o.alarm_time >= flight.attack_start &&
                       o.alarm_time <= flight.attack_start + bound;
      o.cls = effective ? DetectionClass::TruePositive
                        : DetectionClass::FalseNegative;
      if (effective) o.ttd = o.alarm_time - flight.attack_start;
    } else {
      o.cls = o.alarmed ? DetectionClass::FalsePositive
                        : DetectionClass::TrueNegative;
    }
    out.push_back(std::move(o));
  }
  return out;
}

std::optional<double> ttd(const InstanceOutcome& outcome,
                          double attack_start) {
  if (outcome.cls != DetectionClass::TruePositive) return std::nullopt;
  return outcome.alarm_time - attack_start;
}

std::optional<RecoveryDuration> recovery_duration(const FlightLog& log,
                                                  double first_alarm,
                                                  const EvalConfig& cfg) {
  if (first_alarm < 0) return std::nullopt;
  RecoveryDuration rd;
  double end = first_alarm;
  for (const FlightRow& r : log.rows) {
    if (r.t < first_alarm) continue;
    end = r.t;
    double d = (r.truth_position - r.active_position).norm();
    if (d > cfg.recovery_epsilon) break;
  }
  rd.seconds = end - first_alarm;
  if (rd.seconds >= cfg.recovery_cap) {
    rd.seconds = cfg.recovery_cap;
    rd.capped = true;
  }
  return rd;
}

FlightOutcome evaluate_flight(const FlightArtifacts& flight,
                              const SensorSuite& suite,
                              const EvalConfig& cfg) {
  FlightOutcome o;
  o.seed = flight.seed;
  o.terminal = flight.terminal;
  o.attack_start = flight.attack_start;
  o.sim_seconds = flight.sim_seconds;
  o.wall_seconds = flight.wall_seconds;
  o.instances = classify_detection(flight, suite, cfg);
  o.first_alarm = -1.0;
  for (const auto& [id, t] : flight.first_alarms)
    if (o.first_alarm < 0 || t < o.first_alarm) o.first_alarm = t;
  if (auto rd = recovery_duration(flight.log, o.first_alarm, cfg)) {
    o.recovery_duration = rd->seconds;
    o.recovery_capped = rd->capped;
  }
  return o;
}

namespace {

// Slim per-flight view kept for threshold sweeps after logs are dropped.
struct SweepFlight {
  std::map<FlightArtifacts::EnvelopeKey, std::vector<std::pair<double, double>>>
      envelopes;
  std::set<int> attacked;
  double attack_start = -1.0;
  std::map<int, SensorType> types;
};

// First time the cumulative-max envelope exceeds the threshold; +inf when
// it never does.
double crossing_time(const std::vector<std::pair<double, double>>& env,
                     double threshold) {
  for (const auto& [t, v] : env) {
    if (v > threshold) return t;
  }
  return std::numeric_limits<double>::infinity();
}

MeasuredState primary_state(SensorType type) {
  switch (type) {
    case SensorType::Gps: return MeasuredState::Position;
    case SensorType::Gyro: return MeasuredState::AngularVelocity;
    case SensorType::Accel: return MeasuredState::SpecificForce;
    case SensorType::Baro: return MeasuredState::Altitude;
    case SensorType::Mag: return MeasuredState::Heading;
  }
  return MeasuredState::Position;
}

std::vector<RocPoint> roc_sweep_impl(const std::vector<SweepFlight>& flights,
                                     const DetectorTable& table,
                                     const EvalConfig& cfg, int points) {
  std::vector<RocPoint> roc;
  for (int pi = 0; pi < points; ++pi) {
    // Log-spaced common scale on every component threshold.
    double lo = std::log(0.02), hi = std::log(50.0);
    double scale = std::exp(lo + (hi - lo) * pi / (points - 1));

    long tp = 0, fn = 0, fp = 0, tn = 0;
    for (const SweepFlight& f : flights) {
      for (const auto& [id, type] : f.types) {
        const DetectorParams& p = table.params(type, primary_state(type));
        bool attacked = f.attacked.count(id) && f.attack_start >= 0;

        // Earliest effective crossing across the instance's streams.
        double t_alarm = std::numeric_limits<double>::infinity();
        for (const auto& [key, env] : f.envelopes) {
          if (std::get<0>(key) != id) continue;
          int comp = std::get<2>(key);
          double thr = 0.0;
          switch (p.kind) {
            case DetectorKind::CsEma:
              if (comp == 0) thr = p.cusum_threshold * scale;
              else if (comp == 1) thr = p.ema_threshold * scale;
              else continue;
              break;
            case DetectorKind::Cusum:
              if (comp != 0) continue;
              thr = p.cusum_threshold * scale;
              break;
            case DetectorKind::L1Window:
            case DetectorKind::L2Window:
              if (comp != 2) continue;
              thr = p.window_threshold * scale;
              break;
          }
          t_alarm = std::min(t_alarm, crossing_time(env, thr));
        }

        if (attacked) {
          double bound = cfg.alarm_bound(type);
          bool effective = t_alarm >= f.attack_start &&
                           t_alarm <= f.attack_start + bound;
          (effective ? tp : fn) += 1;
        } else {
          (std::isfinite(t_alarm) ? fp : tn) += 1;
        }
      }
    }

    RocPoint pt;
    pt.threshold_scale = scale;
    pt.tpr = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    pt.fpr = fp + tn > 0 ? static_cast<double>(fp) / (fp + tn) : 0.0;
    roc.push_back(pt);
  }
  return roc;
}

}  // namespace

std::vector<RocPoint> roc_sweep(const std::vector<FlightArtifacts>& flights,
                                const DetectorTable& table,
                                const EvalConfig& cfg, int points) {
  std::vector<SweepFlight> slim;
  for (const FlightArtifacts& f : flights) {
    SweepFlight s;
    s.envelopes = f.envelopes;
    s.attacked = f.attacked_instances;
    s.attack_start = f.attack_start;
    for (const auto& [id, label] : f.instance_label) {
      if (label.rfind("gyro", 0) == 0) s.types[id] = SensorType::Gyro;
      else if (label.rfind("accel", 0) == 0) s.types[id] = SensorType::Accel;
      else if (label.rfind("gps", 0) == 0) s.types[id] = SensorType::Gps;
      else if (label.rfind("baro", 0) == 0) s.types[id] = SensorType::Baro;
      else if (label.rfind("mag", 0) == 0) s.types[id] = SensorType::Mag;
    }
    slim.push_back(std::move(s));
  }
  return roc_sweep_impl(slim, table, cfg, points);
}

double auc_trapezoid(std::vector<RocPoint> points) {
  std::sort(points.begin(), points.end(),
            [](const RocPoint& a, const RocPoint& b) {
              return a.fpr != b.fpr ? a.fpr < b.fpr : a.tpr < b.tpr;
            });
  // Anchor the curve at the corners.
  std::vector<std::pair<double, double>> xy;
  xy.emplace_back(0.0, 0.0);
  for (const RocPoint& p : points) xy.emplace_back(p.fpr, p.tpr);
  xy.emplace_back(1.0, 1.0);

  double auc = 0.0;
  for (size_t i = 1; i < xy.size(); ++i) {
    double dx = xy[i].first - xy[i - 1].first;
    auc += dx * 0.5 * (xy[i].second + xy[i - 1].second);
  }
  return auc;
}

double BatchResult::tpr() const {
  long tp = 0, fn = 0;
  for (const FlightOutcome& o : outcomes) {
    for (const InstanceOutcome& i : o.instances) {
      if (i.cls == DetectionClass::TruePositive) ++tp;
      if (i.cls == DetectionClass::FalseNegative) ++fn;
    }
  }
  return tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
}

double BatchResult::fpr() const {
  long fp = 0, tn = 0;
  for (const FlightOutcome& o : outcomes) {
    for (const InstanceOutcome& i : o.instances) {
      if (i.cls == DetectionClass::FalsePositive) ++fp;
      if (i.cls == DetectionClass::TrueNegative) ++tn;
    }
  }
  return fp + tn > 0 ? static_cast<double>(fp) / (fp + tn) : 0.0;
}

double BatchResult::mean_ttd() const {
  double sum = 0.0;
  long n = 0;
  for (const FlightOutcome& o : outcomes) {
    for (const InstanceOutcome& i : o.instances) {
      if (i.ttd) {
        sum += *i.ttd;
        ++n;
      }
    }
  }
  return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

double BatchResult::mean_recovery() const {
  double sum = 0.0;
  long n = 0;
  for (const FlightOutcome& o : outcomes) {
    if (o.recovery_duration) {
      sum += *o.recovery_duration;
      ++n;
    }
  }
  return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

int BatchResult::alarmed_flights() const {
  int n = 0;
  for (const FlightOutcome& o : outcomes)
    if (o.first_alarm >= 0) ++n;
  return n;
}

uint64_t batch_seed(uint64_t base_seed, int record_index) {
  uint64_t z = base_seed + 0x9E3779B97F4A7C15ull *
                               (static_cast<uint64_t>(record_index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

BatchResult run_case(const BatchCase& batch, const EvalConfig& cfg,
                     bool parallel, int jobs) {
  const int n = cfg.records_per_case;
  BatchResult result;
  result.name = batch.name;
  result.outcomes.resize(n);
  std::vector<SweepFlight> sweep(n);
  SensorSuite suite = SensorSuite::standard(batch.scenario.noise);

  auto worker = [&](int i) {
    ScenarioOptions opts = batch.scenario;
    opts.seed = batch_seed(batch.scenario.seed, i);
    opts.lean_log = true;
    FlightRunner runner(opts);
    FlightArtifacts art = runner.run();
    result.outcomes[i] = evaluate_flight(art, suite, cfg);
    SweepFlight s;
    s.envelopes = std::move(art.envelopes);
    s.attacked = art.attacked_instances;
    s.attack_start = art.attack_start;
    for (const SensorConfig& sc : suite.sensors())
      s.types[sc.instance_id] = sc.type;
    sweep[i] = std::move(s);
  };

  if (parallel) {
#ifdef _OPENMP
    if (jobs > 0) omp_set_num_threads(jobs);
#endif
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) worker(i);
  } else {
    for (int i = 0; i < n; ++i) worker(i);
  }

  result.roc = roc_sweep_impl(sweep, batch.scenario.detectors, cfg,
                              cfg.roc_thresholds);
  result.auc = auc_trapezoid(result.roc);
  return result;
}

std::string outcomes_to_csv(const BatchResult& result) {
  std::ostringstream out;
  out.precision(10);
  out << "case,record,seed,terminal,first_alarm,recovery_s,recovery_capped,"
         "instance,attacked,alarmed,alarm_t,class,ttd\n";
  for (size_t i = 0; i < result.outcomes.size(); ++i) {
    const FlightOutcome& o = result.outcomes[i];
    for (const InstanceOutcome& inst : o.instances) {
      out << result.name << "," << i << "," << o.seed << ","
          << to_string(o.terminal) << "," << o.first_alarm << ",";
      if (o.recovery_duration) out << *o.recovery_duration;
      else out << "n/a";
      out << "," << (o.recovery_capped ? 1 : 0) << "," << inst.label << ","
          << inst.attacked << "," << inst.alarmed << "," << inst.alarm_time
          << "," << to_string(inst.cls) << ",";
      if (inst.ttd) out << *inst.ttd;
      else out << ">=bound";
      out << "\n";
    }
  }
  return out.str();
}

std::string roc_to_csv(const BatchResult& result) {
  std::ostringstream out;
  out.precision(10);
  out << "case,threshold_scale,tpr,fpr\n";
  for (const RocPoint& p : result.roc)
    out << result.name << "," << p.threshold_scale << "," << p.tpr << ","
        << p.fpr << "\n";
  return out.str();
}

std::string summarize(const std::vector<BatchResult>& results,
                      const EvalConfig& cfg) {
  std::ostringstream out;
  out << "case                              flights  TPR     FPR     "
         "alarmed  meanTTD(ms)  meanRec(s)  AUC\n";
  for (const BatchResult& r : results) {
    char line[256];
    double mttd = r.mean_ttd();
    double mrec = r.mean_recovery();
    std::snprintf(line, sizeof(line),
                  "%-32s  %-7zu  %-6.3f  %-6.4f  %-7d  %-11.2f  %-10.2f  %.3f\n",
                  r.name.c_str(), r.outcomes.size(), r.tpr(), r.fpr(),
                  r.alarmed_flights(), mttd * 1e3, mrec, r.auc);
    out << line;
  }
  out << "recovery cap " << cfg.recovery_cap << " s, epsilon "
      << cfg.recovery_epsilon << " m\n";
  return out.str();
}

}  // namespace vigil

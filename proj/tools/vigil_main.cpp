// Command-line front end: single flights, batch evaluation, physical
// parameter learning, detector threshold tuning, and report aggregation.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "vigil/eval.hpp"
#include "vigil/learn.hpp"
#include "vigil/tune.hpp"

namespace fs = std::filesystem;
using namespace vigil;

namespace {

constexpr int kExitConfigError = 1;
constexpr int kExitCrash = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitTimeLimit = 4;
constexpr int kExitIllConditioned = 5;

struct CommonFlags {
  std::string config;
  std::string out = "out";
  int seed = -1;
  int jobs = 0;
  bool no_recovery = false;
  bool no_buffer = false;
  std::string detector;
  std::string model;

  void apply(ScenarioOptions& opts) const {
    if (seed >= 0) opts.seed = static_cast<uint64_t>(seed);
    if (no_recovery) opts.recovery_enabled = false;
    if (no_buffer) opts.disable_buffer();
    if (!detector.empty())
      opts.set_detector_kind(detector_kind_from_string(detector));
    if (model == "coarse") opts.set_coarse_model();
    else if (!model.empty() && model != "full")
      throw ConfigError("unknown model '" + model + "'");
  }
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_jobs) {
  cmd->add_option("--config", flags.config, "scenario config file")
      ->required();
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--seed", flags.seed, "seed override");
  if (with_jobs) cmd->add_option("--jobs", flags.jobs, "parallel flights");
  cmd->add_flag("--no-recovery", flags.no_recovery,
                "disable isolation and recovery");
  cmd->add_flag("--no-buffer", flags.no_buffer,
                "disable the estimator delay buffers");
  cmd->add_option("--detector", flags.detector,
                  "detector family: cs-ema|cusum|l1tw|l2tw");
  cmd->add_option("--model", flags.model, "physical model: full|coarse");
}

int run_fly(const CommonFlags& flags) {
  ScenarioOptions opts = ScenarioOptions::from_file(flags.config);
  flags.apply(opts);
  fs::create_directories(flags.out);

  FlightRunner runner(opts);
  FlightArtifacts art = runner.run();
  art.log.write_csv(flags.out + "/flight_log.csv");

  EvalConfig ecfg;
  SensorSuite suite = SensorSuite::standard(opts.noise);
  FlightOutcome outcome = evaluate_flight(art, suite, ecfg);

  std::ostringstream sum;
  sum << "terminal: " << to_string(outcome.terminal) << "\n";
  sum << "sim_seconds: " << outcome.sim_seconds << "\n";
  sum << "first_alarm: " << outcome.first_alarm << "\n";
  if (outcome.recovery_duration)
    sum << "recovery_s: " << *outcome.recovery_duration
        << (outcome.recovery_capped ? " (capped)" : "") << "\n";
  for (const InstanceOutcome& i : outcome.instances)
    sum << "instance " << i.label << ": " << to_string(i.cls)
        << (i.alarmed ? " alarm@" + std::to_string(i.alarm_time) : "")
        << "\n";
  std::cout << sum.str();
  std::ofstream(flags.out + "/outcome.txt") << sum.str();

  switch (outcome.terminal) {
    case TerminalCondition::MissionComplete: return 0;
    case TerminalCondition::Crash: return kExitCrash;
    case TerminalCondition::Divergence: return kExitDivergence;
    case TerminalCondition::TimeLimit: return kExitTimeLimit;
  }
  return 0;
}

int run_batch(const CommonFlags& flags) {
  Config cfg = Config::from_file(flags.config);
  ScenarioOptions base = ScenarioOptions::from_config(cfg);
  flags.apply(base);
  fs::create_directories(flags.out);

  EvalConfig ecfg;
  ecfg.records_per_case = cfg.get_int("batch.records", 50);

  std::vector<std::string> missions{to_string(base.mission)};
  if (cfg.has("batch.missions")) {
    missions.clear();
    std::istringstream in(cfg.get_string("batch.missions"));
    std::string tok;
    while (in >> tok) missions.push_back(tok);
  }
  std::vector<double> deviations;
  if (cfg.has("batch.deviations")) deviations = cfg.get_doubles("batch.deviations");

  std::vector<BatchCase> cases;
  for (const std::string& mission : missions) {
    ScenarioOptions opts = base;
    opts.mission = mission_kind_from_string(mission);
    if (deviations.empty() || opts.attacks.empty()) {
      std::string name = mission;
      if (!opts.attacks.empty()) name += "[" + opts.attacks[0].label() + "]";
      else name += "[attack-free]";
      cases.push_back({name, opts});
    } else {
      for (double dev : deviations) {
        ScenarioOptions variant = opts;
        for (AttackSpec& a : variant.attacks) a.amplitude = dev;
        cases.push_back({mission + "[" + variant.attacks[0].label() + "]",
                         variant});
      }
    }
  }

  std::vector<BatchResult> results;
  for (const BatchCase& c : cases) {
    std::cout << "case " << c.name << ": " << ecfg.records_per_case
              << " flights\n";
    BatchResult r = run_case(c, ecfg, flags.jobs != 1, flags.jobs);
    std::string stem = flags.out + "/" + c.name;
    std::ofstream(stem + ".outcomes.csv") << outcomes_to_csv(r);
    std::ofstream(stem + ".roc.csv") << roc_to_csv(r);
    results.push_back(std::move(r));
  }

  std::string report = summarize(results, ecfg);
  std::cout << report;
  std::ofstream(flags.out + "/report.txt") << report;
  return 0;
}

int run_learn(const CommonFlags& flags, const std::vector<std::string>& logs) {
  if (logs.empty()) throw ConfigError("learn: no flight logs given");
  Config cfg = Config::from_file(flags.config);
  ScenarioOptions opts = ScenarioOptions::from_config(cfg);
  fs::create_directories(flags.out);

  FitData data;
  bool first = true;
  for (const std::string& path : logs) {
    FitData d = FitData::from_log(FlightLog::read_csv(path));
    if (first) {
      data = std::move(d);
      first = false;
    } else {
      data.append(d);
    }
  }

  LearnedParams learned = learn_parameters(data, opts.plant_params);
  PhysicalParams fitted = learned.apply_to(opts.plant_params);
  std::ofstream(flags.out + "/learned_params.conf")
      << fitted.to_config_text();

  std::cout << "momentum_drag = " << learned.drag.momentum_drag << "\n"
            << "ballistic_x = " << learned.drag.ballistic_x << "\n"
            << "ballistic_y = " << learned.drag.ballistic_y << "\n"
            << "time_constant = " << learned.time_constant.value << "\n"
            << "rotor_gyro_coeff = " << learned.rotor_gyro.value << "\n";

  bool ill = !learned.drag.well_conditioned ||
             !learned.time_constant.well_conditioned ||
             !learned.rotor_gyro.well_conditioned;
  if (ill) {
    for (const std::string& w :
         {learned.drag.warning, learned.time_constant.warning,
          learned.rotor_gyro.warning})
      if (!w.empty()) std::cerr << "warning: " << w << "\n";
    return kExitIllConditioned;
  }
  return 0;
}

int run_tune(const CommonFlags& flags, const std::vector<std::string>& logs) {
  if (logs.size() < 5)
    throw ConfigError("tune: need at least 5 attack-free flight logs");
  Config cfg = Config::from_file(flags.config);
  ScenarioOptions opts = ScenarioOptions::from_config(cfg);
  fs::create_directories(flags.out);

  const DetectorParams& base = opts.detectors.params(
      SensorType::Gyro, MeasuredState::AngularVelocity);
  std::vector<ResidualSeries> flights;
  for (const std::string& path : logs)
    flights.push_back(ResidualSeries::gyro_from_log(FlightLog::read_csv(path),
                                                    base.noise_std));

  TuneResult result =
      tune_gyro_detector(flights, base, TuneGrid{}, flags.jobs != 1);
  std::ofstream(flags.out + "/fpr_threshold_curves.csv")
      << curves_to_csv(result.curves);

  DetectorTable table = opts.detectors;
  DetectorParams tuned = result.selected;
  if (tuned.kind == DetectorKind::Cusum) {
    tuned.cusum_threshold = result.selected_tau;
    tuned.kind = DetectorKind::CsEma;
  } else {
    tuned.ema_threshold = result.selected_tau;
    // keep the cap above the threshold
    tuned.ema_cap = std::max(tuned.ema_cap, 2.0 * result.selected_tau);
  }
  table.params(SensorType::Gyro, MeasuredState::AngularVelocity) = tuned;
  std::ofstream(flags.out + "/tuned_detectors.conf") << table.to_config_text();

  std::cout << "selected tau = " << result.selected_tau << "\n";
  return 0;
}

int run_report(const std::vector<std::string>& csvs) {
  // Re-aggregates outcome CSVs produced by `batch`.
  struct Counts {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    long flights = 0, alarmed = 0;
    double ttd_sum = 0;
    long ttd_n = 0;
    double rec_sum = 0;
    long rec_n = 0;
  };
  std::map<std::string, Counts> cases;

  for (const std::string& path : csvs) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    std::string last_case;
    long last_record = -1;
    while (std::getline(in, line)) {
      std::vector<std::string> f;
      std::istringstream ls(line);
      std::string tok;
      while (std::getline(ls, tok, ',')) f.push_back(tok);
      if (f.size() < 13) continue;
      Counts& c = cases[f[0]];
      long record = std::stol(f[1]);
      if (f[0] != last_case || record != last_record) {
        ++c.flights;
        if (std::stod(f[4]) >= 0) ++c.alarmed;
        if (f[5] != "n/a") {
          c.rec_sum += std::stod(f[5]);
          ++c.rec_n;
        }
        last_case = f[0];
        last_record = record;
      }
      const std::string& cls = f[11];
      if (cls == "TP") ++c.tp;
      else if (cls == "FP") ++c.fp;
      else if (cls == "TN") ++c.tn;
      else if (cls == "FN") ++c.fn;
      if (cls == "TP" && f[12] != ">=bound") {
        c.ttd_sum += std::stod(f[12]);
        ++c.ttd_n;
      }
    }
  }

  for (const auto& [name, c] : cases) {
    double tpr = c.tp + c.fn ? double(c.tp) / (c.tp + c.fn) : 0.0;
    double fpr = c.fp + c.tn ? double(c.fp) / (c.fp + c.tn) : 0.0;
    std::printf(
        "%-32s flights=%ld alarmed=%ld TPR=%.3f FPR=%.4f meanTTD=%.1fms "
        "meanRec=%.1fs\n",
        name.c_str(), c.flights, c.alarmed, tpr, fpr,
        c.ttd_n ? c.ttd_sum / c.ttd_n * 1e3 : 0.0,
        c.rec_n ? c.rec_sum / c.rec_n : 0.0);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV sensor-attack detection and recovery testbed"};
  app.require_subcommand(1);

  CommonFlags fly_flags, batch_flags, learn_flags, tune_flags;
  std::vector<std::string> learn_logs, tune_logs, report_csvs;

  CLI::App* fly = app.add_subcommand("fly", "run one closed-loop flight");
  add_common(fly, fly_flags, false);

  CLI::App* batch = app.add_subcommand("batch", "run a scenario matrix");
  add_common(batch, batch_flags, true);

  CLI::App* learn =
      app.add_subcommand("learn", "fit physical parameters from logs");
  add_common(learn, learn_flags, false);
  learn->add_option("logs", learn_logs, "flight log CSVs")->required();

  CLI::App* tune =
      app.add_subcommand("tune", "select detector thresholds from logs");
  add_common(tune, tune_flags, true);
  tune->add_option("logs", tune_logs, "attack-free flight log CSVs")
      ->required();

  CLI::App* report = app.add_subcommand("report", "aggregate outcome CSVs");
  report->add_option("csvs", report_csvs, "outcome CSV files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (fly->parsed()) return run_fly(fly_flags);
    if (batch->parsed()) return run_batch(batch_flags);
    if (learn->parsed()) return run_learn(learn_flags, learn_logs);
    if (tune->parsed()) return run_tune(tune_flags, tune_logs);
    if (report->parsed()) return run_report(report_csvs);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  return 0;
}

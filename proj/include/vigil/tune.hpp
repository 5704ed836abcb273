#pragma once

#include <string>
#include <vector>

#include "vigil/detect.hpp"
#include "vigil/flightlog.hpp"

namespace vigil {

// Ascending per-flight minimum false-alarm-avoidance thresholds for one
// candidate detector-parameter setting.
struct ThresholdCurve {
  DetectorParams params;
  std::string label;
  std::vector<double> tau_avoid;  // sorted ascending, one per flight

  // Fraction of flights still alarming at the given threshold.
  double fpr_at(double threshold) const;
};

// Residual streams of one flight for one monitored sensor: the two gyro
// reference variants (normalized units), one entry per sample per axis.
struct ResidualSeries {
  std::vector<std::vector<double>> cusum_stream;  // per axis
  std::vector<std::vector<double>> ema_stream;

  static ResidualSeries gyro_from_log(const FlightLog& log,
                                      double noise_std);
};

// Smallest threshold that produces zero alarms on the series: the supremum
// of the detector statistic over the flight.
double tau_avoid(const ResidualSeries& series, const DetectorParams& params);

// The 5th-largest tau_avoid; requires at least five flights.
double reference_threshold(const std::vector<double>& tau_avoid_sorted);

// Safety margin on top of the reference threshold.
double final_threshold(double tau_ref);

struct TuneGrid {
  std::vector<double> cusum_shifts{0.25, 0.3, 0.4, 0.5, 0.75};
  std::vector<std::pair<double, double>> ema_settings{
      {0.005, 0.85}, {0.01, 0.85}, {0.05, 0.85}, {0.01, 0.52}, {0.01, 1.10}};
};

struct TuneResult {
  std::vector<ThresholdCurve> curves;
  // Selected setting: the candidate with the smallest final threshold.
  DetectorParams selected;
  double selected_tau = 0.0;
};

// Runs the candidate grid over a batch of attack-free flights. `parallel`
// fans the per-flight tau_avoid computations out over OpenMP threads; the
// serial path is the reference implementation.
TuneResult tune_gyro_detector(const std::vector<ResidualSeries>& flights,
                              const DetectorParams& base,
                              const TuneGrid& grid, bool parallel);

std::string curves_to_csv(const std::vector<ThresholdCurve>& curves);

}  // namespace vigil

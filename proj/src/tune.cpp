#include "vigil/tune.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vigil/physmodel.hpp"

namespace vigil {

double ThresholdCurve::fpr_at(double threshold) const {
  // Empirical step function: flights whose tau_avoid exceeds the threshold
  // would alarm when run with it.
  auto above = std::upper_bound(tau_avoid.begin(), tau_avoid.end(), threshold);
  return static_cast<double>(tau_avoid.end() - above) /
         static_cast<double>(tau_avoid.size());
}

ResidualSeries ResidualSeries::gyro_from_log(const FlightLog& log,
                                             double noise_std) {
  ResidualSeries s;
  s.cusum_stream.resize(3);
  s.ema_stream.resize(3);
  for (const FlightRow& r : log.rows) {
    if (log.detectors_armed_at < 0 || r.t < log.detectors_armed_at) continue;
    for (int ax = 0; ax < 3; ++ax) {
      s.cusum_stream[ax].push_back(
          (r.gyro0[ax] - r.ref_angular_velocity_cs[ax]) / noise_std);
      s.ema_stream[ax].push_back(
          (r.gyro0[ax] - r.ref_angular_velocity[ax]) / noise_std);
    }
  }
  return s;
}

double tau_avoid(const ResidualSeries& series, const DetectorParams& params) {
  if (series.cusum_stream.empty() || series.cusum_stream[0].empty())
    throw ConfigError("tau_avoid: empty residual series");

  double sup = 0.0;
  for (size_t ax = 0; ax < series.cusum_stream.size(); ++ax) {
    DetectorState st;
    const auto& cs = series.cusum_stream[ax];
    const auto& em = series.ema_stream[ax];
    for (size_t i = 0; i < cs.size(); ++i) {
      switch (params.kind) {
        case DetectorKind::CsEma: {
          // Components are thresholded separately; the curve tracks the
          // binding one, with both statistics in normalized units.
          cusum_update(st, cs[i], params);
          ema_update(st, em[i], params);
          sup = std::max(sup, st.cusum);
          sup = std::max(sup, std::fabs(st.ema));
          break;
        }
        case DetectorKind::Cusum:
          cusum_update(st, cs[i], params);
          sup = std::max(sup, st.cusum);
          break;
        case DetectorKind::L1Window:
        case DetectorKind::L2Window: {
          window_update(st, em[i], params,
                        params.kind == DetectorKind::L2Window);
          double stat = params.kind == DetectorKind::L2Window
                            ? st.window_sum / params.window_length
                            : st.window_sum;
          sup = std::max(sup, stat);
          break;
        }
      }
    }
  }
  return sup;
}

double reference_threshold(const std::vector<double>& tau_avoid_sorted) {
  if (tau_avoid_sorted.size() < 5)
    throw ConfigError("reference_threshold: need at least 5 flights");
  return tau_avoid_sorted[tau_avoid_sorted.size() - 5];
}

double final_threshold(double tau_ref) {
  if (tau_ref < 0)
    throw ConfigError("final_threshold: negative reference threshold");
  return 1.05 * tau_ref;
}

TuneResult tune_gyro_detector(const std::vector<ResidualSeries>& flights,
                              const DetectorParams& base, const TuneGrid& grid,
                              bool parallel) {
  TuneResult result;

  std::vector<DetectorParams> candidates;
  std::vector<std::string> labels;
  for (double b : grid.cusum_shifts) {
    DetectorParams p = base;
    p.kind = DetectorKind::Cusum;
    p.cusum_shift = b;
    candidates.push_back(p);
    std::ostringstream label;
    label << "cusum_b" << b;
    labels.push_back(label.str());
  }
  for (auto [lambda, cap] : grid.ema_settings) {
    DetectorParams p = base;
    p.kind = DetectorKind::CsEma;
    p.ema_lambda = lambda;
    p.ema_cap = cap;
    candidates.push_back(p);
    std::ostringstream label;
    label << "ema_l" << lambda << "_R" << cap;
    labels.push_back(label.str());
  }

  for (size_t c = 0; c < candidates.size(); ++c) {
    ThresholdCurve curve;
    curve.params = candidates[c];
    curve.label = labels[c];
    curve.tau_avoid.assign(flights.size(), 0.0);

    if (parallel) {
#pragma omp parallel for schedule(dynamic)
      for (long i = 0; i < static_cast<long>(flights.size()); ++i)
        curve.tau_avoid[i] = tau_avoid(flights[i], candidates[c]);
    } else {
      for (size_t i = 0; i < flights.size(); ++i)
        curve.tau_avoid[i] = tau_avoid(flights[i], candidates[c]);
    }
    std::sort(curve.tau_avoid.begin(), curve.tau_avoid.end());
    result.curves.push_back(std::move(curve));
  }

  double best = std::numeric_limits<double>::infinity();
  for (const ThresholdCurve& curve : result.curves) {
    double tau = final_threshold(reference_threshold(curve.tau_avoid));
    if (tau < best) {
      best = tau;
      result.selected = curve.params;
      result.selected_tau = tau;
    }
  }
  return result;
}

std::string curves_to_csv(const std::vector<ThresholdCurve>& curves) {
  std::ostringstream out;
  out << "candidate,flight_rank,tau_avoid,fpr\n";
  out.precision(10);
  for (const ThresholdCurve& c : curves) {
    for (size_t i = 0; i < c.tau_avoid.size(); ++i) {
      double fpr = static_cast<double>(c.tau_avoid.size() - 1 - i) /
                   static_cast<double>(c.tau_avoid.size());
      out << c.label << "," << i << "," << c.tau_avoid[i] << "," << fpr
          << "\n";
    }
  }
  return out.str();
}

}  // namespace vigil

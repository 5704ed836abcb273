#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vigil/flightlog.hpp"
#include "vigil/physmodel.hpp"

namespace vigil {

struct SimplexConfig {
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
  double tolerance = 1e-10;  // simplex diameter
  int max_iterations = 2000;
  double initial_step = 0.5;  // relative to |x0|, absolute when x0 ~ 0
};

struct SimplexResult {
  std::vector<double> argmin;
  double min_value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Downhill simplex search. Aborts with an error on a non-finite objective.
SimplexResult nelder_mead(
    const std::function<double(const std::vector<double>&)>& objective,
    const std::vector<double>& initial, const SimplexConfig& cfg = {});

// Time-aligned series extracted from a flight log for the parameter fits.
struct FitData {
  double dt = 0.004;
  std::vector<Quat> attitude;        // estimated
  std::vector<Vec3> velocity;        // estimated, NED
  std::vector<Vec3> wind;            // estimated, NED
  std::vector<double> density;       // measured
  std::vector<Vec3> body_accel;      // measured specific force
  std::vector<Vec3> angular_velocity;  // measured
  std::vector<std::array<double, 4>> actuator_us;
  std::vector<double> battery_voltage;
  std::vector<double> battery_current;

  size_t size() const { return attitude.size(); }
  static FitData from_log(const FlightLog& log);
  void append(const FitData& other);
};

struct FitResult {
  double value = 0.0;       // fitted parameter (or objective for diagnostics)
  double objective = 0.0;   // residual sum of squares at the optimum
  bool well_conditioned = true;
  std::string warning;
};

struct DragFit {
  double momentum_drag = 0.0;
  double ballistic_x = 0.0;
  double ballistic_y = 0.0;
  double objective = 0.0;
  bool well_conditioned = true;
  std::string warning;
};

// Drag objective: squared error between the drag model's horizontal body
// acceleration and the measured one, over the whole record.
double drag_objective(const FitData& data, const PhysicalParams& base,
                      double momentum_drag, double ballistic_x,
                      double ballistic_y);

DragFit fit_drag_params(const FitData& data, const PhysicalParams& base,
                        const SimplexConfig& cfg = {});

double time_constant_objective(const FitData& data, const PhysicalParams& base,
                               const DragFit& drag, double time_constant);

FitResult fit_time_constant(const FitData& data, const PhysicalParams& base,
                            const DragFit& drag,
                            const SimplexConfig& cfg = {});

double rotor_gyro_objective(const FitData& data, const PhysicalParams& base,
                            double time_constant, double rotor_gyro);

FitResult fit_rotor_gyro(const FitData& data, const PhysicalParams& base,
                         double time_constant, const SimplexConfig& cfg = {});

// The full pipeline: drag, then rotor time constant, then rotor gyroscopic
// coefficient, each consuming the previous fit as fixed values.
struct LearnedParams {
  DragFit drag;
  FitResult time_constant;
  FitResult rotor_gyro;

  PhysicalParams apply_to(const PhysicalParams& base) const;
};

LearnedParams learn_parameters(const FitData& data, const PhysicalParams& base,
                               const SimplexConfig& cfg = {});

}  // namespace vigil

// Wall-clock comparison of the serial and OpenMP batch runners.

#include <omp.h>

#include <cstdio>

#include "vigil/eval.hpp"

using namespace vigil;

int main(int argc, char** argv) {
  int flights = argc > 1 ? std::atoi(argv[1]) : 16;
  double horizon = argc > 2 ? std::atof(argv[2]) : 40.0;

  BatchCase c;
  c.name = "bench";
  c.scenario = ScenarioOptions::from_file("configs/hover.conf");
  c.scenario.max_flight_s = horizon;
  EvalConfig cfg;
  cfg.records_per_case = flights;

  double t0 = omp_get_wtime();
  BatchResult serial = run_case(c, cfg, false);
  double t1 = omp_get_wtime();
  BatchResult parallel = run_case(c, cfg, true);
  double t2 = omp_get_wtime();

  bool identical = serial.outcomes.size() == parallel.outcomes.size();
  for (size_t i = 0; identical && i < serial.outcomes.size(); ++i) {
    identical = serial.outcomes[i].seed == parallel.outcomes[i].seed &&
                serial.outcomes[i].terminal == parallel.outcomes[i].terminal &&
                serial.outcomes[i].first_alarm == parallel.outcomes[i].first_alarm;
  }

  std::printf("flights: %d x %.0fs\n", flights, horizon);
  std::printf("serial:   %.3f s\n", t1 - t0);
  std::printf("parallel: %.3f s  (%d threads)\n", t2 - t1,
              omp_get_max_threads());
  std::printf("speedup:  %.2fx\n", (t1 - t0) / (t2 - t1));
  std::printf("outcomes identical: %s\n", identical ? "yes" : "NO");
  return identical ? 0 : 1;
}

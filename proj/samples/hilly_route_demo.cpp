// Plans a speed profile over rolling hills and compares it with cruise control.
//
//   hilly_route_demo [length_km]

#include <cstdio>
#include <cstdlib>

#include "ecodrive/ecodrive.hpp"

int main(int argc, char** argv) {
  using namespace ecodrive;
  ScenarioConfig cfg;
  if (argc > 1) cfg.road.synth.length_km = std::atof(argv[1]);
  const RoadProfile road = build_road(cfg);
  std::printf("road: %zu segments, max slope %.2f deg\n", road.size(), road.max_abs_slope() * 180.0 / 3.14159265358979);

  const ScenarioRun run = run_scenario(road, cfg, nullptr, fingerprint(road, cfg, 0));
  const auto& r = run.report;
  std::printf("%-6s %12s %10s %10s\n", "", "dSOC", "time [s]", "Ah");
  std::printf("%-6s %12.6f %10.1f %10.3f\n", "admm", r.admm.energy_soc, r.admm.trip_time_s, r.admm.drive_ah);
  std::printf("%-6s %12.6f %10.1f %10.3f\n", "cc", r.cc.energy_soc, r.cc.trip_time_s, r.cc.drive_ah);
  std::printf("energy %+.2f %%, windows %zu, fallbacks %d, median iterations %d\n", r.energy_delta_pct,
              r.admm.windows, r.admm.fallbacks, r.admm.median_iters);

  std::printf("\n%8s %9s %9s %9s\n", "km", "alt [m]", "admm", "cc");
  const auto h = road.altitudes();
  for (std::size_t k = 0; k < h.size(); k += 20) {
    std::printf("%8.1f %9.1f %9.2f %9.2f\n", k * road.segment_l / 1000.0, h[k], run.admm.traj.x[k] * 3.6,
                run.cc.traj.x[k] * 3.6);
  }
  return 0;
}

#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "ecodrive/dynamics.hpp"
#include "ecodrive/objective.hpp"

namespace ecodrive::testing {

inline std::vector<RoadSegment> flat_road(std::size_t n, double l = 50.0) {
  return std::vector<RoadSegment>(n, RoadSegment{l, 0.0, 0.0});
}

inline std::vector<RoadSegment> sloped_road(const std::vector<double>& slopes, double l = 50.0) {
  std::vector<RoadSegment> r;
  double h = 0.0;
  for (double a : slopes) {
    r.push_back({l, a, h});
    h += l * std::tan(a);
  }
  return r;
}

/// Per-pack SOC from trapezoidal integration of battery power over time.
/// Also returns the integral of |power| in `abs_out` for relative tolerances.
inline double integrate_soc(const VehicleParams& p, const RoadSegment& seg, double x_in, double a,
                            int steps = 10000, double* abs_out = nullptr) {
  const double x_out = state_transition(x_in, a, seg.length_m);
  const double T = segment_time(x_in, x_out, seg.length_m);
  auto power = [&](double t) {
    const double v = x_in + a * t;
    const double f = track_force(p, seg, v, a);
    const double wheel = v * f;
    return wheel >= 0 ? wheel / p.discharge_eff : wheel * p.charge_eff;
  };
  const double h = T / steps;
  double e = 0.0, ea = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double p0 = power(k * h), p1 = power((k + 1) * h);
    e += 0.5 * h * (p0 + p1);
    ea += 0.5 * h * (std::abs(p0) + std::abs(p1));
  }
  if (abs_out) *abs_out = ea * p.soc_per_joule();
  return e * p.soc_per_joule();
}

/// Random boundary speeds in [lo, hi] whose per-segment accelerations are
/// kinematically valid (always true for positive speeds).
inline std::vector<double> random_speeds(std::mt19937_64& rng, std::size_t n_nodes, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> x(n_nodes);
  for (auto& v : x) v = u(rng);
  return x;
}

inline Trajectory consistent(const std::vector<double>& x, const std::vector<RoadSegment>& road) {
  Trajectory t;
  t.x = x;
  for (std::size_t i = 0; i < road.size(); ++i) t.T.push_back(segment_time(x[i], x[i + 1], road[i].length_m));
  return t;
}

}  // namespace ecodrive::testing

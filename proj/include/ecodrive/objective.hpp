#pragma once

// Energy objective over a horizon of segments and the augmented Lagrangian of
// the time/distance-constrained minimum-energy problem.
//
// Decision variables are the N+1 boundary speeds x and the N segment times T.
// The acceleration of segment i follows from its boundary speeds,
// a_i = (x_{i+1}^2 - x_i^2) / (2 l_i), so the total energy regroups into
//
//     E = eta0 + sum_j eta_j x_j^2
//
// with eta built from the per-segment output coefficients.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ecodrive/dynamics.hpp"
#include "ecodrive/errors.hpp"

namespace ecodrive {

struct Trajectory {
  std::vector<double> x;  // N+1 boundary speeds, m/s
  std::vector<double> T;  // N segment times, s

  [[nodiscard]] std::size_t segments() const { return T.size(); }
};

struct EtaCoeffs {
  double eta0 = 0.0;
  std::vector<double> eta;  // N+1
};

struct SpeedBounds {
  std::vector<double> lower;
  std::vector<double> upper;

  static SpeedBounds uniform(std::size_t n_nodes, double lo, double hi) {
    return {std::vector<double>(n_nodes, lo), std::vector<double>(n_nodes, hi)};
  }
  void validate() const {
    require(lower.size() == upper.size(), "speed bounds size mismatch");
    for (std::size_t i = 0; i < lower.size(); ++i) {
      require(lower[i] >= 0 && lower[i] <= upper[i], "speed bounds must satisfy 0 <= lower <= upper");
    }
  }
  [[nodiscard]] double clip(std::size_t i, double v) const {
    return std::min(std::max(v, lower[i]), upper[i]);
  }
};

/// Lagrange multipliers and penalty weights of the relaxed constraints.
struct MultiplierState {
  double lambda = 0.0;      // total-time constraint
  std::vector<double> mu;   // per-segment distance constraints
  double rho1 = 1.0;
  std::vector<double> rho2;

  static MultiplierState zeros(std::size_t n_segments, double rho1, double rho2) {
    return {0.0, std::vector<double>(n_segments, 0.0), rho1, std::vector<double>(n_segments, rho2)};
  }
};

struct Residuals {
  double time = 0.0;          // sum(T) - tau
  std::vector<double> dist;   // T_i (x_i + x_{i+1}) - 2 l_i

  [[nodiscard]] double norm() const {
    double s = time * time;
    for (double d : dist) s += d * d;
    return std::sqrt(s);
  }
};

[[nodiscard]] inline double accel_from_speeds(double x_in, double x_out, double length) {
  require(length > 0, "segment length must be positive");
  return (x_out * x_out - x_in * x_in) / (2.0 * length);
}

namespace detail {
inline void check_horizon(std::span<const double> x, std::span<const RoadSegment> road) {
  require(!road.empty(), "empty horizon");
  require(x.size() == road.size() + 1, "speed vector must have one entry per segment boundary");
  for (double v : x) {
    if (!(v >= 0)) throw KinematicsError("boundary speeds must be non-negative");
  }
}
}  // namespace detail

/// Per-segment output coefficients at the force cases induced by x.
[[nodiscard]] inline std::vector<GammaCoeffs> horizon_gammas(std::span<const double> x,
                                                             std::span<const RoadSegment> road,
                                                             const VehicleParams& p) {
  detail::check_horizon(x, road);
  std::vector<GammaCoeffs> out(road.size());
  for (std::size_t i = 0; i < road.size(); ++i) {
    const double a = accel_from_speeds(x[i], x[i + 1], road[i].length_m);
    out[i] = gamma_coeffs(p, road[i], classify_case(p, road[i], x[i], a));
  }
  return out;
}

[[nodiscard]] inline EtaCoeffs eta_from_gammas(std::span<const GammaCoeffs> g,
                                               std::span<const RoadSegment> road) {
  const std::size_t n = road.size();
  EtaCoeffs e;
  e.eta.assign(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = g[i].g1 / (2.0 * road[i].length_m);
    e.eta0 += g[i].g0;
    e.eta[i] += g[i].g2 - w;
    e.eta[i + 1] += w;
  }
  return e;
}

[[nodiscard]] inline EtaCoeffs eta_coeffs(std::span<const double> x, std::span<const RoadSegment> road,
                                          const VehicleParams& p) {
  const auto g = horizon_gammas(x, road, p);
  return eta_from_gammas(g, road);
}

/// Per-pack SOC consumed over the horizon.
[[nodiscard]] inline double total_energy(std::span<const double> x, std::span<const RoadSegment> road,
                                         const VehicleParams& p) {
  const auto e = eta_coeffs(x, road, p);
  double sum = e.eta0;
  for (std::size_t j = 0; j < x.size(); ++j) sum += e.eta[j] * x[j] * x[j];
  return sum;
}

[[nodiscard]] inline Residuals residuals(const Trajectory& traj, double tau,
                                         std::span<const RoadSegment> road) {
  require(traj.T.size() == road.size() && traj.x.size() == road.size() + 1,
          "trajectory does not match the horizon");
  Residuals r;
  r.dist.resize(road.size());
  double total = 0.0;
  for (std::size_t i = 0; i < road.size(); ++i) {
    total += traj.T[i];
    r.dist[i] = traj.T[i] * (traj.x[i] + traj.x[i + 1]) - 2.0 * road[i].length_m;
  }
  r.time = total - tau;
  return r;
}

/// Constraint part of the augmented Lagrangian (multiplier and penalty terms).
[[nodiscard]] inline double constraint_terms(const Residuals& r, const MultiplierState& m) {
  double v = m.lambda * r.time + 0.5 * m.rho1 * r.time * r.time;
  for (std::size_t i = 0; i < r.dist.size(); ++i) {
    v += m.mu[i] * r.dist[i] + 0.5 * m.rho2[i] * r.dist[i] * r.dist[i];
  }
  return v;
}

/// E + lambda*r_t + sum mu_i r_i + rho1/2 r_t^2 + sum rho2_i/2 r_i^2.
///
/// `energy_scale` multiplies the SOC objective; the solver uses it to bring the
/// energy and the constraint penalties onto comparable magnitudes.
[[nodiscard]] inline double augmented_lagrangian(const Trajectory& traj, const MultiplierState& mult,
                                                 double tau, std::span<const RoadSegment> road,
                                                 const VehicleParams& p, double energy_scale = 1.0) {
  require(mult.mu.size() == road.size() && mult.rho2.size() == road.size(),
          "multiplier state does not match the horizon");
  const double e = total_energy(traj.x, road, p);
  return energy_scale * e + constraint_terms(residuals(traj, tau, road), mult);
}

/// Gradient of the augmented Lagrangian with respect to x, T held fixed and
/// the output coefficients frozen at the force cases induced by x.
///
/// Freezing l_star is exact rather than an approximation: the split point sits
/// where the track force vanishes, so the energy's sensitivity to l_star is
/// zero there.
[[nodiscard]] inline std::vector<double> grad_x(const Trajectory& traj, const MultiplierState& mult,
                                                double tau, std::span<const RoadSegment> road,
                                                const VehicleParams& p, double energy_scale = 1.0) {
  const auto e = eta_coeffs(traj.x, road, p);
  const auto r = residuals(traj, tau, road);
  const std::size_t n = road.size();
  std::vector<double> g(n + 1);
  for (std::size_t j = 0; j <= n; ++j) g[j] = energy_scale * 2.0 * e.eta[j] * traj.x[j];
  for (std::size_t i = 0; i < n; ++i) {
    const double w = (mult.mu[i] + mult.rho2[i] * r.dist[i]) * traj.T[i];
    g[i] += w;
    g[i + 1] += w;
  }
  return g;
}

}  // namespace ecodrive

#pragma once

// Longitudinal truck dynamics over constant-acceleration road segments.
//
// A segment of length l is traversed with constant acceleration a, so the
// squared speed is affine in the travelled distance s:
//
//     v(s)^2 = x_in^2 + 2 a s
//
// and the track force F(s) = m a + beta0 + beta_air v(s)^2 is affine in s as
// well. The battery energy over the segment is the distance integral of
// F(s) / beta, where beta is the discharge efficiency while F >= 0 and the
// inverse charge efficiency while F < 0. Because F changes sign at most once,
// the integral splits into at most two pieces, which gives the four force
// cases below and the quadratic output form
//
//     dSOC = g0 + g1 a + g2 x_in^2.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ecodrive/errors.hpp"

namespace ecodrive {

/// Truck and battery constants. Defaults describe a 40 t battery-electric
/// semi with four 800 V / 312.5 Ah packs.
struct VehicleParams {
  double mass_kg = 40000.0;
  double rolling_coeff = 0.0055;
  double frontal_area_m2 = 10.0;
  double drag_coeff = 0.36;
  double air_density = 1.225;
  /// Battery-to-wheel efficiency used while the track force is non-negative.
  double discharge_eff = 0.85;
  /// Wheel-to-battery efficiency used while regenerating.
  double charge_eff = 0.80;
  double pack_voltage_v = 800.0;
  double pack_capacity_ah = 312.5;
  int n_packs = 4;
  double gravity = 9.81;

  void validate() const {
    require(mass_kg > 0 && rolling_coeff > 0 && frontal_area_m2 > 0 && drag_coeff > 0 &&
                air_density > 0 && pack_voltage_v > 0 && pack_capacity_ah > 0 && gravity > 0,
            "vehicle parameters must be strictly positive");
    require(discharge_eff > 0 && discharge_eff <= 1, "discharge efficiency must lie in (0, 1]");
    require(charge_eff > 0 && charge_eff <= 1, "charge efficiency must lie in (0, 1]");
    require(n_packs >= 1, "n_packs must be at least 1");
  }

  /// Converts battery energy in joules (all packs together) into the SOC
  /// fraction of one pack, assuming the load is split evenly across packs.
  [[nodiscard]] double soc_per_joule() const {
    return 1.0 / (pack_voltage_v * pack_capacity_ah * 3600.0 * n_packs);
  }
};

struct RoadSegment {
  double length_m = 50.0;
  double slope_rad = 0.0;
  double altitude_start_m = 0.0;

  void validate() const {
    require(length_m > 0, "segment length must be positive");
    require(std::abs(slope_rad) < std::numbers::pi / 2, "segment slope must be within (-pi/2, pi/2)");
  }
  [[nodiscard]] double altitude_end_m() const {
    return altitude_start_m + length_m * std::tan(slope_rad);
  }
};

/// Aerodynamic coefficient (identical for every segment) and the
/// slope-dependent constant resistance.
struct SegmentCoeffs {
  double beta_air = 0.0;  // kg/m
  double beta0 = 0.0;     // N
};

enum class ForceCase { I, II, III, IV };

inline const char* to_string(ForceCase c) {
  switch (c) {
    case ForceCase::I: return "I";
    case ForceCase::II: return "II";
    case ForceCase::III: return "III";
    case ForceCase::IV: return "IV";
  }
  return "?";
}

/// Force-sign classification of one segment.
///
/// Case I: F >= 0 throughout. Case II: F < 0 throughout. Case III: F >= 0 on
/// [0, l_star] then negative. Case IV: F < 0 on [0, l_star] then non-negative.
/// For Cases I and II, l_star equals the segment length (the first-sign piece
/// spans the whole segment).
struct ForceClass {
  ForceCase id = ForceCase::I;
  double l_star = 0.0;
};

/// Output coefficients; g0 + g1 a + g2 x^2 is the per-pack SOC change.
struct GammaCoeffs {
  double g0 = 0.0;
  double g1 = 0.0;
  double g2 = 0.0;

  [[nodiscard]] double eval(double x_in, double a) const { return g0 + g1 * a + g2 * x_in * x_in; }
};

[[nodiscard]] inline SegmentCoeffs segment_coeffs(const VehicleParams& p, const RoadSegment& seg) {
  const double mg = p.mass_kg * p.gravity;
  return {0.5 * p.air_density * p.frontal_area_m2 * p.drag_coeff,
          mg * p.rolling_coeff * std::cos(seg.slope_rad) + mg * std::sin(seg.slope_rad)};
}

[[nodiscard]] inline double track_force(const VehicleParams& p, const RoadSegment& seg, double v,
                                        double a) {
  const auto c = segment_coeffs(p, seg);
  return p.mass_kg * a + c.beta0 + c.beta_air * v * v;
}

/// Speed after travelling `length` at constant acceleration `a` from speed `x`.
[[nodiscard]] inline double state_transition(double x, double a, double length) {
  if (x < 0) throw KinematicsError("negative entry speed");
  const double radicand = x * x + 2.0 * a * length;
  // Rounding in (x_out^2 - x_in^2) / (2l) can leave a tiny negative residue
  // when the exit speed is exactly zero.
  const double tol = 1e-12 * std::max(1.0, x * x);
  if (radicand < -tol) {
    throw KinematicsError("vehicle stops inside the segment (x^2 + 2 a l = " +
                          std::to_string(radicand) + ")");
  }
  return std::sqrt(std::max(radicand, 0.0));
}

/// Traversal time of a constant-acceleration segment from its boundary speeds.
[[nodiscard]] inline double segment_time(double x_in, double x_out, double length) {
  const double s = x_in + x_out;
  if (!(s > 0)) throw DegenerateSegmentError("segment with zero boundary speeds has no finite time");
  return 2.0 * length / s;
}

[[nodiscard]] inline ForceClass classify_case(const VehicleParams& p, const RoadSegment& seg,
                                              double x_in, double a) {
  const double l = seg.length_m;
  (void)state_transition(x_in, a, l);
  const auto c = segment_coeffs(p, seg);
  const double f_start = p.mass_kg * a + c.beta0 + c.beta_air * x_in * x_in;
  const double slope = 2.0 * a * c.beta_air;  // dF/ds
  const double f_end = f_start + slope * l;
  const bool pos_start = f_start >= 0.0;
  const bool pos_end = f_end >= 0.0;
  if (pos_start && pos_end) return {ForceCase::I, l};
  if (!pos_start && !pos_end) return {ForceCase::II, l};
  // Signs differ, so slope != 0 and the root lies inside the segment.
  const double root = std::clamp(-f_start / slope, 0.0, l);
  return {pos_start ? ForceCase::III : ForceCase::IV, root};
}

/// Output coefficients for the classified case, already scaled to per-pack
/// SOC. `first` and `second` are the distances spent under the first and the
/// second force sign; each piece contributes
///
///   g0 += d * beta0 / eff
///   g1 += d * (m + beta_air * (s0 + s1)) / eff
///   g2 += d * beta_air / eff
///
/// where [s0, s1] is the piece's distance interval and 1/eff is the
/// battery-energy factor for its sign.
[[nodiscard]] inline GammaCoeffs gamma_coeffs(const VehicleParams& p, const RoadSegment& seg,
                                              const ForceClass& fc) {
  const double l = seg.length_m;
  const auto c = segment_coeffs(p, seg);
  const double pos = 1.0 / p.discharge_eff;
  const double neg = p.charge_eff;
  double first_factor = pos;
  double second_factor = neg;
  switch (fc.id) {
    case ForceCase::I: first_factor = pos; break;
    case ForceCase::II: first_factor = neg; break;
    case ForceCase::III: first_factor = pos; second_factor = neg; break;
    case ForceCase::IV: first_factor = neg; second_factor = pos; break;
  }
  const bool split = fc.id == ForceCase::III || fc.id == ForceCase::IV;
  const double l1 = split ? std::clamp(fc.l_star, 0.0, l) : l;
  const double l2 = l - l1;

  GammaCoeffs g;
  g.g0 = c.beta0 * (l1 * first_factor + l2 * second_factor);
  g.g1 = l1 * first_factor * (p.mass_kg + c.beta_air * l1) +
         l2 * second_factor * (p.mass_kg + c.beta_air * (l1 + l));
  g.g2 = c.beta_air * (l1 * first_factor + l2 * second_factor);

  const double k = p.soc_per_joule();
  g.g0 *= k;
  g.g1 *= k;
  g.g2 *= k;
  return g;
}

/// Per-pack SOC consumed on the segment (positive = discharge).
[[nodiscard]] inline double soc_change(const VehicleParams& p, const RoadSegment& seg, double x_in,
                                       double a) {
  const auto fc = classify_case(p, seg, x_in, a);
  return gamma_coeffs(p, seg, fc).eval(x_in, a);
}

}  // namespace ecodrive

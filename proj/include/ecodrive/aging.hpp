#pragma once

// Cycle aging of one battery pack under a daily drive + overnight charge
// cycle. The fading rate per processed Ah depends on the charge-weighted SOC
// mean and standard deviation of the cycle:
//
//     xi' = k1 * dev * exp(k2 * avg) + k3 * exp(k4 * dev)
//
// and a cycle fades xi' * Q Ah, Q being the Ah processed (charge and
// discharge both count).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecodrive/errors.hpp"

namespace ecodrive {

struct AgingParams {
  double k1 = 0.0;
  double k2 = 0.0;
  double k3 = 0.0;
  double k4 = 0.0;

  void validate() const { require(k3 > 0, "k3 (fade rate at zero SOC deviation) must be positive"); }
};

struct SocSample {
  double q_ah = 0.0;  // cumulative Ah processed
  double soc = 0.0;
};
using SocTrace = std::vector<SocSample>;

struct CycleStats {
  double soc_avg = 0.0;
  double soc_dev = 0.0;
  double q_processed = 0.0;  // Ah
};

/// Charge-weighted mean and standard deviation of SOC over Q.
///
/// SOC is taken as piecewise linear between samples and both moments are
/// integrated exactly on each piece.
[[nodiscard]] inline CycleStats soc_stats(std::span<const SocSample> trace) {
  require(trace.size() >= 2, "SOC trace needs at least two samples");
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k + 1 < trace.size(); ++k) {
    const double dq = trace[k + 1].q_ah - trace[k].q_ah;
    require(dq >= 0, "SOC trace must have nondecreasing Q");
    const double a = trace[k].soc, b = trace[k + 1].soc;
    m1 += dq * 0.5 * (a + b);
    m2 += dq * (a * a + a * b + b * b) / 3.0;
  }
  const double q = trace.back().q_ah - trace.front().q_ah;
  if (!(q > 0)) throw InvalidArgument("SOC statistics are undefined when no charge is processed");
  CycleStats s;
  s.q_processed = q;
  s.soc_avg = m1 / q;
  s.soc_dev = std::sqrt(std::max(0.0, m2 / q - s.soc_avg * s.soc_avg));
  return s;
}

[[nodiscard]] inline double fading_rate(const CycleStats& s, const AgingParams& k) {
  return k.k1 * s.soc_dev * std::exp(k.k2 * s.soc_avg) + k.k3 * std::exp(k.k4 * s.soc_dev);
}

/// Ah of capacity lost over the cycle.
[[nodiscard]] inline double capacity_fade(const CycleStats& s, const AgingParams& k) {
  return fading_rate(s, k) * s.q_processed;
}

inline void write_soc_trace_csv(std::ostream& os, std::span<const SocSample> trace) {
  os << "q_ah,soc\n";
  char buf[64];
  for (const auto& s : trace) {
    char* p = std::to_chars(buf, buf + sizeof buf, s.q_ah).ptr;
    *p++ = ',';
    p = std::to_chars(p, buf + sizeof buf, s.soc).ptr;
    *p++ = '\n';
    os.write(buf, p - buf);
  }
}

[[nodiscard]] inline SocTrace read_soc_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || (line != "q_ah,soc" && line != "q_ah,soc\r")) {
    throw ParseError("SOC trace CSV: expected header 'q_ah,soc'");
  }
  SocTrace t;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("SOC trace CSV: missing comma at row " + std::to_string(row));
    double q = 0.0, soc = 0.0;
    const char* b = line.data();
    const auto r1 = std::from_chars(b, b + comma, q);
    const auto r2 = std::from_chars(b + comma + 1, b + line.size(), soc);
    if (r1.ec != std::errc() || r1.ptr != b + comma || r2.ec != std::errc() || r2.ptr != b + line.size()) {
      throw ParseError("SOC trace CSV: malformed number at row " + std::to_string(row));
    }
    if (!t.empty() && q < t.back().q_ah) throw ParseError("SOC trace CSV: Q decreases at row " + std::to_string(row));
    t.push_back({q, soc});
  }
  return t;
}

/// One observed (stats, rate) pair used for calibration.
struct RatePoint {
  double soc_avg;
  double soc_dev;
  double rate;
};

/// Fits k3 and k4 exactly through two observations with k1 and k2 fixed:
/// after removing the k1 term, the remaining rates satisfy
/// r = k3 exp(k4 dev), which two points determine.
[[nodiscard]] inline AgingParams calibrate_aging(const RatePoint& p1, const RatePoint& p2, double k1,
                                                 double k2) {
  require(p1.soc_dev != p2.soc_dev, "calibration points need distinct SOC deviations");
  const double r1 = p1.rate - k1 * p1.soc_dev * std::exp(k2 * p1.soc_avg);
  const double r2 = p2.rate - k1 * p2.soc_dev * std::exp(k2 * p2.soc_avg);
  require(r1 > 0 && r2 > 0, "k1 term exceeds an observed rate; lower k1");
  AgingParams k;
  k.k1 = k1;
  k.k2 = k2;
  k.k4 = std::log(r1 / r2) / (p1.soc_dev - p2.soc_dev);
  k.k3 = r1 / std::exp(k.k4 * p1.soc_dev);
  return k;
}

/// Published reference points for a 25 degC cell: (0.53, 0.47) -> 1.94e-4 and
/// (0.50, 0.45) -> 1.64e-4 Ah/Ah, where the deviations are normalized so that
/// a full linear sweep gives half its span. soc_stats reports the plain
/// standard deviation (a linear sweep gives span / sqrt(12)), so the
/// deviations are divided by sqrt(3) before fitting.
inline constexpr double kReferenceDevNormalization = 1.7320508075688772;  // sqrt(3)

[[nodiscard]] inline std::pair<RatePoint, RatePoint> reference_rate_points() {
  return {RatePoint{0.53, 0.47 / kReferenceDevNormalization, 1.94e-4},
          RatePoint{0.50, 0.45 / kReferenceDevNormalization, 1.64e-4}};
}

[[nodiscard]] inline AgingParams default_aging_params() {
  const auto [a, b] = reference_rate_points();
  return calibrate_aging(a, b, 1e-5, 1.0);
}

/// Constant-current charge from soc_start to soc_end on a pack of
/// `capacity_ah`; SOC is linear in Q. Returns the two end samples (empty for
/// a zero-width charge) with Q starting at `q0`.
[[nodiscard]] inline SocTrace simulate_charge(double soc_start, double soc_end, double capacity_ah,
                                              double q0 = 0.0) {
  require(soc_end >= soc_start, "charge must not lower SOC");
  require(capacity_ah > 0, "capacity must be positive");
  if (soc_end == soc_start) return {};
  return {{q0, soc_start}, {q0 + (soc_end - soc_start) * capacity_ah, soc_end}};
}

[[nodiscard]] inline double charge_hours(double soc_start, double soc_end, double rate_c) {
  require(rate_c > 0, "charge rate must be positive");
  return (soc_end - soc_start) / rate_c;
}

/// Per-segment drive demand of one route pass in Ah of one pack (positive =
/// discharge), with the segment length used to convert daily distance.
struct DriveProfile {
  std::vector<double> segment_ah;
  double segment_l = 50.0;

  [[nodiscard]] double pass_length_m() const { return segment_l * static_cast<double>(segment_ah.size()); }
};

/// Converts per-pack SOC deltas (fractions of nominal capacity) into Ah.
[[nodiscard]] inline DriveProfile drive_profile(std::span<const double> soc_delta, double nominal_ah,
                                                double segment_l) {
  DriveProfile p;
  p.segment_l = segment_l;
  p.segment_ah.reserve(soc_delta.size());
  for (double d : soc_delta) p.segment_ah.push_back(d * nominal_ah);
  return p;
}

struct DayConfig {
  double daily_km = 540.0;
  double charge_to = 1.0;       // SOC at departure after overnight charge
  double charge_rate_c = 0.1;
  double soc_floor = 0.0;       // driving below this is a range violation
  /// When set, departure SOC is chosen so the day ends at this SOC (and the
  /// charge refills from it to the departure SOC).
  std::optional<double> ending_soc;
  /// Departure SOC when it differs from charge_to (ignored with ending_soc).
  std::optional<double> departure_soc;
};

struct DayResult {
  SocTrace trace;
  CycleStats stats;
  double drive_ah = 0.0;   // |Ah| processed while driving
  double charge_ah = 0.0;  // Ah processed while charging
  double soc_start = 0.0;
  double soc_min = 0.0;
  double soc_end_drive = 0.0;
  double dod = 0.0;  // soc_start - soc_min
  std::size_t segments = 0;
};

[[nodiscard]] inline std::size_t segments_for_distance(const DriveProfile& p, double km) {
  require(km >= 0, "daily distance must be non-negative");
  return static_cast<std::size_t>(std::llround(km * 1000.0 / p.segment_l));
}

/// One day: drive the repeated route for `n_segments` segments, then charge to
/// charge_to (back to the departure SOC in ending-SOC mode). `capacity_ah` is
/// the faded capacity.
[[nodiscard]] inline DayResult simulate_day_segments(const DriveProfile& p, std::size_t n_segments,
                                                     double capacity_ah, const DayConfig& cfg) {
  require(capacity_ah > 0, "capacity must be positive");
  require(!p.segment_ah.empty() || n_segments == 0, "empty drive profile");
  double net_ah = 0.0;
  for (std::size_t k = 0; k < n_segments; ++k) net_ah += p.segment_ah[k % p.segment_ah.size()];
  DayResult d;
  d.segments = n_segments;
  d.soc_start = cfg.ending_soc ? *cfg.ending_soc + net_ah / capacity_ah
                               : cfg.departure_soc.value_or(cfg.charge_to);
  if (d.soc_start > 1.0 + 1e-12) {
    throw RangeExceededError("departure SOC above 100% is needed to reach the requested ending SOC");
  }
  double soc = d.soc_start, q = 0.0;
  d.soc_min = soc;
  d.trace.push_back({0.0, soc});
  for (std::size_t k = 0; k < n_segments; ++k) {
    const double ah = p.segment_ah[k % p.segment_ah.size()];
    soc -= ah / capacity_ah;
    q += std::abs(ah);
    if (soc < cfg.soc_floor - 1e-12) {
      throw RangeExceededError("SOC falls below the floor after " + std::to_string(k + 1) + " segments");
    }
    d.soc_min = std::min(d.soc_min, soc);
    d.trace.push_back({q, soc});
  }
  d.drive_ah = q;
  d.soc_end_drive = soc;
  const double target = cfg.ending_soc ? d.soc_start : cfg.charge_to;
  if (target > soc) {
    const auto ch = simulate_charge(soc, target, capacity_ah, q);
    d.trace.push_back(ch.back());
    d.charge_ah = ch.back().q_ah - q;
  }
  d.dod = d.soc_start - d.soc_min;
  d.stats = soc_stats(d.trace);
  return d;
}

[[nodiscard]] inline DayResult simulate_day(const DriveProfile& p, double capacity_ah, const DayConfig& cfg) {
  return simulate_day_segments(p, segments_for_distance(p, cfg.daily_km), capacity_ah, cfg);
}

/// Segments drivable from `soc_start` before SOC would pass below `soc_end`.
[[nodiscard]] inline std::size_t range_segments(const DriveProfile& p, double capacity_ah, double soc_start,
                                                double soc_end, std::size_t cap = 10'000'000) {
  require(!p.segment_ah.empty(), "empty drive profile");
  double soc = soc_start;
  std::size_t k = 0;
  for (; k < cap; ++k) {
    const double next = soc - p.segment_ah[k % p.segment_ah.size()] / capacity_ah;
    if (next < soc_end) break;
    soc = next;
  }
  return k;
}

struct LifeScenario {
  enum class Mode { FixedDistance, FixedEndingSoc, DistanceSchedule };
  Mode mode = Mode::FixedDistance;
  DayConfig day;
  /// FixedEndingSoc: drive from day.charge_to until this SOC each day.
  double ending_soc = 0.15;
  /// DistanceSchedule: segments per day (last entry repeats), typically the
  /// range curve of another controller.
  std::vector<std::size_t> schedule_segments;
  int days_per_year = 260;
  double eol_fade = 0.30;
  int max_days = 260 * 60;
};

struct LifeResult {
  double years = 0.0;
  int days = 0;
  bool reached_eol = false;
  /// The daily demand could no longer be met before EOL.
  bool range_limited = false;
  std::vector<double> fade_curve;      // fade fraction after each day
  std::vector<double> range_km_curve;  // km driven each day
  std::vector<std::size_t> segments_curve;
  double total_ah = 0.0;
};

/// Iterates days with the capacity fixed within a day and the day's fade
/// applied at its end, until the fade reaches the EOL level.
[[nodiscard]] inline LifeResult project_life(const DriveProfile& p, double nominal_ah, const AgingParams& k,
                                             const LifeScenario& sc) {
  k.validate();
  require(nominal_ah > 0 && sc.days_per_year > 0 && sc.eol_fade > 0 && sc.eol_fade < 1,
          "invalid life scenario");
  LifeResult r;
  double fade = 0.0;
  for (int day = 0; day < sc.max_days && fade < sc.eol_fade; ++day) {
    const double cap = nominal_ah * (1.0 - fade);
    std::size_t n = 0;
    switch (sc.mode) {
      case LifeScenario::Mode::FixedDistance: n = segments_for_distance(p, sc.day.daily_km); break;
      case LifeScenario::Mode::FixedEndingSoc: n = range_segments(p, cap, sc.day.charge_to, sc.ending_soc); break;
      case LifeScenario::Mode::DistanceSchedule:
        require(!sc.schedule_segments.empty(), "empty distance schedule");
        n = sc.schedule_segments[std::min<std::size_t>(static_cast<std::size_t>(day), sc.schedule_segments.size() - 1)];
        break;
    }
    if (n == 0) break;
    DayResult d;
    try {
      d = simulate_day_segments(p, n, cap, sc.day);
    } catch (const RangeExceededError&) {
      if (day == 0) throw;
      r.range_limited = true;
      break;
    }
    fade += capacity_fade(d.stats, k) / nominal_ah;
    r.total_ah += d.stats.q_processed;
    r.fade_curve.push_back(fade);
    r.segments_curve.push_back(n);
    r.range_km_curve.push_back(static_cast<double>(n) * p.segment_l / 1000.0);
    r.days = day + 1;
  }
  if (r.days == 0) throw RangeExceededError("scenario is infeasible on the first day");
  r.reached_eol = fade >= sc.eol_fade;
  r.years = static_cast<double>(r.days) / sc.days_per_year;
  return r;
}

}  // namespace ecodrive

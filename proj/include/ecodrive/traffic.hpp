#pragma once

// Preceding-vehicle traffic: an alternating on/off process with
// exponentially distributed episode lengths, and the speed bound that keeps
// the time headway to the preceding vehicle above h_tau.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ecodrive/errors.hpp"
#include "ecodrive/objective.hpp"

namespace ecodrive {

struct TrafficConfig {
  double mu1_km = 3.0;  // mean distance with a preceding vehicle
  double mu2_km = 2.0;  // mean distance without one
  double h_tau = 1.2;   // s
  double d0_headway_min = 2.0;  // s, initial gap as a headway at v_p
  double d0_headway_max = 4.0;
  double vp_min_kmh = 70.0;
  double vp_max_kmh = 80.0;
  std::uint64_t seed = 1;
  /// Type of the first episode; drawn with a fair coin when unset.
  std::optional<bool> first_present;
  /// Every segment has a preceding vehicle (a single on-episode).
  bool always_present = false;

  static TrafficConfig heavy() { return {}; }
  static TrafficConfig light() {
    TrafficConfig c;
    c.mu1_km = 2.0;
    c.mu2_km = 3.0;
    return c;
  }
  static TrafficConfig normal() {
    TrafficConfig c;
    c.mu1_km = 3.0;
    c.mu2_km = 3.0;
    return c;
  }

  void validate() const {
    require(mu1_km > 0 && mu2_km > 0, "traffic means must be positive");
    require(h_tau > 0, "minimum headway must be positive");
    require(d0_headway_min > 0 && d0_headway_min <= d0_headway_max, "initial headway range must be ordered");
    require(vp_min_kmh > 0 && vp_min_kmh <= vp_max_kmh, "preceding speed range must be ordered");
  }
};

/// Per-segment traffic state. An episode begins where `episode_start` is set;
/// `v_p` and `d_init` are constant over an on-episode and zero elsewhere.
struct TrafficTrace {
  double segment_l = 50.0;
  double h_tau = 1.2;
  std::vector<bool> present;
  std::vector<bool> episode_start;
  std::vector<double> v_p;     // m/s
  std::vector<double> d_init;  // m, gap when the episode begins

  [[nodiscard]] std::size_t size() const { return present.size(); }
  [[nodiscard]] bool any_present(std::size_t begin, std::size_t end) const {
    for (std::size_t i = begin; i < end && i < present.size(); ++i) {
      if (present[i]) return true;
    }
    return false;
  }
  [[nodiscard]] double present_distance_m() const {
    double d = 0.0;
    for (bool b : present) d += b ? segment_l : 0.0;
    return d;
  }
};

/// Platform-independent draws on top of mt19937_64 (the standard
/// distributions are implementation-defined).
class TrafficRng {
 public:
  explicit TrafficRng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Exponential with the given mean, by inversion.
  double exponential(double mean) { return -mean * std::log1p(-uniform()); }
  bool coin() { return (eng_() >> 63) != 0; }

 private:
  std::mt19937_64 eng_;
};

/// Number of whole segments covering an episode of `length_m` (at least one).
[[nodiscard]] inline std::size_t episode_segments(double length_m, double segment_l) {
  const double k = std::ceil(length_m / segment_l - 1e-9);
  return k < 1.0 ? 1 : static_cast<std::size_t>(k);
}

[[nodiscard]] inline TrafficTrace generate_trace(double route_length_m, double segment_l,
                                                 const TrafficConfig& cfg) {
  cfg.validate();
  require(route_length_m > 0 && segment_l > 0, "route length and segment length must be positive");
  const auto n = static_cast<std::size_t>(std::ceil(route_length_m / segment_l - 1e-9));
  TrafficTrace t;
  t.segment_l = segment_l;
  t.h_tau = cfg.h_tau;
  t.present.assign(n, false);
  t.episode_start.assign(n, false);
  t.v_p.assign(n, 0.0);
  t.d_init.assign(n, 0.0);

  TrafficRng rng(cfg.seed);
  bool on = cfg.always_present || cfg.first_present.value_or(rng.coin());
  std::size_t i = 0;
  while (i < n) {
    std::size_t len = n - i;
    if (!cfg.always_present) {
      len = episode_segments(1000.0 * rng.exponential(on ? cfg.mu1_km : cfg.mu2_km), segment_l);
    }
    double vp = 0.0, d0 = 0.0;
    if (on) {
      vp = rng.uniform(cfg.vp_min_kmh, cfg.vp_max_kmh) / 3.6;
      d0 = rng.uniform(cfg.d0_headway_min, cfg.d0_headway_max) * vp;
    }
    t.episode_start[i] = true;
    for (std::size_t k = i; k < n && k < i + len; ++k) {
      t.present[k] = on;
      t.v_p[k] = vp;
      t.d_init[k] = d0;
    }
    i += len;
    on = !on;
  }
  return t;
}

/// Largest exit speed x_out for which the gap at the end of the segment is at
/// least h_tau * x_out, given entry speed x_in, gap d at the segment start and
/// a preceding vehicle at constant v_p. Returns 0 when no positive exit speed
/// is safe.
[[nodiscard]] inline double headway_speed_bound(double x_in, double d, double v_p, double l,
                                                double h_tau) {
  require(h_tau > 0 && l > 0, "headway bound needs positive h_tau and segment length");
  const double L = d - l;
  const double b = L - h_tau * x_in;
  const double disc = b * b + 4.0 * h_tau * (L * x_in + 2.0 * l * v_p);
  if (!(disc >= 0)) return 0.0;
  const double root = (b + std::sqrt(disc)) / (2.0 * h_tau);
  return root > 0 ? root : 0.0;
}

/// Gap after one segment: d + T v_p - l.
[[nodiscard]] inline double update_gap(double d, double v_p, double T, double l) {
  const double next = d + T * v_p - l;
  if (!(next > 0)) throw CollisionError("gap to the preceding vehicle closed (" + std::to_string(next) + " m)");
  return next;
}

/// Upper speed bounds for a planning window starting at route segment
/// `start` with boundary speeds `x_warm` (size n+1) as the candidate profile.
///
/// `gap_now` is the gap at the window start when a preceding vehicle is
/// already being followed. Headway bounds are propagated segment by segment:
/// the bound at node i+1 uses the (clipped) candidate speed at node i, and the
/// predicted gap advances with the candidate timing. The legal bounds are
/// kept where no vehicle is present; elsewhere lower bounds drop to zero.
[[nodiscard]] inline SpeedBounds bounds_for_window(const TrafficTrace& trace, std::size_t start,
                                                   std::span<const double> x_warm,
                                                   std::optional<double> gap_now,
                                                   const SpeedBounds& legal) {
  const std::size_t nn = x_warm.size();
  require(nn >= 2 && legal.lower.size() == nn, "window bounds size mismatch");
  require(start + nn - 1 <= trace.size(), "window runs past the traffic trace");
  SpeedBounds b = legal;
  const double l = trace.segment_l;
  bool has_gap = gap_now.has_value();
  double gap = gap_now.value_or(0.0);
  double x_prev = x_warm[0];
  for (std::size_t i = 0; i + 1 < nn; ++i) {
    const std::size_t seg = start + i;
    if (!trace.present[seg]) {
      has_gap = false;
      x_prev = b.clip(i + 1, x_warm[i + 1]);
      continue;
    }
    const double d = trace.episode_start[seg] || !has_gap ? trace.d_init[seg] : gap;
    const double vp = trace.v_p[seg];
    const double hw = headway_speed_bound(x_prev, d, vp, l, trace.h_tau);
    b.upper[i + 1] = std::min(b.upper[i + 1], hw);
    b.lower[i + 1] = 0.0;
    const double x_next = std::min(std::max(x_warm[i + 1], 0.0), b.upper[i + 1]);
    const double s = x_prev + x_next;
    const double T = s > 0 ? 2.0 * l / s : std::numeric_limits<double>::infinity();
    const double g = d + T * vp - l;
    // Predicted closure: keep a tiny gap so later bounds stay defined (near zero).
    gap = std::isfinite(g) ? std::max(g, 1e-6) : d;
    has_gap = true;
    x_prev = x_next;
  }
  for (std::size_t j = 0; j < nn; ++j) b.lower[j] = std::min(b.lower[j], b.upper[j]);
  return b;
}

inline void write_trace_csv(std::ostream& os, const TrafficTrace& t) {
  os << "segment_index,present,v_p_mps,d_init_m\n";
  std::ostringstream line;
  line.precision(17);
  for (std::size_t i = 0; i < t.size(); ++i) {
    line.str("");
    line << i << ',' << (t.present[i] ? 1 : 0) << ',' << t.v_p[i] << ',' << t.d_init[i] << '\n';
    os << line.str();
  }
}

/// Reads a trace written by write_trace_csv. Episode starts are recovered
/// from changes in (present, v_p, d_init).
[[nodiscard]] inline TrafficTrace read_trace_csv(std::istream& is, double segment_l, double h_tau) {
  TrafficTrace t;
  t.segment_l = segment_l;
  t.h_tau = h_tau;
  std::string line;
  if (!std::getline(is, line)) throw ParseError("traffic trace: empty input");
  if (line.rfind("segment_index,present,v_p_mps,d_init_m", 0) != 0) {
    throw ParseError("traffic trace: unexpected header '" + line + "'");
  }
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    std::string f[4];
    for (auto& s : f) {
      if (!std::getline(ls, s, ',')) throw ParseError("traffic trace: short row " + std::to_string(row));
    }
    try {
      const auto idx = std::stoull(f[0]);
      if (idx != t.size()) throw ParseError("traffic trace: non-consecutive index at row " + std::to_string(row));
      const bool on = std::stoi(f[1]) != 0;
      const double vp = std::stod(f[2]);
      const double d0 = std::stod(f[3]);
      const bool start = t.size() == 0 || t.present.back() != on || t.v_p.back() != vp || t.d_init.back() != d0;
      t.present.push_back(on);
      t.episode_start.push_back(start);
      t.v_p.push_back(vp);
      t.d_init.push_back(d0);
    } catch (const std::logic_error&) {
      throw ParseError("traffic trace: malformed number at row " + std::to_string(row));
    }
  }
  return t;
}

}  // namespace ecodrive

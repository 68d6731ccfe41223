#pragma once

// Road profiles on a uniform segment grid: CSV ingestion with linear
// resampling of altitude, synthetic sinusoidal hills, piecewise grades and
// direction reversal.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ecodrive/dynamics.hpp"
#include "ecodrive/errors.hpp"

namespace ecodrive {

struct RoadProfile {
  std::vector<RoadSegment> segments;
  std::string name;
  std::string source;  // "file:<path>" or "synthetic:<parameters>"
  double segment_l = 50.0;
  /// Altitude at the end of the last segment, kept exactly (recomputing it
  /// from the last slope would round).
  double end_altitude_m = 0.0;

  [[nodiscard]] std::size_t size() const { return segments.size(); }
  [[nodiscard]] double length_m() const { return segment_l * static_cast<double>(segments.size()); }
  [[nodiscard]] double max_abs_slope() const {
    double m = 0.0;
    for (const auto& s : segments) m = std::max(m, std::abs(s.slope_rad));
    return m;
  }
  /// Altitudes at the n+1 grid points.
  [[nodiscard]] std::vector<double> altitudes() const {
    std::vector<double> h;
    h.reserve(segments.size() + 1);
    for (const auto& s : segments) h.push_back(s.altitude_start_m);
    h.push_back(end_altitude_m);
    return h;
  }
};

/// Profile from grid altitudes: slope_k = atan((h_{k+1} - h_k) / l).
[[nodiscard]] inline RoadProfile profile_from_altitudes(const std::vector<double>& h, double segment_l,
                                                        std::string name, std::string source) {
  require(segment_l > 0, "segment length must be positive");
  require(h.size() >= 2, "a road needs at least one segment");
  RoadProfile r;
  r.segments.reserve(h.size() - 1);
  for (std::size_t k = 0; k + 1 < h.size(); ++k) {
    r.segments.push_back({segment_l, std::atan((h[k + 1] - h[k]) / segment_l), h[k]});
  }
  r.segment_l = segment_l;
  r.end_altitude_m = h.back();
  r.name = std::move(name);
  r.source = std::move(source);
  return r;
}

/// Linear interpolation of (d, h) at s; d is strictly increasing and s lies in
/// [d.front(), d.back()]. Sample points are returned exactly.
[[nodiscard]] inline double interpolate_altitude(const std::vector<double>& d, const std::vector<double>& h,
                                                 double s) {
  auto it = std::lower_bound(d.begin(), d.end(), s);
  const auto j = static_cast<std::size_t>(it - d.begin());
  if (j < d.size() && d[j] == s) return h[j];
  require(j > 0 && j < d.size(), "interpolation point outside the profile");
  const double t = (s - d[j - 1]) / (d[j] - d[j - 1]);
  return h[j - 1] + t * (h[j] - h[j - 1]);
}

namespace detail {
inline double parse_double(const std::string& field, std::size_t row) {
  const char* b = field.data();
  const char* e = b + field.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
  double v = 0.0;
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e) {
    throw ParseError("road CSV: malformed number '" + field + "' at row " + std::to_string(row));
  }
  return v;
}
}  // namespace detail

/// Reads `distance_m,altitude_m` rows and resamples altitude onto the grid
/// 0, l, 2l, ... measured from the first distance; the last partial segment
/// is dropped.
[[nodiscard]] inline RoadProfile parse_road_csv(std::istream& is, double segment_l, const std::string& name = "road") {
  require(segment_l > 0, "segment length must be positive");
  std::string line;
  if (!std::getline(is, line)) throw ParseError("road CSV: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "distance_m,altitude_m") throw ParseError("road CSV: expected header 'distance_m,altitude_m', got '" + line + "'");
  std::vector<double> d, h;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("road CSV: missing comma at row " + std::to_string(row));
    const double dist = detail::parse_double(line.substr(0, comma), row);
    const double alt = detail::parse_double(line.substr(comma + 1), row);
    if (!std::isfinite(dist) || !std::isfinite(alt)) throw ParseError("road CSV: non-finite value at row " + std::to_string(row));
    if (!d.empty() && !(dist > d.back())) {
      throw ParseError("road CSV: distance not strictly increasing at row " + std::to_string(row));
    }
    d.push_back(dist);
    h.push_back(alt);
  }
  if (d.size() < 2) throw ParseError("road CSV: need at least two rows");
  const double span = d.back() - d.front();
  const auto n = static_cast<std::size_t>(std::floor(span / segment_l + 1e-9));
  if (n == 0) throw ParseError("road CSV: profile shorter than one segment");
  std::vector<double> grid(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const double s = std::min(d.front() + static_cast<double>(k) * segment_l, d.back());
    grid[k] = interpolate_altitude(d, h, s);
  }
  return profile_from_altitudes(grid, segment_l, name, "stream");
}

[[nodiscard]] inline RoadProfile load_road(const std::string& path, double segment_l = 50.0) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open road file '" + path + "'");
  auto r = parse_road_csv(f, segment_l, path);
  r.source = "file:" + path;
  return r;
}

/// Writes the grid altitudes with round-trip precision.
inline void emit_road(std::ostream& os, const RoadProfile& r) {
  os << "distance_m,altitude_m\n";
  const auto h = r.altitudes();
  char buf[64];
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double s = static_cast<double>(k) * r.segment_l;
    auto p = std::to_chars(buf, buf + sizeof buf, s).ptr;
    *p++ = ',';
    p = std::to_chars(p, buf + sizeof buf, h[k]).ptr;
    os.write(buf, p - buf);
    os << '\n';
  }
}

struct SynthSpec {
  double length_km = 20.0;
  double hill_amplitude_m = 40.0;
  double hill_wavelength_km = 4.0;
  double phase_m = 0.0;  // shifts the sinusoid along the road
  /// Standard deviation of the altitude noise, smoothed over `noise_corr_m`.
  double noise_m = 0.0;
  double noise_corr_m = 500.0;
  std::uint64_t seed = 1;
  double segment_l = 50.0;

  void validate() const {
    require(length_km > 0 && hill_wavelength_km > 0 && segment_l > 0, "synthetic road lengths must be positive");
    require(hill_amplitude_m >= 0 && noise_m >= 0 && noise_corr_m > 0, "amplitudes must be non-negative");
  }
};

/// Altitude A sin(2 pi (s + phase) / wavelength) plus optional smoothed
/// Gaussian noise, sampled on the segment grid.
[[nodiscard]] inline RoadProfile synth_road(const SynthSpec& spec) {
  spec.validate();
  const double l = spec.segment_l;
  const auto n = static_cast<std::size_t>(std::llround(spec.length_km * 1000.0 / l));
  require(n >= 1, "synthetic road shorter than one segment");
  const double lambda = spec.hill_wavelength_km * 1000.0;
  std::vector<double> h(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const double s = static_cast<double>(k) * l;
    h[k] = spec.hill_amplitude_m * std::sin(2.0 * std::numbers::pi * (s + spec.phase_m) / lambda);
  }
  if (spec.noise_m > 0) {
    // AR(1) noise with unit variance and correlation length noise_corr_m,
    // driven by 53-bit uniforms through Box-Muller.
    std::mt19937_64 eng(spec.seed);
    auto u01 = [&] { return (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53; };
    const double phi = std::exp(-l / spec.noise_corr_m);
    const double innov = std::sqrt(1.0 - phi * phi);
    double z = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
      const double g = std::sqrt(-2.0 * std::log(u01())) * std::cos(2.0 * std::numbers::pi * u01());
      z = k == 0 ? g : phi * z + innov * g;
      h[k] += spec.noise_m * z;
    }
  }
  std::ostringstream src;
  src << "synthetic:length_km=" << spec.length_km << ",amplitude_m=" << spec.hill_amplitude_m
      << ",wavelength_km=" << spec.hill_wavelength_km << ",phase_m=" << spec.phase_m << ",noise_m=" << spec.noise_m
      << ",seed=" << spec.seed;
  return profile_from_altitudes(h, l, "synthetic", src.str());
}

struct GradePiece {
  double length_m;
  double grade;  // rise over run
};

/// Piecewise-constant grade road; each piece must be a whole number of segments.
[[nodiscard]] inline RoadProfile graded_road(const std::vector<GradePiece>& pieces, double segment_l = 50.0,
                                             const std::string& name = "graded") {
  require(segment_l > 0, "segment length must be positive");
  std::vector<double> h{0.0};
  for (const auto& p : pieces) {
    const double k = p.length_m / segment_l;
    const auto n = static_cast<std::size_t>(std::llround(k));
    require(n >= 1 && std::abs(k - static_cast<double>(n)) < 1e-9, "grade piece must span whole segments");
    for (std::size_t i = 0; i < n; ++i) h.push_back(h.back() + p.grade * segment_l);
  }
  return profile_from_altitudes(h, segment_l, name, "synthetic:graded");
}

/// The same road driven in the opposite direction.
[[nodiscard]] inline RoadProfile reverse_road(const RoadProfile& r) {
  auto h = r.altitudes();
  std::reverse(h.begin(), h.end());
  return profile_from_altitudes(h, r.segment_l, r.name + " (reversed)", r.source + ",reversed");
}

/// Route made of `times` back-to-back copies of `r` (altitude chained).
[[nodiscard]] inline RoadProfile repeat_road(const RoadProfile& r, int times) {
  require(times >= 1, "repeat count must be at least 1");
  const auto base = r.altitudes();
  std::vector<double> h{base.front()};
  double offset = 0.0;
  for (int t = 0; t < times; ++t) {
    for (std::size_t k = 1; k < base.size(); ++k) h.push_back(offset + base[k]);
    offset = h.back() - base.front();
  }
  return profile_from_altitudes(h, r.segment_l, r.name, r.source + ",repeat=" + std::to_string(times));
}

}  // namespace ecodrive

#pragma once

// Scenario plumbing: configuration (TOML), the constant-speed cruise-control
// baseline, controller comparison, fingerprints and report emission.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "ecodrive/aging.hpp"
#include "ecodrive/dynamics.hpp"
#include "ecodrive/errors.hpp"
#include "ecodrive/mpc.hpp"
#include "ecodrive/road.hpp"
#include "ecodrive/solver.hpp"
#include "ecodrive/traffic.hpp"

namespace ecodrive {

struct RoadSource {
  std::optional<std::string> csv_path;
  SynthSpec synth;
  bool reverse = false;
};

struct ScenarioConfig {
  VehicleParams vehicle;
  RoadSource road;
  double target_speed_kmh = 85.0;
  std::optional<double> tau_s;  // overrides target_speed_kmh
  double lower_kmh = 75.0;
  double upper_kmh = 90.0;
  double initial_soc = 1.0;
  MpcConfig mpc;
  SolverConfig solver;
  bool traffic_enabled = false;
  TrafficConfig traffic;
  AgingParams aging = default_aging_params();
  DayConfig day;
  int batch_runs = 10;

  /// Per-segment times at the target speed, or at the preceding vehicle's
  /// speed where one is present and slower.
  [[nodiscard]] std::vector<double> reference_times(const RoadProfile& r, const TrafficTrace* tr = nullptr) const {
    const double v = target_speed_kmh / 3.6;
    if (tr) require(tr->size() >= r.size(), "traffic trace shorter than the route");
    std::vector<double> t(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      t[i] = r.segments[i].length_m / (tr && tr->present[i] ? std::min(v, tr->v_p[i]) : v);
    }
    return t;
  }
  /// Trip time: tau_s when given, otherwise the sum of the reference times.
  [[nodiscard]] double tau_for(const RoadProfile& r, const TrafficTrace* tr = nullptr) const {
    if (tau_s) return *tau_s;
    if (!tr) return r.length_m() / (target_speed_kmh / 3.6);
    double t = 0.0;
    for (double x : reference_times(r, tr)) t += x;
    return t;
  }
  void validate() const {
    vehicle.validate();
    mpc.validate();
    solver.validate();
    traffic.validate();
    aging.validate();
    require(target_speed_kmh > 0 && (!tau_s || *tau_s > 0), "trip time specification must be positive");
    require(lower_kmh >= 0 && lower_kmh <= upper_kmh && upper_kmh > 0, "speed bounds must satisfy 0 <= lower <= upper");
    require(initial_soc > 0 && initial_soc <= 1, "initial SOC must lie in (0, 1]");
    require(batch_runs >= 1, "batch_runs must be at least 1");
  }
};

namespace detail {

template <class T>
void read_into(const toml::table& t, std::string_view section, std::string_view key, T& out) {
  const auto node = t.at_path(std::string(section) + "." + std::string(key));
  if (!node) return;
  if constexpr (std::is_same_v<T, bool>) {
    if (auto v = node.value<bool>()) return void(out = *v);
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = node.value<std::string>()) return void(out = *v);
  } else if constexpr (std::is_integral_v<T>) {
    if (auto v = node.value<std::int64_t>()) return void(out = static_cast<T>(*v));
  } else {
    if (auto v = node.value<double>()) return void(out = *v);
  }
  throw ParseError("config: wrong type for " + std::string(section) + "." + std::string(key));
}

template <class T>
void read_opt(const toml::table& t, std::string_view section, std::string_view key, std::optional<T>& out) {
  const auto node = t.at_path(std::string(section) + "." + std::string(key));
  if (!node) return;
  T v{};
  read_into(t, section, key, v);
  out = v;
}

inline void check_keys(const toml::table& t, const std::map<std::string, std::vector<std::string>>& allowed) {
  for (const auto& [k, v] : t) {
    const std::string section(k.str());
    auto it = allowed.find(section);
    if (it == allowed.end()) throw ParseError("config: unknown section [" + section + "]");
    const auto* tbl = v.as_table();
    if (!tbl) throw ParseError("config: [" + section + "] must be a table");
    for (const auto& [kk, vv] : *tbl) {
      (void)vv;
      const std::string key(kk.str());
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end()) {
        throw ParseError("config: unknown key " + section + "." + key);
      }
    }
  }
}

}  // namespace detail

[[nodiscard]] inline ScenarioConfig parse_config(std::string_view text, const std::string& origin = "config") {
  toml::table t;
  try {
    t = toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << origin << ": " << e.description() << " (line " << e.source().begin.line << ")";
    throw ParseError(os.str());
  }
  detail::check_keys(
      t, {{"vehicle",
           {"mass_kg", "rolling_coeff", "frontal_area_m2", "drag_coeff", "air_density", "discharge_eff", "charge_eff",
            "pack_voltage_v", "pack_capacity_ah", "n_packs", "gravity"}},
          {"road",
           {"csv", "length_km", "hill_amplitude_m", "hill_wavelength_km", "phase_m", "noise_m", "noise_corr_m", "seed",
            "segment_l", "reverse"}},
          {"trip", {"target_speed_kmh", "tau_s", "lower_kmh", "upper_kmh", "initial_soc"}},
          {"mpc", {"horizon_n", "replan_every", "terminal_floor", "warm_multipliers"}},
          {"solver",
           {"eps1", "eps2", "max_outer_iters", "x_step", "x_inner_iters", "max_halvings", "rho1", "rho2",
            "energy_scale", "t_floor", "penalty_factor", "balance_ratio", "rho_max_factor", "balance_after",
            "estimate_multipliers"}},
          {"traffic",
           {"enabled", "preset", "mu1_km", "mu2_km", "h_tau", "d0_headway_min", "d0_headway_max", "vp_min_kmh",
            "vp_max_kmh", "seed"}},
          {"aging", {"k1", "k2", "k3", "k4", "daily_km", "charge_to", "charge_rate_c", "soc_floor", "ending_soc"}},
          {"compare", {"batch_runs"}}});

  ScenarioConfig c;
  auto& v = c.vehicle;
  using detail::read_into;
  read_into(t, "vehicle", "mass_kg", v.mass_kg);
  read_into(t, "vehicle", "rolling_coeff", v.rolling_coeff);
  read_into(t, "vehicle", "frontal_area_m2", v.frontal_area_m2);
  read_into(t, "vehicle", "drag_coeff", v.drag_coeff);
  read_into(t, "vehicle", "air_density", v.air_density);
  read_into(t, "vehicle", "discharge_eff", v.discharge_eff);
  read_into(t, "vehicle", "charge_eff", v.charge_eff);
  read_into(t, "vehicle", "pack_voltage_v", v.pack_voltage_v);
  read_into(t, "vehicle", "pack_capacity_ah", v.pack_capacity_ah);
  read_into(t, "vehicle", "n_packs", v.n_packs);
  read_into(t, "vehicle", "gravity", v.gravity);

  detail::read_opt(t, "road", "csv", c.road.csv_path);
  auto& s = c.road.synth;
  read_into(t, "road", "length_km", s.length_km);
  read_into(t, "road", "hill_amplitude_m", s.hill_amplitude_m);
  read_into(t, "road", "hill_wavelength_km", s.hill_wavelength_km);
  read_into(t, "road", "phase_m", s.phase_m);
  read_into(t, "road", "noise_m", s.noise_m);
  read_into(t, "road", "noise_corr_m", s.noise_corr_m);
  read_into(t, "road", "seed", s.seed);
  read_into(t, "road", "segment_l", s.segment_l);
  read_into(t, "road", "reverse", c.road.reverse);
  c.mpc.segment_l = s.segment_l;

  read_into(t, "trip", "target_speed_kmh", c.target_speed_kmh);
  detail::read_opt(t, "trip", "tau_s", c.tau_s);
  read_into(t, "trip", "lower_kmh", c.lower_kmh);
  read_into(t, "trip", "upper_kmh", c.upper_kmh);
  read_into(t, "trip", "initial_soc", c.initial_soc);

  read_into(t, "mpc", "horizon_n", c.mpc.horizon_n);
  read_into(t, "mpc", "replan_every", c.mpc.replan_every);
  read_into(t, "mpc", "terminal_floor", c.mpc.terminal_floor);
  read_into(t, "mpc", "warm_multipliers", c.mpc.warm_multipliers);

  auto& sv = c.solver;
  read_into(t, "solver", "eps1", sv.eps1);
  read_into(t, "solver", "eps2", sv.eps2);
  read_into(t, "solver", "max_outer_iters", sv.max_outer_iters);
  read_into(t, "solver", "x_step", sv.x_step);
  read_into(t, "solver", "x_inner_iters", sv.x_inner_iters);
  read_into(t, "solver", "max_halvings", sv.max_halvings);
  read_into(t, "solver", "rho1", sv.rho1);
  read_into(t, "solver", "rho2", sv.rho2);
  read_into(t, "solver", "energy_scale", sv.energy_scale);
  read_into(t, "solver", "t_floor", sv.t_floor);
  read_into(t, "solver", "penalty_factor", sv.penalty_factor);
  read_into(t, "solver", "balance_ratio", sv.balance_ratio);
  read_into(t, "solver", "rho_max_factor", sv.rho_max_factor);
  read_into(t, "solver", "balance_after", sv.balance_after);
  read_into(t, "solver", "estimate_multipliers", sv.estimate_multipliers);

  read_into(t, "traffic", "enabled", c.traffic_enabled);
  std::string preset;
  read_into(t, "traffic", "preset", preset);
  if (!preset.empty()) {
    if (preset == "heavy") c.traffic = TrafficConfig::heavy();
    else if (preset == "light") c.traffic = TrafficConfig::light();
    else if (preset == "normal") c.traffic = TrafficConfig::normal();
    else throw ParseError("config: traffic.preset must be heavy, light or normal");
  }
  auto& tc = c.traffic;
  read_into(t, "traffic", "mu1_km", tc.mu1_km);
  read_into(t, "traffic", "mu2_km", tc.mu2_km);
  read_into(t, "traffic", "h_tau", tc.h_tau);
  read_into(t, "traffic", "d0_headway_min", tc.d0_headway_min);
  read_into(t, "traffic", "d0_headway_max", tc.d0_headway_max);
  read_into(t, "traffic", "vp_min_kmh", tc.vp_min_kmh);
  read_into(t, "traffic", "vp_max_kmh", tc.vp_max_kmh);
  read_into(t, "traffic", "seed", tc.seed);

  read_into(t, "aging", "k1", c.aging.k1);
  read_into(t, "aging", "k2", c.aging.k2);
  read_into(t, "aging", "k3", c.aging.k3);
  read_into(t, "aging", "k4", c.aging.k4);
  read_into(t, "aging", "daily_km", c.day.daily_km);
  read_into(t, "aging", "charge_to", c.day.charge_to);
  read_into(t, "aging", "charge_rate_c", c.day.charge_rate_c);
  read_into(t, "aging", "soc_floor", c.day.soc_floor);
  detail::read_opt(t, "aging", "ending_soc", c.day.ending_soc);

  read_into(t, "compare", "batch_runs", c.batch_runs);
  c.validate();
  return c;
}

[[nodiscard]] inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

[[nodiscard]] inline RoadProfile build_road(const ScenarioConfig& c) {
  RoadProfile r = c.road.csv_path ? load_road(*c.road.csv_path, c.road.synth.segment_l) : synth_road(c.road.synth);
  return c.road.reverse ? reverse_road(r) : r;
}

/// Canonical text of every setting that affects results; two runs with
/// equal canonical text and road produce identical outputs.
[[nodiscard]] inline std::string canonical_config(const ScenarioConfig& c) {
  std::ostringstream os;
  os << std::setprecision(17);
  const auto& v = c.vehicle;
  os << "vehicle " << v.mass_kg << ' ' << v.rolling_coeff << ' ' << v.frontal_area_m2 << ' ' << v.drag_coeff << ' '
     << v.air_density << ' ' << v.discharge_eff << ' ' << v.charge_eff << ' ' << v.pack_voltage_v << ' '
     << v.pack_capacity_ah << ' ' << v.n_packs << ' ' << v.gravity << '\n';
  os << "trip " << c.target_speed_kmh << ' ' << (c.tau_s ? *c.tau_s : -1.0) << ' ' << c.lower_kmh << ' '
     << c.upper_kmh << ' ' << c.initial_soc << '\n';
  os << "mpc " << c.mpc.horizon_n << ' ' << c.mpc.segment_l << ' ' << c.mpc.replan_every << ' ' << c.mpc.terminal_floor
     << ' ' << c.mpc.warm_multipliers << '\n';
  const auto& s = c.solver;
  os << "solver " << s.eps1 << ' ' << s.eps2 << ' ' << s.max_outer_iters << ' ' << s.x_step << ' ' << s.x_inner_iters
     << ' ' << s.max_halvings << ' ' << s.rho1 << ' ' << s.rho2 << ' ' << s.energy_scale << ' ' << s.t_floor << ' '
     << s.penalty_factor << ' ' << s.balance_ratio << ' ' << s.rho_max_factor << ' ' << s.balance_after << ' '
     << s.estimate_multipliers << '\n';
  const auto& t = c.traffic;
  os << "traffic " << c.traffic_enabled << ' ' << t.mu1_km << ' ' << t.mu2_km << ' ' << t.h_tau << ' '
     << t.d0_headway_min << ' ' << t.d0_headway_max << ' ' << t.vp_min_kmh << ' ' << t.vp_max_kmh << ' ' << t.seed
     << '\n';
  os << "aging " << c.aging.k1 << ' ' << c.aging.k2 << ' ' << c.aging.k3 << ' ' << c.aging.k4 << ' ' << c.day.daily_km
     << ' ' << c.day.charge_to << ' ' << c.day.charge_rate_c << ' ' << c.day.soc_floor << ' '
     << (c.day.ending_soc ? *c.day.ending_soc : -1.0) << '\n';
  return os.str();
}

/// 64-bit FNV-1a.
class Fnv1a {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= b[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  void f64(double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, sizeof u);
    for (int i = 0; i < 8; ++i) {
      const unsigned char c = static_cast<unsigned char>(u >> (8 * i));
      bytes(&c, 1);
    }
  }
  void str(std::string_view s) { bytes(s.data(), s.size()); }
  [[nodiscard]] std::string hex() const {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h_;
    return os.str();
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

/// Hash of the road geometry, the canonical configuration, the seeds and
/// the scope of the run ("route", or a window such as "window:0:4").
[[nodiscard]] inline std::string fingerprint(const RoadProfile& r, const ScenarioConfig& c,
                                             std::uint64_t traffic_seed, std::string_view scope = "route") {
  Fnv1a h;
  h.f64(r.segment_l);
  for (const auto& s : r.segments) {
    h.f64(s.length_m);
    h.f64(s.slope_rad);
    h.f64(s.altitude_start_m);
  }
  h.f64(r.end_altitude_m);
  h.str(canonical_config(c));
  h.str("seed " + std::to_string(traffic_seed));
  h.str(scope);
  return h.hex();
}

/// Constant-speed cruise control. Under traffic the exit speed of a segment
/// is min(set speed, headway bound); with no vehicle ahead the set speed is
/// resumed at the next boundary.
[[nodiscard]] inline RouteResult cc_baseline(std::span<const RoadSegment> road, double speed, const VehicleParams& p,
                                             const RouteOptions& opt = {}) {
  require(!road.empty(), "empty route");
  require(speed > 0, "cruise speed must be positive");
  require(speed >= opt.lower_mps - 1e-12 && speed <= opt.upper_mps + 1e-12, "cruise speed outside the speed bounds");
  const TrafficTrace* tr = opt.traffic;
  if (tr) require(tr->size() >= road.size(), "traffic trace shorter than the route");
  RouteResult res;
  double x = speed, soc = opt.soc0;
  double gap = 0.0;
  bool has_gap = false;
  res.traj.x.push_back(x);
  res.soc.push_back(soc);
  res.headway.push_back(std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < road.size(); ++i) {
    const double l = road[i].length_m;
    double x_out = speed;
    const bool following = tr && tr->present[i];
    if (following) {
      if (tr->episode_start[i] || !has_gap) {
        gap = tr->d_init[i];
        has_gap = true;
        double& slot = res.headway.back();
        const double h0 = gap / x;
        slot = std::isnan(slot) ? h0 : std::min(slot, h0);
      }
      x_out = std::min(x_out, headway_speed_bound(x, gap, tr->v_p[i], l, tr->h_tau));
    }
    const double a = accel_from_speeds(x, x_out, l);
    const double d = soc_change(p, road[i], x, a);
    const double T = segment_time(x, x_out, l);
    double hw = std::numeric_limits<double>::quiet_NaN();
    if (following) {
      gap = update_gap(gap, tr->v_p[i], T, l);
      hw = gap / x_out;
    } else {
      has_gap = false;
    }
    soc -= d;
    x = x_out;
    res.traj.x.push_back(x);
    res.traj.T.push_back(T);
    res.soc_delta.push_back(d);
    res.soc.push_back(soc);
    res.headway.push_back(hw);
    res.trip_time += T;
    res.energy += d;
  }
  for (double h : res.headway) {
    if (!std::isnan(h)) res.min_headway = std::min(res.min_headway, h);
  }
  return res;
}

/// Cruise set speed whose trip time under traffic matches `target_time`
/// (bisection; the trip time is nonincreasing in the set speed).
[[nodiscard]] inline double cc_speed_for_time(std::span<const RoadSegment> road, double target_time,
                                              const VehicleParams& p, const RouteOptions& opt) {
  double lo = std::max(opt.lower_mps, 0.1), hi = opt.upper_mps;
  auto time_at = [&](double v) { return cc_baseline(road, v, p, opt).trip_time; };
  if (time_at(hi) >= target_time) return hi;
  if (time_at(lo) <= target_time) return lo;
  for (int k = 0; k < 100 && hi - lo > 1e-10; ++k) {
    const double mid = 0.5 * (lo + hi);
    (time_at(mid) > target_time ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct ControllerReport {
  std::string name;
  double energy_soc = 0.0;
  double trip_time_s = 0.0;
  double drive_ah = 0.0;  // |Ah| processed by one pack while driving
  double regen_ah = 0.0;  // Ah returned by regeneration
  double min_headway_s = std::numeric_limits<double>::infinity();
  std::size_t windows = 0;
  int fallbacks = 0;
  int budget_clamps = 0;
  int median_iters = 0;
  int max_iters = 0;
  std::vector<int> iters;
  std::vector<double> solve_wall_s;  // not part of deterministic outputs
};

[[nodiscard]] inline ControllerReport summarize(const std::string& name, const RouteResult& r, const VehicleParams& p) {
  ControllerReport c;
  c.name = name;
  c.energy_soc = r.energy;
  c.trip_time_s = r.trip_time;
  for (double d : r.soc_delta) {
    c.drive_ah += std::abs(d) * p.pack_capacity_ah;
    if (d < 0) c.regen_ah += -d * p.pack_capacity_ah;
  }
  c.min_headway_s = r.min_headway;
  c.windows = r.steps.size();
  c.fallbacks = r.fallbacks;
  c.budget_clamps = r.budget_clamps;
  for (const auto& s : r.steps) {
    c.iters.push_back(s.iters);
    c.solve_wall_s.push_back(s.wall_s);
  }
  if (!c.iters.empty()) {
    auto sorted = c.iters;
    std::sort(sorted.begin(), sorted.end());
    c.median_iters = sorted[sorted.size() / 2];
    c.max_iters = sorted.back();
  }
  return c;
}

[[nodiscard]] inline double percent_delta(double admm, double cc) { return 100.0 * (admm - cc) / std::abs(cc); }

struct ComparisonReport {
  std::string fingerprint;
  ControllerReport admm;
  ControllerReport cc;
  double energy_delta_pct = 0.0;
  double time_delta_pct = 0.0;
  double ah_delta_pct = 0.0;
};

[[nodiscard]] inline ComparisonReport compare(const std::string& fp, const ControllerReport& admm,
                                              const ControllerReport& cc) {
  ComparisonReport r;
  r.fingerprint = fp;
  r.admm = admm;
  r.cc = cc;
  r.energy_delta_pct = percent_delta(admm.energy_soc, cc.energy_soc);
  r.time_delta_pct = percent_delta(admm.trip_time_s, cc.trip_time_s);
  r.ah_delta_pct = percent_delta(admm.drive_ah, cc.drive_ah);
  return r;
}

/// Both controllers on one road (and optional traffic trace). Without
/// traffic, CC runs at length / tau; with traffic, CC's set speed is chosen
/// so its trip time equals the ADMM trip time.
struct ScenarioRun {
  RouteResult admm;
  RouteResult cc;
  ComparisonReport report;
};

[[nodiscard]] inline RouteOptions route_options(const ScenarioConfig& c, const TrafficTrace* tr) {
  RouteOptions o;
  o.lower_mps = c.lower_kmh / 3.6;
  o.upper_mps = c.upper_kmh / 3.6;
  o.soc0 = c.initial_soc;
  o.traffic = tr;
  return o;
}

[[nodiscard]] inline ScenarioRun run_scenario(const RoadProfile& road, const ScenarioConfig& c,
                                              const TrafficTrace* tr, const std::string& fp) {
  const double tau = c.tau_for(road, tr);
  auto opt = route_options(c, tr);
  if (tr) opt.budget_weights = c.reference_times(road, tr);
  ScenarioRun s;
  s.admm = run_route(road.segments, tau, c.vehicle, c.mpc, c.solver, opt);
  const double v_cc = tr ? cc_speed_for_time(road.segments, s.admm.trip_time, c.vehicle, opt) : road.length_m() / tau;
  s.cc = cc_baseline(road.segments, v_cc, c.vehicle, opt);
  s.report = compare(fp, summarize("admm", s.admm, c.vehicle), summarize("cc", s.cc, c.vehicle));
  return s;
}

struct BatchStats {
  std::vector<double> energy_delta_pct;
  double mean = 0.0;
  double three_sigma = 0.0;
};

[[nodiscard]] inline BatchStats batch_stats(std::vector<double> deltas) {
  BatchStats b;
  b.energy_delta_pct = std::move(deltas);
  const double n = static_cast<double>(b.energy_delta_pct.size());
  if (n == 0) return b;
  for (double d : b.energy_delta_pct) b.mean += d / n;
  double ss = 0.0;
  for (double d : b.energy_delta_pct) ss += (d - b.mean) * (d - b.mean);
  b.three_sigma = n > 1 ? 3.0 * std::sqrt(ss / (n - 1)) : 0.0;
  return b;
}

// ---- emission -------------------------------------------------------------

namespace detail {
inline nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}
}  // namespace detail

/// Rows 0..n: boundary speed x_k, and the time and SOC change of segment k
/// (zero on the closing row).
inline void write_trajectory_csv(std::ostream& os, const RouteResult& r) {
  os << "segment_index,x_mps,t_s,soc_delta\n";
  char buf[128];
  for (std::size_t k = 0; k < r.traj.x.size(); ++k) {
    const double t = k < r.traj.T.size() ? r.traj.T[k] : 0.0;
    const double d = k < r.soc_delta.size() ? r.soc_delta[k] : 0.0;
    char* p = buf;
    p = std::to_chars(p, buf + sizeof buf, k).ptr;
    *p++ = ',';
    p = std::to_chars(p, buf + sizeof buf, r.traj.x[k]).ptr;
    *p++ = ',';
    p = std::to_chars(p, buf + sizeof buf, t).ptr;
    *p++ = ',';
    p = std::to_chars(p, buf + sizeof buf, d).ptr;
    *p++ = '\n';
    os.write(buf, p - buf);
  }
}

[[nodiscard]] inline nlohmann::json controller_json(const ControllerReport& c) {
  nlohmann::json j;
  j["controller"] = c.name;
  j["energy_soc"] = c.energy_soc;
  j["trip_time_s"] = c.trip_time_s;
  j["drive_ah"] = c.drive_ah;
  j["regen_ah"] = c.regen_ah;
  j["min_headway_s"] = detail::finite_or_null(c.min_headway_s);
  j["windows"] = c.windows;
  j["fallbacks"] = c.fallbacks;
  j["budget_clamps"] = c.budget_clamps;
  j["median_iters"] = c.median_iters;
  j["max_iters"] = c.max_iters;
  j["iters"] = c.iters;
  return j;
}

[[nodiscard]] inline nlohmann::json summary_json(const std::string& fp, const ControllerReport& c,
                                                 const RoadProfile& road, double tau) {
  nlohmann::json j = controller_json(c);
  j["fingerprint"] = fp;
  j["road"] = {{"name", road.name}, {"source", road.source}, {"segments", road.size()},
               {"length_m", road.length_m()}, {"max_abs_slope_rad", road.max_abs_slope()}};
  j["tau_s"] = tau;
  return j;
}

[[nodiscard]] inline nlohmann::json comparison_json(const ComparisonReport& r) {
  return {{"fingerprint", r.fingerprint},
          {"admm", controller_json(r.admm)},
          {"cc", controller_json(r.cc)},
          {"energy_delta_pct", r.energy_delta_pct},
          {"time_delta_pct", r.time_delta_pct},
          {"ah_delta_pct", r.ah_delta_pct}};
}

[[nodiscard]] inline nlohmann::json batch_json(const BatchStats& b, const std::vector<std::uint64_t>& seeds) {
  return {{"seeds", seeds}, {"energy_delta_pct", b.energy_delta_pct}, {"mean_pct", b.mean},
          {"three_sigma_pct", b.three_sigma}};
}

/// Plot-ready per-boundary series for both controllers.
inline void write_series_csv(std::ostream& os, const RoadProfile& road, const RouteResult& admm, const RouteResult& cc) {
  os << "position_m,altitude_m,admm_x_mps,cc_x_mps,admm_soc,cc_soc\n";
  const auto h = road.altitudes();
  char buf[256];
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double vals[] = {static_cast<double>(k) * road.segment_l, h[k], admm.traj.x[k], cc.traj.x[k], admm.soc[k],
                           cc.soc[k]};
    char* p = buf;
    for (std::size_t i = 0; i < 6; ++i) {
      if (i) *p++ = ',';
      p = std::to_chars(p, buf + sizeof buf, vals[i]).ptr;
    }
    *p++ = '\n';
    os.write(buf, p - buf);
  }
}

struct AgingReport {
  DayResult day;
  double fading_rate = 0.0;
  double day_fade_ah = 0.0;
  double year_fade_pct = 0.0;
  LifeResult life;
};

/// One operating day of the route's drive profile plus the life projection
/// at a fixed daily distance.
[[nodiscard]] inline AgingReport aging_report(const RouteResult& r, const ScenarioConfig& c, double segment_l) {
  AgingReport a;
  const auto prof = drive_profile(r.soc_delta, c.vehicle.pack_capacity_ah, segment_l);
  a.day = simulate_day(prof, c.vehicle.pack_capacity_ah, c.day);
  a.fading_rate = fading_rate(a.day.stats, c.aging);
  a.day_fade_ah = capacity_fade(a.day.stats, c.aging);
  LifeScenario sc;
  sc.day = c.day;
  a.year_fade_pct = 100.0 * a.day_fade_ah * sc.days_per_year / c.vehicle.pack_capacity_ah;
  a.life = project_life(prof, c.vehicle.pack_capacity_ah, c.aging, sc);
  return a;
}

[[nodiscard]] inline nlohmann::json aging_json(const AgingReport& a, const AgingParams& k) {
  return {{"k", {{"k1", k.k1}, {"k2", k.k2}, {"k3", k.k3}, {"k4", k.k4}}},
          {"day",
           {{"soc_start", a.day.soc_start},
            {"soc_min", a.day.soc_min},
            {"dod", a.day.dod},
            {"drive_ah", a.day.drive_ah},
            {"charge_ah", a.day.charge_ah},
            {"q_ah", a.day.stats.q_processed},
            {"soc_avg", a.day.stats.soc_avg},
            {"soc_dev", a.day.stats.soc_dev},
            {"fading_rate", a.fading_rate},
            {"fade_ah", a.day_fade_ah}}},
          {"one_year_fade_pct", a.year_fade_pct},
          {"life_years", a.life.years},
          {"reached_eol", a.life.reached_eol},
          {"range_limited", a.life.range_limited},
          {"fade_curve", a.life.fade_curve},
          {"range_curve_km", a.life.range_km_curve}};
}

}  // namespace ecodrive

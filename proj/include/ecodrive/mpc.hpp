#pragma once

// Receding-horizon speed control: solve a window of N segments, execute its
// first segment(s), shift and re-plan.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "ecodrive/dynamics.hpp"
#include "ecodrive/errors.hpp"
#include "ecodrive/objective.hpp"
#include "ecodrive/solver.hpp"
#include "ecodrive/traffic.hpp"

namespace ecodrive {

struct MpcConfig {
  int horizon_n = 30;
  double segment_l = 50.0;
  int replan_every = 1;
  /// Lower-bound the window's terminal speed by its reference speed
  /// (window length / window time budget).
  bool terminal_floor = true;
  /// Seed each window's multipliers with the previous window's, shifted.
  bool warm_multipliers = false;

  void validate() const {
    require(horizon_n >= 2, "horizon_n must be at least 2");
    require(segment_l > 0, "segment_l must be positive");
    require(replan_every >= 1 && replan_every <= horizon_n, "replan_every must lie in [1, horizon_n]");
  }
};

struct RouteState {
  std::size_t position_index = 0;
  double speed_now = 0.0;
  double elapsed_time = 0.0;
  double soc_now = 1.0;
  Trajectory executed;
  /// Gap to the preceding vehicle at the current position, if one is followed.
  std::optional<double> gap;
};

/// Per-window diagnostics. `wall_s` is the only nondeterministic field.
struct StepRecord {
  std::size_t start = 0;
  std::size_t window_n = 0;
  std::size_t executed = 0;
  double tau_window = 0.0;
  int iters = 0;
  bool converged = false;
  bool fallback = false;        // best iterate used after non-convergence
  bool budget_clamped = false;  // time budget outside the achievable range
  bool resolved = false;        // headway re-check triggered a second solve
  double wall_s = 0.0;
};

struct RouteResult {
  Trajectory traj;                // executed boundary speeds and segment times
  std::vector<double> soc_delta;  // per segment, per-pack fraction
  std::vector<double> soc;        // n+1 samples starting at the initial SOC
  double energy = 0.0;            // sum of soc_delta
  double trip_time = 0.0;
  /// Time headway at each boundary (NaN where no vehicle is followed).
  std::vector<double> headway;
  double min_headway = std::numeric_limits<double>::infinity();
  std::vector<StepRecord> steps;
  int fallbacks = 0;
  int budget_clamps = 0;

  [[nodiscard]] bool all_converged() const { return fallbacks == 0; }
};

/// (tau_total - elapsed) scaled by the window's share of the remaining route
/// (distance, or any other positive per-segment weight).
/// A non-positive result means the trip-time budget is exhausted.
[[nodiscard]] inline double window_time_budget(double remaining, double window, double tau_total,
                                               double elapsed) {
  require(remaining > 0 && window > 0 && window <= remaining * (1 + 1e-12),
          "window must lie within a non-empty remaining route");
  return (tau_total - elapsed) * (window / remaining);
}

/// Kinematic trip time of a speed profile.
[[nodiscard]] inline double profile_time(std::span<const double> x, std::span<const RoadSegment> road) {
  double t = 0.0;
  for (std::size_t i = 0; i < road.size(); ++i) {
    const double s = x[i] + x[i + 1];
    t += s > 0 ? 2.0 * road[i].length_m / s : std::numeric_limits<double>::infinity();
  }
  return t;
}

/// Segment times consistent with the boundary speeds.
[[nodiscard]] inline std::vector<double> kinematic_times(std::span<const double> x, std::span<const RoadSegment> road) {
  std::vector<double> T(road.size());
  for (std::size_t i = 0; i < road.size(); ++i) T[i] = segment_time(x[i], x[i + 1], road[i].length_m);
  return T;
}

/// Legal window bounds with the first node pinned to the current speed and,
/// optionally, the terminal node floored at the reference speed.
[[nodiscard]] inline SpeedBounds window_bounds(std::size_t n, double lower, double upper, double speed_now,
                                               std::optional<double> terminal_floor) {
  auto b = SpeedBounds::uniform(n + 1, lower, upper);
  b.lower[0] = b.upper[0] = speed_now;
  if (terminal_floor) b.lower[n] = std::min(std::max(b.lower[n], *terminal_floor), b.upper[n]);
  return b;
}

struct RouteOptions {
  double lower_mps = 75.0 / 3.6;
  double upper_mps = 90.0 / 3.6;
  double soc0 = 1.0;
  /// Speed at the start of the route; defaults to length / tau clipped to
  /// the legal bounds.
  std::optional<double> initial_speed;
  const TrafficTrace* traffic = nullptr;
  /// Per-segment weights for splitting the remaining time among windows;
  /// empty means proportional to distance.
  std::vector<double> budget_weights;
};

namespace detail {

/// Headways along a planned window; returns false when a boundary falls
/// below h_tau (with a relative slack for rounding).
inline bool window_headway_ok(const TrafficTrace& tr, std::size_t start, std::span<const double> x,
                              std::optional<double> gap_now) {
  const double l = tr.segment_l;
  bool has_gap = gap_now.has_value();
  double gap = gap_now.value_or(0.0);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const std::size_t seg = start + i;
    if (!tr.present[seg]) {
      has_gap = false;
      continue;
    }
    const double d = tr.episode_start[seg] || !has_gap ? tr.d_init[seg] : gap;
    const double s = x[i] + x[i + 1];
    if (!(s > 0)) return false;
    const double g = d + 2.0 * l / s * tr.v_p[seg] - l;
    if (g <= 0 || g < tr.h_tau * x[i + 1] * (1.0 - 1e-9)) return false;
    gap = g;
    has_gap = true;
  }
  return true;
}

inline MultiplierState shifted_multipliers(const MultiplierState& m, std::size_t shift, std::size_t n,
                                           const SolverConfig& cfg) {
  MultiplierState out = MultiplierState::zeros(n, cfg.rho1, cfg.rho2);
  out.lambda = m.lambda;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = std::min(i + shift, m.mu.size() - 1);
    out.mu[i] = m.mu[src];
  }
  return out;
}

}  // namespace detail

/// Drives the whole route with the receding-horizon controller.
///
/// Each window gets a time budget proportional to its share of the remaining
/// distance. If the budget lies outside what the window's bounds can achieve
/// it is clamped to the nearest achievable time and the step is flagged.
/// When the window reaches the end of the route and no traffic is left, the
/// whole plan is executed. Under traffic, the executed exit speed is also
/// clipped to the exact headway bound of the segment being driven.
[[nodiscard]] inline RouteResult run_route(std::span<const RoadSegment> road, double tau_total, const VehicleParams& p,
                                           const MpcConfig& cfg, const SolverConfig& scfg,
                                           const RouteOptions& opt = {}) {
  cfg.validate();
  scfg.validate();
  p.validate();
  const std::size_t n = road.size();
  require(n >= 1, "empty route");
  require(tau_total > 0, "trip time must be positive");
  require(opt.lower_mps >= 0 && opt.lower_mps <= opt.upper_mps && opt.upper_mps > 0, "invalid legal speed bounds");
  const TrafficTrace* tr = opt.traffic;
  if (tr) require(tr->size() >= n, "traffic trace shorter than the route");

  std::vector<double> suffix(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) suffix[i] = suffix[i + 1] + road[i].length_m;
  const bool weighted = !opt.budget_weights.empty();
  if (weighted) require(opt.budget_weights.size() >= n, "budget weights shorter than the route");
  std::vector<double> wsuffix(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    const double w = weighted ? opt.budget_weights[i] : road[i].length_m;
    require(w > 0, "budget weights must be positive");
    wsuffix[i] = wsuffix[i + 1] + w;
  }

  RouteState st;
  st.speed_now = opt.initial_speed.value_or(std::clamp(suffix[0] / tau_total, opt.lower_mps, opt.upper_mps));
  require(st.speed_now > 0, "initial speed must be positive");
  st.soc_now = opt.soc0;
  st.executed.x.push_back(st.speed_now);

  RouteResult res;
  res.soc.push_back(opt.soc0);
  res.headway.push_back(std::numeric_limits<double>::quiet_NaN());

  std::optional<Trajectory> prev;
  std::optional<MultiplierState> prev_mult;
  std::size_t prev_shift = 0;

  while (st.position_index < n) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t pos = st.position_index;
    const std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(cfg.horizon_n), n - pos);
    const auto win = road.subspan(pos, nw);
    const double window_m = suffix[pos] - suffix[pos + nw];

    StepRecord rec;
    rec.start = pos;
    rec.window_n = nw;
    double tau_w = window_time_budget(wsuffix[pos], wsuffix[pos] - wsuffix[pos + nw], tau_total, st.elapsed_time);
    const double v_ref = tau_w > 0 ? window_m / tau_w : opt.upper_mps;

    // Candidate profile: previous plan shifted, else constant reference speed.
    std::vector<double> warm(nw + 1);
    for (std::size_t j = 0; j <= nw; ++j) {
      if (prev && j + prev_shift < prev->x.size()) {
        warm[j] = prev->x[j + prev_shift];
      } else if (prev) {
        warm[j] = prev->x.back();
      } else {
        warm[j] = v_ref;
      }
    }
    warm[0] = st.speed_now;

    const bool traffic_here = tr && tr->any_present(pos, pos + nw);
    auto make_bounds = [&](std::span<const double> cand) {
      std::optional<double> floor;
      if (cfg.terminal_floor) floor = v_ref;
      auto b = window_bounds(nw, opt.lower_mps, opt.upper_mps, st.speed_now, floor);
      if (traffic_here) {
        auto legal = b;
        legal.lower[nw] = opt.lower_mps;
        b = bounds_for_window(*tr, pos, cand, st.gap, legal);
        b.lower[0] = b.upper[0] = st.speed_now;
        if (floor && !tr->present[pos + nw - 1]) b.lower[nw] = std::min(std::max(b.lower[nw], *floor), b.upper[nw]);
      }
      return b;
    };
    SpeedBounds bounds = make_bounds(warm);

    // Clamp the budget into the achievable range of these bounds.
    const double t_min = profile_time(bounds.upper, win);
    const double t_max = profile_time(bounds.lower, win);
    if (!(tau_w >= t_min)) {
      tau_w = t_min;
      rec.budget_clamped = true;
    } else if (tau_w > t_max) {
      tau_w = t_max;
      rec.budget_clamped = true;
    }
    rec.tau_window = tau_w;

    Trajectory start;
    bool shifted = false;
    if (prev) {
      start.x = warm;
      for (std::size_t j = 0; j <= nw; ++j) start.x[j] = bounds.clip(j, start.x[j]);
      shifted = true;
      for (std::size_t i = 0; i < nw; ++i) shifted = shifted && start.x[i] + start.x[i + 1] > 0;
      if (shifted) start.T = kinematic_times(start.x, win);
    }
    if (!shifted) start = constant_speed_start(win, tau_w, bounds);
    std::optional<MultiplierState> m0;
    if (cfg.warm_multipliers && prev_mult && !rec.budget_clamped) {
      m0 = detail::shifted_multipliers(*prev_mult, prev_shift, nw, scfg);
    }
    SolveResult sol = solve(win, tau_w, bounds, p, scfg, start, m0);

    if (traffic_here && !detail::window_headway_ok(*tr, pos, sol.traj.x, st.gap)) {
      bounds = make_bounds(sol.traj.x);
      Trajectory again = sol.traj;
      bool usable = true;
      for (std::size_t j = 0; j <= nw; ++j) again.x[j] = bounds.clip(j, again.x[j]);
      for (std::size_t i = 0; i < nw; ++i) usable = usable && again.x[i] + again.x[i + 1] > 0;
      if (usable) again.T = kinematic_times(again.x, win);
      const double t_lo = profile_time(bounds.upper, win);
      const double t_hi = profile_time(bounds.lower, win);
      if (tau_w < t_lo || tau_w > t_hi) {
        tau_w = std::clamp(tau_w, t_lo, t_hi);
        rec.budget_clamped = true;
      }
      if (!usable) again = constant_speed_start(win, tau_w, bounds);
      sol = solve(win, tau_w, bounds, p, scfg, again, std::nullopt);
      rec.resolved = true;
    }
    rec.iters = sol.iters;
    rec.converged = sol.converged;
    rec.fallback = !sol.converged;

    const bool last_window = pos + nw == n;
    const bool traffic_ahead = tr && tr->any_present(pos, n);
    const std::size_t k_exec =
        last_window && !traffic_ahead ? nw : std::min<std::size_t>(static_cast<std::size_t>(cfg.replan_every), nw);

    for (std::size_t j = 0; j < k_exec; ++j) {
      const std::size_t seg = pos + j;
      const double x_in = st.speed_now;
      double x_out = sol.traj.x[j + 1];
      const double l = road[seg].length_m;
      const bool following = tr && tr->present[seg];
      if (following) {
        if (tr->episode_start[seg] || !st.gap) {
          st.gap = tr->d_init[seg];
          const double h0 = x_in > 0 ? *st.gap / x_in : std::numeric_limits<double>::infinity();
          double& slot = res.headway.back();
          slot = std::isnan(slot) ? h0 : std::min(slot, h0);
        }
        x_out = std::min(x_out, headway_speed_bound(x_in, *st.gap, tr->v_p[seg], l, tr->h_tau));
      }
      const double a = accel_from_speeds(x_in, x_out, l);
      const double dsoc = soc_change(p, road[seg], x_in, a);
      const double T = segment_time(x_in, x_out, l);
      double hw = std::numeric_limits<double>::quiet_NaN();
      if (following) {
        st.gap = update_gap(*st.gap, tr->v_p[seg], T, l);
        hw = x_out > 0 ? *st.gap / x_out : std::numeric_limits<double>::infinity();
      } else {
        st.gap.reset();
      }
      st.executed.x.push_back(x_out);
      st.executed.T.push_back(T);
      st.elapsed_time += T;
      st.soc_now -= dsoc;
      st.speed_now = x_out;
      res.soc_delta.push_back(dsoc);
      res.soc.push_back(st.soc_now);
      res.headway.push_back(hw);
    }
    st.position_index += k_exec;
    rec.executed = k_exec;
    prev = sol.traj;
    prev_mult = sol.mult;
    prev_shift = k_exec;
    rec.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.fallbacks += rec.fallback ? 1 : 0;
    res.budget_clamps += rec.budget_clamped ? 1 : 0;
    res.steps.push_back(rec);
  }

  res.traj = std::move(st.executed);
  res.trip_time = st.elapsed_time;
  for (double d : res.soc_delta) res.energy += d;
  for (double h : res.headway) {
    if (!std::isnan(h)) res.min_headway = std::min(res.min_headway, h);
  }
  return res;
}

}  // namespace ecodrive

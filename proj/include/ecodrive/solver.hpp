#pragma once

// ADMM for the minimum-energy speed problem:
//
//   minimize   E(x)
//   subject to sum_i T_i = tau
//              T_i (x_i + x_{i+1}) = 2 l_i
//              lower <= x <= upper
//
// Each outer iteration takes projected descent steps on x with T fixed,
// minimizes the augmented Lagrangian over T in closed form, then moves the
// multipliers along the constraint residuals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "ecodrive/dynamics.hpp"
#include "ecodrive/errors.hpp"
#include "ecodrive/objective.hpp"

namespace ecodrive {

struct SolverConfig {
  double eps1 = 1e-3;  // primal change ||dx|| + ||dT||
  double eps2 = 1e-3;  // constraint residual norm
  int max_outer_iters = 500;
  double x_step = 0.1;  // initial projected-gradient step, m/s
  int x_inner_iters = 10;
  int max_halvings = 20;
  double rho1 = 3000.0;
  double rho2 = 3.0;
  /// Multiplier applied to the per-pack SOC objective inside the Lagrangian.
  double energy_scale = 1e7;
  double t_floor = 1e-3;  // s
  /// Residual balancing: when the constraint residual exceeds balance_ratio
  /// times the primal change, penalties grow by penalty_factor (and shrink in
  /// the opposite case), within [1, rho_max_factor] times their start values.
  /// A factor of 1 keeps the penalties fixed.
  double penalty_factor = 2.0;
  double balance_ratio = 10.0;
  double rho_max_factor = 1e3;
  int balance_after = 0;  // outer iterations run at the base penalties first
  /// Cold starts take least-squares multipliers from the stationarity
  /// conditions at the start point instead of zeros.
  bool estimate_multipliers = true;

  void validate() const {
    require(eps1 > 0 && eps2 > 0, "solver tolerances must be positive");
    require(max_outer_iters >= 1 && x_inner_iters >= 1, "iteration caps must be at least 1");
    require(x_step > 0 && max_halvings >= 0, "x_step must be positive");
    require(rho1 > 0 && rho2 > 0, "penalties must be positive");
    require(energy_scale > 0 && t_floor > 0, "energy_scale and t_floor must be positive");
    require(penalty_factor >= 1 && balance_ratio > 1 && rho_max_factor >= 1 && balance_after >= 0, "invalid penalty balancing settings");
  }
};

struct IterationRecord {
  double primal_change = 0.0;
  double residual_norm = 0.0;
  double energy = 0.0;
};

struct SolveResult {
  Trajectory traj;
  double energy = 0.0;
  int iters = 0;
  bool converged = false;
  /// True when the returned trajectory is the best (lowest-residual) iterate
  /// rather than the last one; only happens without convergence.
  bool best_iterate = false;
  MultiplierState mult;
  std::vector<IterationRecord> residual_history;
};

/// Closed-form minimizer of the augmented Lagrangian over T for fixed x.
///
/// The quadratic has Hessian 2A with A = (rho1/2) 11^T + diag(rho2_i s_i^2 / 2),
/// s_i = x_i + x_{i+1}, so T = -A^{-1} b / 2 is solved with the
/// diagonal-plus-rank-one inverse in O(N). If `unclamped` is given it receives
/// the raw minimizer before the positivity floor is applied.
[[nodiscard]] inline std::vector<double> update_T(std::span<const double> x, const MultiplierState& m,
                                                  double tau, std::span<const RoadSegment> road,
                                                  double t_floor = 1e-3,
                                                  std::vector<double>* unclamped = nullptr) {
  const std::size_t n = road.size();
  require(x.size() == n + 1 && m.mu.size() == n && m.rho2.size() == n, "update_T size mismatch");
  std::vector<double> y(n), dinv(n);
  double sum_y = 0.0, sum_dinv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = x[i] + x[i + 1];
    const double d = 0.5 * m.rho2[i] * s * s;
    if (!(d > 0)) throw DegenerateSegmentError("update_T: singular diagonal (zero speed sum)");
    const double b = m.lambda + m.mu[i] * s - m.rho1 * tau - 2.0 * road[i].length_m * m.rho2[i] * s;
    dinv[i] = 1.0 / d;
    y[i] = b * dinv[i];
    sum_y += y[i];
    sum_dinv += dinv[i];
  }
  const double c = 0.5 * m.rho1;
  const double k = c * sum_y / (1.0 + c * sum_dinv);
  std::vector<double> T(n);
  for (std::size_t i = 0; i < n; ++i) T[i] = -0.5 * (y[i] - k * dinv[i]);
  if (unclamped) *unclamped = T;
  for (double& t : T) t = std::max(t, t_floor);
  return T;
}

struct XUpdateResult {
  std::vector<double> x;
  /// Augmented Lagrangian after each accepted step, starting with the input.
  std::vector<double> lagrangian_trace;
};

namespace detail {

/// Augmented Lagrangian in x with T fixed and the energy coefficients frozen:
/// a quadratic 0.5 x'Hx + c'x + const with tridiagonal H.
struct FrozenQuadratic {
  std::vector<double> diag, off;  // H, off[i] couples nodes i and i+1
  std::vector<double> lin;        // c
  double constant = 0.0;

  [[nodiscard]] double value(std::span<const double> x) const {
    double v = constant;
    for (std::size_t j = 0; j < x.size(); ++j) v += (0.5 * diag[j] * x[j] + lin[j]) * x[j];
    for (std::size_t i = 0; i < off.size(); ++i) v += off[i] * x[i] * x[i + 1];
    return v;
  }
  [[nodiscard]] std::vector<double> gradient(std::span<const double> x) const {
    std::vector<double> g(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) g[j] = diag[j] * x[j] + lin[j];
    for (std::size_t i = 0; i < off.size(); ++i) {
      g[i] += off[i] * x[i + 1];
      g[i + 1] += off[i] * x[i];
    }
    return g;
  }
};

inline FrozenQuadratic frozen_quadratic(const EtaCoeffs& e, std::span<const double> T,
                                        const MultiplierState& m, double tau,
                                        std::span<const RoadSegment> road, double energy_scale) {
  const std::size_t n = road.size();
  FrozenQuadratic q;
  q.diag.resize(n + 1);
  q.lin.assign(n + 1, 0.0);
  q.off.resize(n);
  for (std::size_t j = 0; j <= n; ++j) q.diag[j] = 2.0 * energy_scale * e.eta[j];
  double t_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // mu r + rho/2 r^2 with r = T (x_i + x_{i+1}) - 2l
    const double h = m.rho2[i] * T[i] * T[i];
    const double l2 = 2.0 * road[i].length_m;
    const double c = (m.mu[i] - m.rho2[i] * l2) * T[i];
    q.diag[i] += h;
    q.diag[i + 1] += h;
    q.off[i] = h;
    q.lin[i] += c;
    q.lin[i + 1] += c;
    q.constant += -m.mu[i] * l2 + 0.5 * m.rho2[i] * l2 * l2;
    t_sum += T[i];
  }
  const double rt = t_sum - tau;
  q.constant += energy_scale * e.eta0 + m.lambda * rt + 0.5 * m.rho1 * rt * rt;
  return q;
}

/// Solves the tridiagonal system restricted to the free nodes, adding a
/// diagonal shift until every pivot is positive. Fixed nodes get d = 0.
inline std::vector<double> free_newton_direction(const FrozenQuadratic& q, std::span<const double> g,
                                                 const std::vector<bool>& fixed) {
  const std::size_t nn = g.size();
  double scale = 0.0;
  for (double d : q.diag) scale = std::max(scale, std::abs(d));
  if (!(scale > 0)) scale = 1.0;
  double shift = 0.0;
  std::vector<double> dd(nn), rhs(nn), dir(nn, 0.0);
  for (int attempt = 0; attempt < 60; ++attempt) {
    bool ok = true;
    // Forward elimination; a fixed node breaks the chain.
    for (std::size_t j = 0; j < nn && ok; ++j) {
      if (fixed[j]) continue;
      dd[j] = q.diag[j] + shift;
      rhs[j] = -g[j];
      if (j > 0 && !fixed[j - 1]) {
        const double w = q.off[j - 1] / dd[j - 1];
        dd[j] -= w * q.off[j - 1];
        rhs[j] -= w * rhs[j - 1];
      }
      if (!(dd[j] > 1e-12 * scale)) ok = false;
    }
    if (ok) {
      for (std::size_t j = nn; j-- > 0;) {
        if (fixed[j]) continue;
        double r = rhs[j];
        if (j + 1 < nn && !fixed[j + 1]) r -= q.off[j] * dir[j + 1];
        dir[j] = r / dd[j];
      }
      return dir;
    }
    shift = shift == 0.0 ? 1e-6 * scale : 4.0 * shift;
  }
  for (std::size_t j = 0; j < nn; ++j) dir[j] = fixed[j] ? 0.0 : -g[j] / scale;
  return dir;
}

}  // namespace detail

/// Bound-constrained descent on the augmented Lagrangian over x with T fixed.
///
/// Each inner step re-classifies the force cases at the current iterate and
/// builds the quadratic model with the energy coefficients frozen there. Nodes
/// held at a bound by the gradient are fixed; the rest take a Newton step on
/// the model, with negative energy curvature dropped from the Hessian. Trial
/// points are projected onto the bounds and scored with the exact Lagrangian,
/// halving the step until it does not increase. If no Newton trial is
/// accepted, a projected-gradient step whose largest component starts at
/// cfg.x_step is tried the same way.
[[nodiscard]] inline XUpdateResult update_x(std::span<const double> x_prev, std::span<const double> T,
                                            const MultiplierState& m, double tau,
                                            std::span<const RoadSegment> road, const VehicleParams& p,
                                            const SpeedBounds& bounds, const SolverConfig& cfg) {
  const std::size_t nn = x_prev.size();
  require(bounds.lower.size() == nn && T.size() + 1 == nn, "bounds do not match the horizon");
  Trajectory cur{std::vector<double>(x_prev.begin(), x_prev.end()), std::vector<double>(T.begin(), T.end())};
  for (std::size_t j = 0; j < nn; ++j) cur.x[j] = bounds.clip(j, cur.x[j]);

  XUpdateResult out;
  double f = augmented_lagrangian(cur, m, tau, road, p, cfg.energy_scale);
  out.lagrangian_trace.push_back(f);
  Trajectory trial = cur;
  std::vector<bool> fixed(nn);
  auto search = [&](const std::vector<double>& dir, double t0) {
    double t = t0;
    for (int h = 0; h <= cfg.max_halvings; ++h, t *= 0.5) {
      bool moved = false;
      for (std::size_t j = 0; j < nn; ++j) {
        trial.x[j] = bounds.clip(j, cur.x[j] + t * dir[j]);
        moved = moved || trial.x[j] != cur.x[j];
      }
      if (!moved) return false;
      const double ft = augmented_lagrangian(trial, m, tau, road, p, cfg.energy_scale);
      if (ft <= f) {
        f = ft;
        cur.x.swap(trial.x);
        return true;
      }
    }
    return false;
  };
  for (int it = 0; it < cfg.x_inner_iters; ++it) {
    auto e = eta_coeffs(cur.x, road, p);
    auto q = detail::frozen_quadratic(e, T, m, tau, road, cfg.energy_scale);
    const auto g = q.gradient(cur.x);
    for (std::size_t j = 0; j < nn; ++j) q.diag[j] -= 2.0 * cfg.energy_scale * std::min(e.eta[j], 0.0);
    double gmax = 0.0;
    for (std::size_t j = 0; j < nn; ++j) {
      fixed[j] = (g[j] >= 0 && cur.x[j] <= bounds.lower[j]) || (g[j] <= 0 && cur.x[j] >= bounds.upper[j]);
      if (!fixed[j]) gmax = std::max(gmax, std::abs(g[j]));
    }
    if (!(gmax > 0)) break;
    const auto dir = detail::free_newton_direction(q, g, fixed);
    bool accepted = search(dir, 1.0);
    if (!accepted) {
      std::vector<double> steep(nn);
      for (std::size_t j = 0; j < nn; ++j) steep[j] = fixed[j] ? 0.0 : -g[j] / gmax;
      accepted = search(steep, cfg.x_step);
    }
    if (!accepted) break;
    out.lagrangian_trace.push_back(f);
  }
  out.x = std::move(cur.x);
  return out;
}

/// Dual ascent on both constraint families; penalties are unchanged.
[[nodiscard]] inline MultiplierState update_multipliers(const MultiplierState& m, const Trajectory& traj,
                                                        double tau, std::span<const RoadSegment> road) {
  const auto r = residuals(traj, tau, road);
  MultiplierState out = m;
  out.lambda += m.rho1 * r.time;
  for (std::size_t i = 0; i < r.dist.size(); ++i) out.mu[i] += m.rho2[i] * r.dist[i];
  return out;
}

/// Constant-speed warm start: total length / tau clipped to the bounds, with
/// kinematically consistent segment times.
[[nodiscard]] inline Trajectory constant_speed_start(std::span<const RoadSegment> road, double tau,
                                                     const SpeedBounds& bounds) {
  double length = 0.0;
  for (const auto& s : road) length += s.length_m;
  const double v = length / tau;
  Trajectory t;
  t.x.resize(road.size() + 1);
  for (std::size_t j = 0; j < t.x.size(); ++j) t.x[j] = bounds.clip(j, v);
  t.T.resize(road.size());
  for (std::size_t i = 0; i < road.size(); ++i) {
    const double s = t.x[i] + t.x[i + 1];
    t.T[i] = s > 0 ? 2.0 * road[i].length_m / s : tau / static_cast<double>(road.size());
  }
  return t;
}

/// Multipliers that best satisfy stationarity at `traj`. The T-equations
/// give mu_i = -lambda / (x_i + x_{i+1}); lambda then solves the x-equations
/// of the nodes strictly inside their bounds in the least-squares sense.
[[nodiscard]] inline MultiplierState estimate_multipliers(const Trajectory& traj, double tau,
                                                          std::span<const RoadSegment> road,
                                                          const VehicleParams& p, const SpeedBounds& bounds,
                                                          const SolverConfig& cfg) {
  const std::size_t n = road.size();
  MultiplierState m = MultiplierState::zeros(n, 0.0, 0.0);
  const auto g = grad_x(traj, m, tau, road, p, cfg.energy_scale);
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = traj.x[i] + traj.x[i + 1];
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j <= n; ++j) {
    const double tol = 1e-9 * std::max(1.0, bounds.upper[j]);
    if (traj.x[j] <= bounds.lower[j] + tol || traj.x[j] >= bounds.upper[j] - tol) continue;
    double c = 0.0;
    if (j > 0 && s[j - 1] > 0) c += traj.T[j - 1] / s[j - 1];
    if (j < n && s[j] > 0) c += traj.T[j] / s[j];
    num += g[j] * c;
    den += c * c;
  }
  MultiplierState out = MultiplierState::zeros(n, cfg.rho1, cfg.rho2);
  if (den > 0) {
    out.lambda = num / den;
    for (std::size_t i = 0; i < n; ++i) out.mu[i] = s[i] > 0 ? -out.lambda / s[i] : 0.0;
  }
  return out;
}

[[nodiscard]] inline SolveResult solve(std::span<const RoadSegment> road, double tau,
                                       const SpeedBounds& bounds, const VehicleParams& p,
                                       const SolverConfig& cfg, const Trajectory& start,
                                       std::optional<MultiplierState> initial_mult = std::nullopt) {
  cfg.validate();
  bounds.validate();
  const std::size_t n = road.size();
  require(n >= 1, "empty horizon");
  require(tau > 0, "trip time must be positive");
  require(start.x.size() == n + 1 && start.T.size() == n, "warm start does not match the horizon");
  require(bounds.lower.size() == n + 1, "bounds do not match the horizon");
  for (double t : start.T) require(t > 0, "warm-start segment times must be positive");

  Trajectory cur = start;
  for (std::size_t j = 0; j <= n; ++j) cur.x[j] = bounds.clip(j, cur.x[j]);

  MultiplierState mult = initial_mult ? *initial_mult
                         : cfg.estimate_multipliers ? estimate_multipliers(cur, tau, road, p, bounds, cfg)
                                                    : MultiplierState::zeros(n, cfg.rho1, cfg.rho2);
  require(mult.mu.size() == n && mult.rho2.size() == n, "initial multipliers do not match the horizon");

  SolveResult res;
  Trajectory best = cur;
  double best_res = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_outer_iters; ++it) {
    Trajectory next;
    next.x = update_x(cur.x, cur.T, mult, tau, road, p, bounds, cfg).x;
    next.T = update_T(next.x, mult, tau, road, cfg.t_floor);
    mult = update_multipliers(mult, next, tau, road);

    double dx2 = 0.0, dt2 = 0.0;
    for (std::size_t j = 0; j <= n; ++j) dx2 += (next.x[j] - cur.x[j]) * (next.x[j] - cur.x[j]);
    for (std::size_t i = 0; i < n; ++i) dt2 += (next.T[i] - cur.T[i]) * (next.T[i] - cur.T[i]);
    const double change = std::sqrt(dx2) + std::sqrt(dt2);
    const double rnorm = residuals(next, tau, road).norm();
    res.residual_history.push_back({change, rnorm, total_energy(next.x, road, p)});
    cur = std::move(next);
    res.iters = it;
    if (rnorm < best_res) {
      best_res = rnorm;
      best = cur;
    }
    if (change <= cfg.eps1 && rnorm <= cfg.eps2) {
      res.converged = true;
      break;
    }
    if (cfg.penalty_factor > 1.0 && it >= cfg.balance_after) {
      double f = 1.0;
      if (rnorm > cfg.balance_ratio * change) f = cfg.penalty_factor;
      else if (change > cfg.balance_ratio * rnorm) f = 1.0 / cfg.penalty_factor;
      const double lo = cfg.rho1, hi = cfg.rho1 * cfg.rho_max_factor;
      const double r1 = std::clamp(mult.rho1 * f, lo, hi);
      const double g = r1 / mult.rho1;
      mult.rho1 = r1;
      for (auto& r : mult.rho2) r = std::clamp(r * g, cfg.rho2, cfg.rho2 * cfg.rho_max_factor);
    }
  }
  if (res.converged) {
    res.traj = std::move(cur);
  } else {
    res.traj = std::move(best);
    res.best_iterate = true;
  }
  res.energy = total_energy(res.traj.x, road, p);
  res.mult = std::move(mult);
  return res;
}

[[nodiscard]] inline SolveResult solve(std::span<const RoadSegment> road, double tau,
                                       const SpeedBounds& bounds, const VehicleParams& p,
                                       const SolverConfig& cfg) {
  return solve(road, tau, bounds, p, cfg, constant_speed_start(road, tau, bounds));
}

struct OracleResult {
  std::vector<double> x;
  double energy = 0.0;
  double time = 0.0;
};

/// Exhaustive search over boundary speeds on a uniform grid.
///
/// Grid values for node j are lower_j + k * grid_step (k = 0, 1, ...) up to
/// upper_j. A combination is feasible when its kinematic trip time is within
/// time_tol of tau. Branches that cannot reach the time window or cannot beat
/// the incumbent energy are cut using exact suffix bounds, so the result equals
/// the full enumeration; ties keep the lexicographically first combination.
[[nodiscard]] inline OracleResult brute_force_oracle(std::span<const RoadSegment> road, double tau,
                                                     const SpeedBounds& bounds, const VehicleParams& p,
                                                     double grid_step, double time_tol) {
  const std::size_t n = road.size();
  require(n >= 1 && n <= 6, "brute_force_oracle supports 1 to 6 segments");
  require(grid_step > 0 && time_tol >= 0, "grid_step must be positive");
  bounds.validate();
  require(bounds.lower.size() == n + 1, "bounds do not match the horizon");

  std::vector<std::vector<double>> grid(n + 1);
  for (std::size_t j = 0; j <= n; ++j) {
    for (int k = 0;; ++k) {
      const double v = bounds.lower[j] + k * grid_step;
      if (v > bounds.upper[j] + 1e-9) break;
      grid[j].push_back(std::min(v, bounds.upper[j]));
    }
  }
  // Per-segment tables indexed [a * |grid_{i+1}| + b].
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> energy(n), time(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ga = grid[i];
    const auto& gb = grid[i + 1];
    energy[i].resize(ga.size() * gb.size());
    time[i].resize(ga.size() * gb.size());
    for (std::size_t a = 0; a < ga.size(); ++a) {
      for (std::size_t b = 0; b < gb.size(); ++b) {
        const std::size_t k = a * gb.size() + b;
        if (ga[a] + gb[b] <= 0) {
          energy[i][k] = inf;
          time[i][k] = inf;
          continue;
        }
        const double acc = accel_from_speeds(ga[a], gb[b], road[i].length_m);
        energy[i][k] = soc_change(p, road[i], ga[a], acc);
        time[i][k] = segment_time(ga[a], gb[b], road[i].length_m);
      }
    }
  }
  // Suffix bounds: from node j at grid index a, the min/max remaining time and
  // the min remaining energy over all completions.
  std::vector<std::vector<double>> tmin(n + 1), tmax(n + 1), emin(n + 1);
  tmin[n].assign(grid[n].size(), 0.0);
  tmax[n].assign(grid[n].size(), 0.0);
  emin[n].assign(grid[n].size(), 0.0);
  for (std::size_t jj = n; jj-- > 0;) {
    const std::size_t nb = grid[jj + 1].size();
    tmin[jj].assign(grid[jj].size(), inf);
    tmax[jj].assign(grid[jj].size(), -inf);
    emin[jj].assign(grid[jj].size(), inf);
    for (std::size_t a = 0; a < grid[jj].size(); ++a) {
      for (std::size_t b = 0; b < nb; ++b) {
        const double t = time[jj][a * nb + b];
        if (!std::isfinite(t)) continue;
        tmin[jj][a] = std::min(tmin[jj][a], t + tmin[jj + 1][b]);
        tmax[jj][a] = std::max(tmax[jj][a], t + tmax[jj + 1][b]);
        emin[jj][a] = std::min(emin[jj][a], energy[jj][a * nb + b] + emin[jj + 1][b]);
      }
    }
  }

  std::vector<std::size_t> idx(n + 1), best_idx;
  double best_e = inf, best_t = 0.0;
  const double t_lo = tau - time_tol, t_hi = tau + time_tol;
  auto recurse = [&](auto&& self, std::size_t j, double t_acc, double e_acc) -> void {
    if (j == n) {
      if (t_acc >= t_lo && t_acc <= t_hi && e_acc < best_e) {
        best_e = e_acc;
        best_t = t_acc;
        best_idx = idx;
      }
      return;
    }
    const std::size_t nb = grid[j + 1].size();
    const std::size_t a = idx[j];
    for (std::size_t b = 0; b < nb; ++b) {
      const double t = time[j][a * nb + b];
      if (!std::isfinite(t)) continue;
      const double tt = t_acc + t;
      if (tt + tmin[j + 1][b] > t_hi || tt + tmax[j + 1][b] < t_lo) continue;
      const double ee = e_acc + energy[j][a * nb + b];
      if (ee + emin[j + 1][b] >= best_e) continue;
      idx[j + 1] = b;
      self(self, j + 1, tt, ee);
    }
  };
  for (std::size_t a = 0; a < grid[0].size(); ++a) {
    if (tmin[0][a] > t_hi || tmax[0][a] < t_lo) continue;
    idx[0] = a;
    recurse(recurse, 0, 0.0, 0.0);
  }
  if (best_idx.empty()) throw InfeasibleError("brute_force_oracle: no grid point meets the trip time");
  OracleResult r;
  r.x.resize(n + 1);
  for (std::size_t j = 0; j <= n; ++j) r.x[j] = grid[j][best_idx[j]];
  r.energy = best_e;
  r.time = best_t;
  return r;
}

}  // namespace ecodrive

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ecodrive/solver.hpp"
#include "support.hpp"

using namespace ecodrive;
namespace et = ecodrive::testing;

namespace {

const VehicleParams kTruck{};

/// Gaussian elimination with partial pivoting.
std::vector<double> dense_solve(std::vector<std::vector<double>> A, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
    std::swap(A[c], A[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = A[r][c] / A[c][c];
      for (std::size_t k = c; k < n; ++k) A[r][k] -= f * A[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t k = r + 1; k < n; ++k) s -= A[r][k] * x[k];
    x[r] = s / A[r][r];
  }
  return x;
}

MultiplierState random_mult(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), up(0.5, 50.0);
  MultiplierState m = MultiplierState::zeros(n, up(rng), 0.0);
  m.lambda = 10.0 * u(rng);
  for (std::size_t i = 0; i < n; ++i) {
    m.mu[i] = u(rng);
    m.rho2[i] = up(rng);
  }
  return m;
}

std::vector<RoadSegment> random_road(std::mt19937_64& rng, std::size_t n, double max_slope = 0.05) {
  std::uniform_real_distribution<double> us(-max_slope, max_slope);
  std::vector<double> s(n);
  for (auto& v : s) v = us(rng);
  return et::sloped_road(s);
}

}  // namespace

TEST(UpdateT, MatchesDenseNormalEquations) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 10;
    const auto road = et::flat_road(n);
    const auto x = et::random_speeds(rng, n + 1, 5.0, 30.0);
    const auto m = random_mult(rng, n);
    const double tau = 2.5 * n;
    // d/dT_k: lambda + rho1 (sum T - tau) + mu_k s_k + rho2_k s_k (T_k s_k - 2l) = 0
    std::vector<std::vector<double>> A(n, std::vector<double>(n, m.rho1));
    std::vector<double> b(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double s = x[k] + x[k + 1];
      A[k][k] += m.rho2[k] * s * s;
      b[k] = -m.lambda + m.rho1 * tau - m.mu[k] * s + m.rho2[k] * s * 2.0 * road[k].length_m;
    }
    const auto expect = dense_solve(A, b);
    std::vector<double> raw;
    const auto T = update_T(x, m, tau, road, 1e-3, &raw);
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_NEAR(raw[k], expect[k], 1e-9 * std::max(1.0, std::abs(expect[k])));
      EXPECT_EQ(T[k], std::max(raw[k], 1e-3));
    }
  }
}

TEST(UpdateT, TwoSegmentHandSolve) {
  const auto road = et::flat_road(2);
  const std::vector<double> x{10.0, 10.0, 10.0};
  const MultiplierState m{0.0, {0.0, 0.0}, 1.0, {1.0, 1.0}};
  // 2x2 system [[401, 1], [1, 401]] T = [10 + 2000, 10 + 2000]
  const double t = 2010.0 / 402.0;
  const auto T = update_T(x, m, 10.0, road);
  EXPECT_NEAR(T[0], t, 1e-12);
  EXPECT_NEAR(T[1], t, 1e-12);
}

TEST(UpdateT, ZeroSpeedSumThrows) {
  const auto road = et::flat_road(1);
  const auto m = MultiplierState::zeros(1, 1.0, 1.0);
  EXPECT_THROW((void)update_T(std::vector<double>{0.0, 0.0}, m, 1.0, road), DegenerateSegmentError);
}

TEST(UpdateMultipliers, AscendAlongResiduals) {
  const auto road = et::flat_road(2);
  const Trajectory t{{20.0, 20.0, 10.0}, {2.0, 4.0}};
  const MultiplierState m{0.5, {1.0, -2.0}, 3.0, {0.1, 0.2}};
  const auto out = update_multipliers(m, t, 5.0, road);
  EXPECT_DOUBLE_EQ(out.lambda, 0.5 + 3.0 * 1.0);
  EXPECT_DOUBLE_EQ(out.mu[0], 1.0 + 0.1 * -20.0);
  EXPECT_DOUBLE_EQ(out.mu[1], -2.0 + 0.2 * 20.0);
  EXPECT_EQ(out.rho1, m.rho1);
  EXPECT_EQ(out.rho2, m.rho2);
}

TEST(UpdateMultipliers, FixedAtFeasiblePoint) {
  std::mt19937_64 rng(4);
  const auto road = random_road(rng, 5);
  const auto t = et::consistent(et::random_speeds(rng, 6, 10.0, 25.0), road);
  double tau = 0.0;
  for (double v : t.T) tau += v;
  const auto m = random_mult(rng, 5);
  const auto out = update_multipliers(m, t, tau, road);
  EXPECT_NEAR(out.lambda, m.lambda, 1e-9);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(out.mu[i], m.mu[i], 1e-9);
}

TEST(UpdateX, LagrangianNeverIncreasesAndBoundsHold) {
  std::mt19937_64 rng(5);
  SolverConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 10;
    const auto road = random_road(rng, n);
    const auto bounds = SpeedBounds::uniform(n + 1, 15.0, 30.0);
    auto t = et::consistent(et::random_speeds(rng, n + 1, 15.0, 30.0), road);
    const auto m = random_mult(rng, n);
    const double tau = 0.9 * n * 2.5;
    const auto r = update_x(t.x, t.T, m, tau, road, kTruck, bounds, cfg);
    for (std::size_t k = 1; k < r.lagrangian_trace.size(); ++k) {
      EXPECT_LE(r.lagrangian_trace[k], r.lagrangian_trace[k - 1]);
    }
    for (double v : r.x) {
      EXPECT_GE(v, 15.0);
      EXPECT_LE(v, 30.0);
    }
    t.x = r.x;
    EXPECT_DOUBLE_EQ(augmented_lagrangian(t, m, tau, road, kTruck, cfg.energy_scale), r.lagrangian_trace.back());
  }
}

TEST(ConstantSpeedStart, ClipsAndIsConsistent) {
  const auto road = et::flat_road(4);
  const auto b = SpeedBounds::uniform(5, 15.0, 20.0);
  const auto t = constant_speed_start(road, 8.0, b);  // 25 m/s requested
  for (double v : t.x) EXPECT_EQ(v, 20.0);
  for (double T : t.T) EXPECT_DOUBLE_EQ(T, 2.5);
}

TEST(EstimateMultipliers, ExactOnConstantSpeedFlat) {
  // On a flat road at constant speed every interior node shares one gradient
  // value, so the least-squares fit is exact there.
  const auto road = et::flat_road(6);
  const auto b = SpeedBounds::uniform(7, 10.0, 30.0);
  const auto t = constant_speed_start(road, 12.0, b);
  SolverConfig cfg;
  const auto m = estimate_multipliers(t, 12.0, road, kTruck, b, cfg);
  EXPECT_GT(m.lambda, 0.0);  // slowing down saves energy, so the time constraint binds
  const auto g = grad_x(t, m, 12.0, road, kTruck, cfg.energy_scale);
  for (std::size_t j = 1; j < 6; ++j) EXPECT_NEAR(g[j], 0.0, 1e-9 * std::abs(m.lambda));
  for (double mu : m.mu) EXPECT_NEAR(mu, -m.lambda / 50.0, 1e-12);
}

TEST(Solve, FlatRoadStaysAtConstantSpeed) {
  const auto road = et::flat_road(12);
  const double v = 85.0 / 3.6;
  const double tau = 600.0 / v;
  auto b = SpeedBounds::uniform(13, 0.0, 40.0);
  b.lower.front() = b.upper.front() = v;
  b.lower.back() = b.upper.back() = v;
  const auto r = solve(road, tau, b, kTruck, SolverConfig{});
  EXPECT_TRUE(r.converged);
  for (double x : r.traj.x) EXPECT_NEAR(x, v, 0.5);
  const double cc = total_energy(std::vector<double>(13, v), road, kTruck);
  EXPECT_NEAR(r.energy, cc, 0.005 * cc);
}

TEST(Solve, ConvergedResultSatisfiesConstraints) {
  std::mt19937_64 rng(6);
  int converged = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 4;
    const auto road = random_road(rng, n);
    const auto b = SpeedBounds::uniform(n + 1, 15.0, 30.0);
    const double tau = 200.0 / std::uniform_real_distribution<double>(18.0, 27.0)(rng);
    const auto r = solve(road, tau, b, kTruck, SolverConfig{});
    if (!r.converged) continue;
    ++converged;
    const auto res = residuals(r.traj, tau, road);
    EXPECT_LE(res.norm(), 1e-3);
    for (double x : r.traj.x) {
      EXPECT_GE(x, 15.0);
      EXPECT_LE(x, 30.0);
    }
    EXPECT_EQ(static_cast<int>(r.residual_history.size()), r.iters);
  }
  EXPECT_GE(converged, 18);
}

TEST(Solve, WithinTwoPercentOfGridOracle) {
  std::mt19937_64 rng(12);
  const auto road = random_road(rng, 4, 0.04);
  const auto b = SpeedBounds::uniform(5, 15.0, 30.0);
  const double tau = 200.0 / 22.0;
  const auto oracle = brute_force_oracle(road, tau, b, kTruck, 0.25, 0.5);
  const auto r = solve(road, tau, b, kTruck, SolverConfig{});
  ASSERT_TRUE(r.converged);
  const double scale = std::abs(oracle.energy);
  EXPECT_LE(r.energy, oracle.energy + 0.02 * scale);
}

TEST(Solve, DeterministicAcrossCalls) {
  std::mt19937_64 rng(7);
  const auto road = random_road(rng, 8);
  const auto b = SpeedBounds::uniform(9, 15.0, 30.0);
  const auto a = solve(road, 18.0, b, kTruck, SolverConfig{});
  const auto c = solve(road, 18.0, b, kTruck, SolverConfig{});
  EXPECT_EQ(a.traj.x, c.traj.x);
  EXPECT_EQ(a.traj.T, c.traj.T);
  EXPECT_EQ(a.iters, c.iters);
}

TEST(Solve, RejectsBadInput) {
  const auto road = et::flat_road(2);
  const auto b = SpeedBounds::uniform(3, 10.0, 20.0);
  EXPECT_THROW((void)solve(road, -1.0, b, kTruck, SolverConfig{}), InvalidArgument);
  SolverConfig bad;
  bad.eps1 = 0.0;
  EXPECT_THROW((void)solve(road, 5.0, b, kTruck, bad), InvalidArgument);
  EXPECT_THROW((void)solve(road, 5.0, SpeedBounds::uniform(2, 10.0, 20.0), kTruck, SolverConfig{}), InvalidArgument);
}

TEST(Oracle, MatchesPlainEnumeration) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto road = random_road(rng, 3);
    const auto b = SpeedBounds::uniform(4, 18.0, 26.0);
    const double tau = 150.0 / 22.0, tol = 0.3, step = 1.0;
    double best = std::numeric_limits<double>::infinity();
    for (int i0 = 0; i0 <= 8; ++i0)
      for (int i1 = 0; i1 <= 8; ++i1)
        for (int i2 = 0; i2 <= 8; ++i2)
          for (int i3 = 0; i3 <= 8; ++i3) {
            const std::vector<double> x{18.0 + i0, 18.0 + i1, 18.0 + i2, 18.0 + i3};
            double t = 0.0;
            for (int k = 0; k < 3; ++k) t += segment_time(x[k], x[k + 1], 50.0);
            if (std::abs(t - tau) > tol) continue;
            best = std::min(best, total_energy(x, road, kTruck));
          }
    const auto o = brute_force_oracle(road, tau, b, kTruck, step, tol);
    EXPECT_NEAR(o.energy, best, 1e-12);
    EXPECT_NEAR(o.energy, total_energy(o.x, road, kTruck), 1e-12);
    EXPECT_LE(std::abs(o.time - tau), tol);
  }
}

TEST(Oracle, InfeasibleTimeThrows) {
  const auto road = et::flat_road(2);
  const auto b = SpeedBounds::uniform(3, 20.0, 25.0);
  EXPECT_THROW((void)brute_force_oracle(road, 100.0, b, kTruck, 0.5, 0.1), InfeasibleError);
}

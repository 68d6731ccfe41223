#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ecodrive/objective.hpp"
#include "support.hpp"

using namespace ecodrive;
namespace et = ecodrive::testing;

namespace {

const VehicleParams kTruck{};

std::vector<RoadSegment> random_road(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> us(-0.06, 0.06);
  std::vector<double> s(n);
  for (auto& v : s) v = us(rng);
  return et::sloped_road(s);
}

}  // namespace

TEST(Energy, RegroupedFormEqualsSegmentSum) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 12;
    const auto road = random_road(rng, n);
    const auto x = et::random_speeds(rng, n + 1, 5.0, 30.0);
    double direct = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      direct += soc_change(kTruck, road[i], x[i], accel_from_speeds(x[i], x[i + 1], road[i].length_m));
    }
    const double regrouped = total_energy(x, road, kTruck);
    EXPECT_NEAR(regrouped, direct, 1e-12 * std::max(1.0, std::abs(direct)) + 1e-15);
  }
}

TEST(Energy, EtaOfSingleSegmentFromGammas) {
  const auto road = et::flat_road(1);
  const std::vector<double> x{20.0, 22.0};
  const auto g = horizon_gammas(x, road, kTruck);
  const auto e = eta_coeffs(x, road, kTruck);
  EXPECT_DOUBLE_EQ(e.eta0, g[0].g0);
  EXPECT_DOUBLE_EQ(e.eta[0], g[0].g2 - g[0].g1 / 100.0);
  EXPECT_DOUBLE_EQ(e.eta[1], g[0].g1 / 100.0);
}

TEST(Energy, NegativeSpeedRejected) {
  const auto road = et::flat_road(2);
  EXPECT_THROW((void)total_energy(std::vector<double>{20.0, -1.0, 20.0}, road, kTruck), KinematicsError);
  EXPECT_THROW((void)total_energy(std::vector<double>{20.0, 20.0}, road, kTruck), InvalidArgument);
}

TEST(Residuals, ZeroForConsistentTrajectory) {
  std::mt19937_64 rng(2);
  const auto road = random_road(rng, 6);
  const auto traj = et::consistent(et::random_speeds(rng, 7, 10.0, 25.0), road);
  double tau = 0.0;
  for (double t : traj.T) tau += t;
  const auto r = residuals(traj, tau, road);
  EXPECT_NEAR(r.time, 0.0, 1e-12);
  for (double d : r.dist) EXPECT_NEAR(d, 0.0, 1e-12);
  EXPECT_NEAR(r.norm(), 0.0, 1e-11);
}

TEST(Residuals, HandValues) {
  const auto road = et::flat_road(2);
  const Trajectory t{{20.0, 20.0, 10.0}, {2.0, 4.0}};
  const auto r = residuals(t, 5.0, road);
  EXPECT_DOUBLE_EQ(r.time, 1.0);
  EXPECT_DOUBLE_EQ(r.dist[0], 2.0 * 40.0 - 100.0);
  EXPECT_DOUBLE_EQ(r.dist[1], 4.0 * 30.0 - 100.0);
  EXPECT_DOUBLE_EQ(r.norm(), std::sqrt(1.0 + 400.0 + 400.0));
}

TEST(AugmentedLagrangian, HandValue) {
  const auto road = et::flat_road(2);
  const Trajectory t{{20.0, 20.0, 10.0}, {2.0, 4.0}};
  MultiplierState m{0.5, {1.0, -2.0}, 3.0, {0.1, 0.2}};
  const double expect = total_energy(t.x, road, kTruck) * 7.0 + 0.5 * 1.0 + 1.0 * -20.0 + -2.0 * 20.0 +
                        0.5 * 3.0 * 1.0 + 0.5 * 0.1 * 400.0 + 0.5 * 0.2 * 400.0;
  EXPECT_NEAR(augmented_lagrangian(t, m, 5.0, road, kTruck, 7.0), expect, 1e-12);
}

TEST(AugmentedLagrangian, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> um(-0.5, 0.5);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 8;
    const auto road = random_road(rng, n);
    Trajectory t = et::consistent(et::random_speeds(rng, n + 1, 8.0, 28.0), road);
    for (auto& T : t.T) T *= 1.0 + 0.05 * um(rng);
    MultiplierState m = MultiplierState::zeros(n, 1.0, 0.3);
    m.lambda = um(rng);
    for (auto& v : m.mu) v = um(rng);
    const double tau = 0.97 * n * 2.5;
    const double scale = 1e4;
    const auto g = grad_x(t, m, tau, road, kTruck, scale);
    for (std::size_t j = 0; j <= n; ++j) {
      const double h = 1e-6;
      auto up = t, dn = t;
      up.x[j] += h;
      dn.x[j] -= h;
      // Skip points where the perturbation crosses a force-case boundary.
      bool same = true;
      for (std::size_t i = (j ? j - 1 : 0); i < std::min(n, j + 1); ++i) {
        auto cs = [&](const Trajectory& q) {
          return classify_case(kTruck, road[i], q.x[i], accel_from_speeds(q.x[i], q.x[i + 1], 50.0)).id;
        };
        same = same && cs(up) == cs(dn);
      }
      if (!same) continue;
      const double fd = (augmented_lagrangian(up, m, tau, road, kTruck, scale) -
                         augmented_lagrangian(dn, m, tau, road, kTruck, scale)) / (2.0 * h);
      EXPECT_NEAR(g[j], fd, 1e-5 * std::max(1.0, std::abs(fd))) << "trial " << trial << " j " << j;
      ++checked;
    }
  }
  EXPECT_GT(checked, 400);
}

TEST(SpeedBounds, ClipAndValidate) {
  auto b = SpeedBounds::uniform(3, 10.0, 20.0);
  EXPECT_EQ(b.clip(0, 5.0), 10.0);
  EXPECT_EQ(b.clip(1, 25.0), 20.0);
  EXPECT_EQ(b.clip(2, 15.0), 15.0);
  EXPECT_NO_THROW(b.validate());
  b.lower[1] = 30.0;
  EXPECT_THROW(b.validate(), InvalidArgument);
}

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ecodrive/aging.hpp"

using namespace ecodrive;

namespace {

SocTrace ramp(double from, double to, double q, int steps = 1) {
  SocTrace t;
  for (int k = 0; k <= steps; ++k) t.push_back({q * k / steps, from + (to - from) * k / steps});
  return t;
}

}  // namespace

TEST(SocStats, LinearRampMoments) {
  const auto s = soc_stats(ramp(1.0, 0.0, 100.0));
  EXPECT_NEAR(s.soc_avg, 0.5, 1e-12);
  EXPECT_NEAR(s.soc_dev, 1.0 / std::sqrt(12.0), 1e-9);
  EXPECT_DOUBLE_EQ(s.q_processed, 100.0);
  // Refining the piecewise-linear trace changes nothing.
  const auto fine = soc_stats(ramp(1.0, 0.0, 100.0, 1000));
  EXPECT_NEAR(fine.soc_dev, s.soc_dev, 1e-12);
}

TEST(SocStats, ConstantSocHasZeroDeviation) {
  const auto s = soc_stats(SocTrace{{0.0, 0.7}, {5.0, 0.7}, {9.0, 0.7}});
  EXPECT_DOUBLE_EQ(s.soc_avg, 0.7);
  EXPECT_DOUBLE_EQ(s.soc_dev, 0.0);
}

TEST(SocStats, MatchesSampledMomentsOnRandomTrace) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> us(0.0, 1.0), uq(0.0, 5.0);
  SocTrace t{{0.0, 0.8}};
  for (int k = 0; k < 50; ++k) t.push_back({t.back().q_ah + uq(rng), us(rng)});
  const auto s = soc_stats(t);
  // Oracle: midpoint rule on a fine Q grid.
  const int m = 400000;
  const double q = t.back().q_ah;
  double m1 = 0.0, m2 = 0.0;
  std::size_t j = 0;
  for (int i = 0; i < m; ++i) {
    const double qq = (i + 0.5) * q / m;
    while (t[j + 1].q_ah < qq) ++j;
    const double f = (qq - t[j].q_ah) / (t[j + 1].q_ah - t[j].q_ah);
    const double soc = t[j].soc + f * (t[j + 1].soc - t[j].soc);
    m1 += soc / m;
    m2 += soc * soc / m;
  }
  EXPECT_NEAR(s.soc_avg, m1, 1e-6);
  EXPECT_NEAR(s.soc_dev, std::sqrt(m2 - m1 * m1), 1e-6);
  EXPECT_LE(s.soc_dev, 0.5);
}

TEST(SocStats, ZeroChargeThrows) {
  EXPECT_THROW((void)soc_stats(SocTrace{{1.0, 0.5}, {1.0, 0.4}}), InvalidArgument);
  EXPECT_THROW((void)soc_stats(SocTrace{{1.0, 0.5}}), InvalidArgument);
}

TEST(FadingRate, ZeroDeviationGivesK3) {
  const auto k = default_aging_params();
  const CycleStats s{0.6, 0.0, 10.0};
  EXPECT_EQ(fading_rate(s, k), k.k3);
}

TEST(FadingRate, IncreasesWithAverageSoc) {
  const auto k = default_aging_params();
  EXPECT_GT(fading_rate({0.7, 0.2, 1.0}, k), fading_rate({0.5, 0.2, 1.0}, k));
}

TEST(CapacityFade, LinearInQ) {
  const auto k = default_aging_params();
  const CycleStats a{0.53, 0.27, 350.0}, b{0.53, 0.27, 700.0};
  EXPECT_LE(std::abs(capacity_fade(b, k) - 2.0 * capacity_fade(a, k)), 1e-12);
  EXPECT_EQ(capacity_fade({0.5, 0.2, 0.0}, k), 0.0);
}

TEST(Calibration, ReproducesReferenceRows) {
  const auto [p1, p2] = reference_rate_points();
  const auto k = calibrate_aging(p1, p2, 1e-5, 1.0);
  EXPECT_NEAR(fading_rate({p1.soc_avg, p1.soc_dev, 1.0}, k), 1.94e-4, 1e-15);
  EXPECT_NEAR(fading_rate({p2.soc_avg, p2.soc_dev, 1.0}, k), 1.64e-4, 1e-15);
  EXPECT_NEAR(k.k3, 3.45297e-6, 1e-10);
  EXPECT_NEAR(k.k4, 14.7577, 1e-3);
  const auto d = default_aging_params();
  EXPECT_EQ(d.k3, k.k3);
  EXPECT_EQ(d.k4, k.k4);
}

TEST(Calibration, RejectsDegeneratePoints) {
  EXPECT_THROW((void)calibrate_aging({0.5, 0.2, 1e-4}, {0.6, 0.2, 2e-4}, 0.0, 0.0), InvalidArgument);
  EXPECT_THROW((void)calibrate_aging({0.5, 0.2, 1e-6}, {0.6, 0.3, 2e-4}, 1e-4, 1.0), InvalidArgument);
}

TEST(Charge, FreshPackFrom5Percent) {
  const auto c = simulate_charge(0.05, 1.0, 312.5);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_NEAR(c.back().q_ah - c.front().q_ah, 296.875, 1e-9);
  EXPECT_NEAR(charge_hours(0.05, 1.0, 0.1), 9.5, 1e-12);
  EXPECT_TRUE(simulate_charge(0.4, 0.4, 312.5).empty());
  EXPECT_LE(c.front().soc, c.back().soc);
  EXPECT_THROW((void)simulate_charge(0.5, 0.4, 312.5), InvalidArgument);
}

TEST(SocTraceCsv, RoundTripIsExact) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SocTrace t{{0.0, u(rng)}};
  for (int k = 0; k < 100; ++k) t.push_back({t.back().q_ah + u(rng), u(rng)});
  std::ostringstream out;
  write_soc_trace_csv(out, t);
  std::istringstream in(out.str());
  const auto back = read_soc_trace_csv(in);
  ASSERT_EQ(back.size(), t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    EXPECT_EQ(back[k].q_ah, t[k].q_ah);
    EXPECT_EQ(back[k].soc, t[k].soc);
  }
  std::istringstream bad("q,soc\n");
  EXPECT_THROW((void)read_soc_trace_csv(bad), ParseError);
  std::istringstream dec("q_ah,soc\n2,0.5\n1,0.4\n");
  EXPECT_THROW((void)read_soc_trace_csv(dec), ParseError);
}

TEST(Day, MonotoneDischargeThenCharge) {
  DriveProfile p{std::vector<double>(100, 1.0), 50.0};  // 1 Ah per segment
  DayConfig cfg;
  cfg.daily_km = 5.0;
  const auto d = simulate_day(p, 312.5, cfg);
  EXPECT_EQ(d.segments, 100u);
  EXPECT_DOUBLE_EQ(d.drive_ah, 100.0);
  EXPECT_NEAR(d.charge_ah, 100.0, 1e-9);
  EXPECT_NEAR(d.stats.q_processed, 200.0, 1e-9);
  EXPECT_NEAR(d.dod, 100.0 / 312.5, 1e-12);
  EXPECT_NEAR(d.soc_end_drive, 1.0 - 0.32, 1e-12);
}

TEST(Day, RegenerationIncreasesThroughput) {
  DriveProfile mono{std::vector<double>{1.0, 1.0}, 50.0};
  DriveProfile regen{std::vector<double>{3.0, -1.0}, 50.0};  // same net demand
  DayConfig cfg;
  cfg.daily_km = 10.0;
  const auto a = simulate_day(mono, 312.5, cfg);
  const auto b = simulate_day(regen, 312.5, cfg);
  EXPECT_NEAR(a.soc_end_drive, b.soc_end_drive, 1e-12);
  EXPECT_GT(b.stats.q_processed, a.stats.q_processed);
}

TEST(Day, RestDayHasOnlyChargeThroughput) {
  DriveProfile p{std::vector<double>{1.0}, 50.0};
  DayConfig cfg;
  cfg.daily_km = 0.0;
  cfg.departure_soc = 0.6;
  const auto d = simulate_day(p, 312.5, cfg);
  EXPECT_EQ(d.drive_ah, 0.0);
  EXPECT_NEAR(d.stats.q_processed, d.charge_ah, 1e-12);
  EXPECT_NEAR(d.charge_ah, 0.4 * 312.5, 1e-9);
}

TEST(Day, EndingSocMode) {
  DriveProfile p{std::vector<double>(10, 2.0), 50.0};
  DayConfig cfg;
  cfg.daily_km = 0.5;
  cfg.ending_soc = 0.2;
  const auto d = simulate_day(p, 312.5, cfg);
  EXPECT_NEAR(d.soc_end_drive, 0.2, 1e-12);
  EXPECT_NEAR(d.soc_start, 0.2 + 20.0 / 312.5, 1e-12);
  EXPECT_NEAR(d.charge_ah, 20.0, 1e-9);
}

TEST(Day, RangeExceededThrows) {
  DriveProfile p{std::vector<double>{10.0}, 50.0};
  DayConfig cfg;
  cfg.daily_km = 2.0;  // 40 segments, 400 Ah
  EXPECT_THROW((void)simulate_day(p, 312.5, cfg), RangeExceededError);
}

TEST(Life, ClosedFormWithoutDeviationTerms) {
  AgingParams k;
  k.k3 = 2e-4;  // k1 = k4 = 0: fade = k3 Q
  DriveProfile p{std::vector<double>(100, 1.0), 50.0};
  LifeScenario sc;
  sc.day.daily_km = 5.0;  // 100 Ah drive + 100 Ah charge
  const auto r = project_life(p, 312.5, k, sc);
  const double per_day = k.k3 * 200.0 / 312.5;
  EXPECT_EQ(r.days, static_cast<int>(std::ceil(0.30 / per_day - 1e-9)));
  EXPECT_NEAR(r.fade_curve.front(), per_day, 1e-15);
  EXPECT_NEAR(r.fade_curve.back(), r.days * per_day, 1e-9);
  EXPECT_TRUE(r.reached_eol);
  EXPECT_DOUBLE_EQ(r.years, r.days / 260.0);
}

TEST(Life, MoreThroughputShortensLife) {
  const auto k = default_aging_params();
  DriveProfile light{std::vector<double>(100, 0.8), 50.0};
  DriveProfile heavy{std::vector<double>(100, 1.0), 50.0};
  LifeScenario sc;
  sc.day.daily_km = 10.0;
  const auto a = project_life(light, 312.5, k, sc);
  const auto b = project_life(heavy, 312.5, k, sc);
  EXPECT_GT(a.years, b.years);
}

TEST(Life, IdenticalDaysAreOrderIndependent) {
  const auto k = default_aging_params();
  DriveProfile p{std::vector<double>{1.5, -0.2, 0.9, 1.1}, 50.0};
  LifeScenario sc;
  sc.day.daily_km = 10.0;
  const auto a = project_life(p, 312.5, k, sc);
  const auto b = project_life(p, 312.5, k, sc);
  EXPECT_EQ(a.fade_curve, b.fade_curve);
  // Whole days on a fresh-capacity pack fade by the same amount.
  EXPECT_NEAR(a.fade_curve[1] - a.fade_curve[0], a.fade_curve[0], 1e-3 * a.fade_curve[0]);
}

TEST(Life, FixedEndingSocRangeShrinks) {
  const auto k = default_aging_params();
  DriveProfile p{std::vector<double>(100, 0.5), 50.0};
  LifeScenario sc;
  sc.mode = LifeScenario::Mode::FixedEndingSoc;
  sc.ending_soc = 0.1;
  const auto r = project_life(p, 312.5, k, sc);
  ASSERT_GT(r.range_km_curve.size(), 10u);
  EXPECT_GT(r.range_km_curve.front(), r.range_km_curve.back());
}

TEST(Life, InfeasibleFirstDayThrows) {
  DriveProfile p{std::vector<double>{10.0}, 50.0};
  LifeScenario sc;
  sc.day.daily_km = 100.0;
  EXPECT_THROW((void)project_life(p, 312.5, default_aging_params(), sc), RangeExceededError);
}

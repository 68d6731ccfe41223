#pragma once

// Command-line front end. run_cli is callable in-process so tests can drive
// it without spawning the binary.
//
// Exit codes: 0 success, 1 usage or input error, 2 infeasible scenario,
// 3 non-convergence (outputs are still written).

#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <iostream>
#include <optional>
#include <tuple>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ecodrive/aging.hpp"
#include "ecodrive/errors.hpp"
#include "ecodrive/mpc.hpp"
#include "ecodrive/road.hpp"
#include "ecodrive/scenarios.hpp"
#include "ecodrive/solver.hpp"
#include "ecodrive/traffic.hpp"

namespace ecodrive {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitInfeasible = 2, kExitNonConvergence = 3 };

namespace detail {

inline std::filesystem::path prepare_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

inline void write_text(const std::filesystem::path& p, const std::function<void(std::ostream&)>& body) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ParseError("cannot write '" + p.string() + "'");
  body(f);
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  write_text(p, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void write_timings(const std::string& path, const std::vector<double>& wall) {
  if (path.empty()) return;
  write_text(path, [&](std::ostream& os) {
    os << "window,wall_s\n";
    for (std::size_t i = 0; i < wall.size(); ++i) os << i << ',' << wall[i] << '\n';
  });
}

}  // namespace detail

/// Parses and runs one command line; messages go to `out` and `err`.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Energy-minimal speed planning for a battery-electric truck"};
  app.require_subcommand(1);
  std::string config_path, out_dir = ".", road_path, timings_path;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "TOML scenario file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "overrides the traffic and road-noise seeds");
  app.add_option("--out-dir", out_dir, "directory for emitted files");
  app.add_option("--road", road_path, "road CSV (distance_m,altitude_m); overrides the config road");
  app.add_option("--timings", timings_path, "optional CSV of per-window solve wall times");

  auto* opt_cmd = app.add_subcommand("optimize", "single-horizon solve");
  std::size_t opt_n = 30, opt_start = 0;
  bool opt_oracle = false;
  double oracle_grid = 0.25, oracle_tol = 0.5;
  opt_cmd->add_option("-N,--segments", opt_n, "horizon length in segments")->check(CLI::PositiveNumber);
  opt_cmd->add_option("--start", opt_start, "first segment of the horizon");
  opt_cmd->add_flag("--oracle", opt_oracle, "also run the exhaustive grid search (N <= 6)");
  opt_cmd->add_option("--grid", oracle_grid, "oracle speed grid, m/s");
  opt_cmd->add_option("--time-tol", oracle_tol, "oracle trip-time tolerance, s");

  auto* mpc_cmd = app.add_subcommand("mpc", "full route under receding-horizon control");
  std::string controller = "admm";
  bool strict = false, mpc_traffic = false;
  mpc_cmd->add_option("--controller", controller, "admm or cc")->check(CLI::IsMember({"admm", "cc"}));
  mpc_cmd->add_flag("--strict", strict, "exit 3 when any window falls back");
  mpc_cmd->add_flag("--traffic", mpc_traffic, "enable stochastic traffic");

  auto* tg_cmd = app.add_subcommand("traffic-gen", "write a traffic trace for the road");
  std::string preset;
  tg_cmd->add_option("--preset", preset, "heavy, light or normal")->check(CLI::IsMember({"heavy", "light", "normal"}));

  auto* ag_cmd = app.add_subcommand("aging", "battery aging for a driven trajectory");
  bool calibrate = false;
  std::string ag_traj;
  ag_cmd->add_flag("--calibrate", calibrate, "fit k3, k4 to the reference rows and print them");
  ag_cmd->add_option("--trajectory", ag_traj, "trajectory.csv to evaluate (default: CC on the road)");

  auto* cmp_cmd = app.add_subcommand("compare", "ADMM vs CC, or two existing summaries");
  std::vector<std::string> summaries;
  bool batch = false, cmp_traffic = false;
  cmp_cmd->add_option("summaries", summaries, "two summary.json files")->expected(0, 2);
  cmp_cmd->add_flag("--traffic", cmp_traffic, "enable stochastic traffic");
  cmp_cmd->add_flag("--batch", batch, "seeded traffic batch: mean and 3 sigma per preset");

  auto* sr_cmd = app.add_subcommand("synth-road", "write a synthetic road CSV");
  SynthSpec sr_spec;
  bool sr_cli_given = false;
  sr_cmd->add_option("--length-km", sr_spec.length_km)->each([&](const std::string&) { sr_cli_given = true; });
  sr_cmd->add_option("--amplitude-m", sr_spec.hill_amplitude_m)->each([&](const std::string&) { sr_cli_given = true; });
  sr_cmd->add_option("--wavelength-km", sr_spec.hill_wavelength_km)->each([&](const std::string&) { sr_cli_given = true; });
  sr_cmd->add_option("--noise-m", sr_spec.noise_m)->each([&](const std::string&) { sr_cli_given = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    ScenarioConfig cfg = config_path.empty() ? ScenarioConfig{} : load_config(config_path);
    if (seed) {
      cfg.traffic.seed = *seed;
      cfg.road.synth.seed = *seed;
    }
    if (!road_path.empty()) cfg.road.csv_path = road_path;
    if (!preset.empty()) {
      const auto s = cfg.traffic.seed;
      cfg.traffic = preset == "heavy" ? TrafficConfig::heavy() : preset == "light" ? TrafficConfig::light()
                                                                                   : TrafficConfig::normal();
      cfg.traffic.seed = s;
    }
    if (mpc_traffic || cmp_traffic) cfg.traffic_enabled = true;
    const auto dir = detail::prepare_dir(out_dir);
    const auto& p = cfg.vehicle;

    if (*sr_cmd) {
      SynthSpec spec = sr_cli_given ? sr_spec : cfg.road.synth;
      if (sr_cli_given) spec.seed = cfg.road.synth.seed;
      const auto road = synth_road(spec);
      detail::write_text(dir / "road.csv", [&](std::ostream& os) { emit_road(os, road); });
      out << "segments " << road.size() << ", max |slope| " << road.max_abs_slope() << " rad\n";
      return kExitOk;
    }

    if (*ag_cmd && calibrate) {
      const auto [p1, p2] = reference_rate_points();
      const auto k = calibrate_aging(p1, p2, 1e-5, 1.0);
      out << std::setprecision(6) << "k1 " << k.k1 << "\nk2 " << k.k2 << "\nk3 " << k.k3 << "\nk4 " << k.k4 << '\n';
      detail::write_json(dir / "aging_params.json", {{"k1", k.k1}, {"k2", k.k2}, {"k3", k.k3}, {"k4", k.k4}});
      return kExitOk;
    }

    if (*cmp_cmd && summaries.size() == 2) {
      const auto a = detail::read_json(summaries[0]);
      const auto b = detail::read_json(summaries[1]);
      const auto fa = a.value("fingerprint", std::string{}), fb = b.value("fingerprint", std::string{});
      if (fa.empty() || fa != fb) {
        err << "error: scenario fingerprints differ (" << fa << " vs " << fb << "); refusing to compare\n";
        return kExitUsage;
      }
      auto rep = [](const nlohmann::json& j) {
        ControllerReport c;
        c.name = j.value("controller", std::string{"?"});
        c.energy_soc = j.at("energy_soc").get<double>();
        c.trip_time_s = j.at("trip_time_s").get<double>();
        c.drive_ah = j.at("drive_ah").get<double>();
        return c;
      };
      const auto r = compare(fa, rep(a), rep(b));
      detail::write_json(dir / "comparison.json", comparison_json(r));
      out << "energy " << r.energy_delta_pct << " %, time " << r.time_delta_pct << " %, Ah " << r.ah_delta_pct
          << " %\n";
      return kExitOk;
    }
    if (*cmp_cmd && summaries.size() == 1) {
      err << "error: compare needs zero or two summary files\n";
      return kExitUsage;
    }

    const auto road = build_road(cfg);
    std::optional<TrafficTrace> trace;
    if (cfg.traffic_enabled || *tg_cmd) trace = generate_trace(road.length_m(), road.segment_l, cfg.traffic);
    const double tau = cfg.tau_for(road, cfg.traffic_enabled ? &*trace : nullptr);
    const std::uint64_t tseed = cfg.traffic_enabled ? cfg.traffic.seed : 0;
    const auto fp = fingerprint(road, cfg, tseed);

    if (*tg_cmd) {
      detail::write_text(dir / "traffic.csv", [&](std::ostream& os) { write_trace_csv(os, *trace); });
      out << "segments " << trace->size() << ", with a vehicle ahead " << trace->present_distance_m() << " m\n";
      return kExitOk;
    }

    if (*opt_cmd) {
      require(opt_start + opt_n <= road.size(), "horizon extends past the end of the road");
      const std::span<const RoadSegment> win(road.segments.data() + opt_start, opt_n);
      double len = 0.0;
      for (const auto& s : win) len += s.length_m;
      const double tau_w = len / (cfg.target_speed_kmh / 3.6);
      const auto bounds = SpeedBounds::uniform(opt_n + 1, cfg.lower_kmh / 3.6, cfg.upper_kmh / 3.6);
      const auto r = solve(win, tau_w, bounds, p, cfg.solver);
      RouteResult rr;
      rr.traj = r.traj;
      rr.soc.push_back(cfg.initial_soc);
      for (std::size_t i = 0; i < opt_n; ++i) {
        const double d = soc_change(p, win[i], r.traj.x[i], accel_from_speeds(r.traj.x[i], r.traj.x[i + 1], win[i].length_m));
        rr.soc_delta.push_back(d);
        rr.soc.push_back(rr.soc.back() - d);
        rr.energy += d;
        rr.trip_time += r.traj.T[i];
      }
      detail::write_text(dir / "trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, rr); });
      auto rep = summarize("admm", rr, p);
      rep.iters = {r.iters};
      rep.median_iters = rep.max_iters = r.iters;
      rep.fallbacks = r.converged ? 0 : 1;
      const auto wfp = fingerprint(road, cfg, tseed, "window:" + std::to_string(opt_start) + ":" + std::to_string(opt_n));
      auto j = summary_json(wfp, rep, road, tau_w);
      j["converged"] = r.converged;
      j["residual_norm"] = residuals(r.traj, tau_w, win).norm();
      out << std::setprecision(10) << "admm energy " << r.energy << " (" << r.iters << " iterations"
          << (r.converged ? "" : ", not converged") << ")\n";
      if (opt_oracle) {
        const auto o = brute_force_oracle(win, tau_w, bounds, p, oracle_grid, oracle_tol);
        const double gap = 100.0 * (r.energy - o.energy) / std::abs(o.energy);
        out << "oracle energy " << o.energy << " (trip time " << o.time << " s)\n"
            << "gap " << gap << " %\n";
        j["oracle"] = {{"energy_soc", o.energy}, {"trip_time_s", o.time}, {"gap_pct", gap}, {"x_mps", o.x}};
      }
      detail::write_json(dir / "summary.json", j);
      return r.converged ? kExitOk : kExitNonConvergence;
    }

    if (*mpc_cmd) {
      const TrafficTrace* trp = cfg.traffic_enabled ? &*trace : nullptr;
      auto opt = route_options(cfg, trp);
      if (trp) opt.budget_weights = cfg.reference_times(road, trp);
      RouteResult r;
      if (controller == "admm") {
        r = run_route(road.segments, tau, p, cfg.mpc, cfg.solver, opt);
      } else {
        const double v = trp ? cc_speed_for_time(road.segments, tau, p, opt) : road.length_m() / tau;
        r = cc_baseline(road.segments, v, p, opt);
      }
      const auto rep = summarize(controller, r, p);
      detail::write_text(dir / "trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, r); });
      detail::write_json(dir / "summary.json", summary_json(fp, rep, road, tau));
      const auto ag = aging_report(r, cfg, road.segment_l);
      detail::write_json(dir / "aging.json", aging_json(ag, cfg.aging));
      detail::write_timings(timings_path, rep.solve_wall_s);
      out << controller << " energy " << r.energy << ", trip time " << r.trip_time << " s, fallbacks "
          << r.fallbacks << '\n';
      return strict && r.fallbacks > 0 ? kExitNonConvergence : kExitOk;
    }

    if (*ag_cmd) {
      RouteResult r;
      if (!ag_traj.empty()) {
        std::ifstream f(ag_traj);
        if (!f) throw ParseError("cannot open '" + ag_traj + "'");
        std::string line;
        std::getline(f, line);
        if (line.rfind("segment_index,x_mps,t_s,soc_delta", 0) != 0) throw ParseError(ag_traj + ": not a trajectory CSV");
        std::vector<double> d;
        std::size_t row = 1;
        while (std::getline(f, line)) {
          ++row;
          if (line.empty()) continue;
          d.push_back(detail::parse_double(line.substr(line.rfind(',') + 1), row));
        }
        if (!d.empty()) d.pop_back();  // closing row
        r.soc_delta = d;
      } else {
        r = cc_baseline(road.segments, road.length_m() / tau, p, route_options(cfg, nullptr));
      }
      const auto ag = aging_report(r, cfg, road.segment_l);
      detail::write_json(dir / "aging.json", aging_json(ag, cfg.aging));
      out << "daily Ah " << ag.day.stats.q_processed << ", fade per day " << ag.day_fade_ah << " Ah, one year "
          << ag.year_fade_pct << " %\n";
      return kExitOk;
    }

    if (*cmp_cmd && batch) {
      const std::pair<const char*, TrafficConfig> presets[] = {
          {"heavy", TrafficConfig::heavy()}, {"light", TrafficConfig::light()}, {"normal", TrafficConfig::normal()}};
      nlohmann::json all;
      for (const auto& [name, base] : presets) {
        std::vector<std::uint64_t> seeds;
        std::vector<std::future<double>> jobs;
        for (int k = 0; k < cfg.batch_runs; ++k) {
          seeds.push_back(cfg.traffic.seed + static_cast<std::uint64_t>(k));
          jobs.push_back(std::async(std::launch::async, [&, s = seeds.back(), tc = base]() mutable {
            ScenarioConfig c = cfg;
            tc.seed = s;
            c.traffic = tc;
            c.traffic_enabled = true;
            const auto tr = generate_trace(road.length_m(), road.segment_l, tc);
            return run_scenario(road, c, &tr, fingerprint(road, c, s)).report.energy_delta_pct;
          }));
        }
        std::vector<double> deltas;
        for (auto& j : jobs) deltas.push_back(j.get());
        const auto b = batch_stats(deltas);
        all[name] = batch_json(b, seeds);
        out << name << ": energy delta " << b.mean << " % +/- " << b.three_sigma << " % (3 sigma, n=" << deltas.size()
            << ")\n";
      }
      detail::write_json(dir / "batch.json", all);
      return kExitOk;
    }

    if (*cmp_cmd) {
      const auto s = run_scenario(road, cfg, cfg.traffic_enabled ? &*trace : nullptr, fp);
      const auto ad = dir / "admm";
      const auto cd = dir / "cc";
      std::filesystem::create_directories(ad);
      std::filesystem::create_directories(cd);
      for (const auto& [d, r, rep] : {std::tuple{ad, &s.admm, &s.report.admm}, std::tuple{cd, &s.cc, &s.report.cc}}) {
        detail::write_text(d / "trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, *r); });
        detail::write_json(d / "summary.json", summary_json(fp, *rep, road, tau));
        detail::write_json(d / "aging.json", aging_json(aging_report(*r, cfg, road.segment_l), cfg.aging));
      }
      detail::write_json(dir / "comparison.json", comparison_json(s.report));
      detail::write_text(dir / "series.csv", [&](std::ostream& os) { write_series_csv(os, road, s.admm, s.cc); });
      detail::write_timings(timings_path, s.report.admm.solve_wall_s);
      out << "energy " << s.report.energy_delta_pct << " %, time " << s.report.time_delta_pct << " %, Ah "
          << s.report.ah_delta_pct << " %\n";
      return kExitOk;
    }
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const KinematicsError& e) {
    err << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const RangeExceededError& e) {
    err << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const CollisionError& e) {
    err << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace ecodrive

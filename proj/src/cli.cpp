#include "caster/cli.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "caster/config.hpp"
#include "caster/nlp/gradient_check.hpp"

namespace caster::cli {

namespace fs = std::filesystem;

namespace {

RunConfig resolve(const CommonOptions & opts)
{
  RunConfig c = load_config(opts.config, opts.overrides);
  if (opts.out) { c.output_dir = *opts.out; }
  if (opts.seed) { c.seeds.base = *opts.seed; }
  c.validate();
  return c;
}

fs::path output_dir(const RunConfig & c)
{
  const fs::path dir(c.output_dir);
  fs::create_directories(dir);
  return dir;
}

/// Opens for writing or throws with the path in the message.
std::ofstream open_out(const fs::path & path)
{
  std::ofstream f(path, std::ios::binary);
  if (!f) { throw std::runtime_error(fmt::format("cannot write '{}'", path.string())); }
  return f;
}

std::optional<Scenario> scenario_or_report(const std::string & name, const RobotParams & p, std::ostream & err)
{
  auto sc = make_scenario(name, p);
  if (!sc) { fmt::print(err, "error: unknown scenario '{}' (hairpin, rotation, straight)\n", name); }
  return sc;
}

/// Shared error mapping: configuration and input problems are usage errors.
template <typename F>
int guarded(std::ostream & err, F && body)
{
  try {
    return body();
  } catch (const ConfigError & e) {
    fmt::print(err, "error: {}\n", e.what());
    return kUsage;
  } catch (const StreamParseError & e) {
    fmt::print(err, "error: {}\n", e.what());
    return kUsage;
  } catch (const std::invalid_argument & e) {
    fmt::print(err, "error: {}\n", e.what());
    return kUsage;
  } catch (const std::exception & e) {
    fmt::print(err, "error: {}\n", e.what());
    return kFailure;
  }
}

}  // namespace

std::optional<Range> parse_range(const std::string & text)
{
  const auto colon = text.find(':');
  if (colon == std::string::npos) { return std::nullopt; }
  try {
    std::size_t n1 = 0, n2 = 0;
    const double lo = std::stod(text.substr(0, colon), &n1);
    const double hi = std::stod(text.substr(colon + 1), &n2);
    if (n1 != colon || n2 != text.size() - colon - 1 || !(lo <= hi)) { return std::nullopt; }
    return Range{lo, hi};
  } catch (const std::exception &) {
    return std::nullopt;
  }
}

int cmd_simulate(const CommonOptions & opts, const std::string & scenario, const std::string & planner,
                 std::ostream & out, std::ostream & err)
{
  return guarded(err, [&] {
    const RunConfig c = resolve(opts);
    const auto sc = scenario_or_report(scenario, c.robot, err);
    if (!sc) { return int{kUsage}; }
    const auto kind = parse_planner_kind(planner);
    if (!kind) {
      fmt::print(err, "error: unknown planner '{}' (aware, agnostic, pathfilter)\n", planner);
      return int{kUsage};
    }

    const SimLog log = run_closed_loop(*sc, *kind, c.planner, c.weights, c.robot, c.noise, c.seeds.base);
    const Metrics m = compute_metrics(log, *sc, c.robot);
    const fs::path dir = output_dir(c);
    const fs::path csv = dir / simlog_filename(log);
    {
      std::ofstream f = open_out(csv);
      write_simlog_csv(f, log);
    }
    nlohmann::json j = to_json(m);
    j["scenario"] = log.scenario;
    j["planner"] = to_string(log.planner);
    j["seed"] = log.seed;
    j["solver_failures"] = log.solver_failures;
    fs::path meta = csv;
    meta.replace_extension(".json");
    open_out(meta) << j.dump(2) << '\n';

    fmt::print(out, "{} {} seed {}: time {:.2f} s, distance {:.3f} m, rmse {:.4f} m, bore proxy {:.4f}/{:.4f}\n",
               log.scenario, to_string(log.planner), log.seed, m.time_s, m.distance_m, m.rmse_m, m.mean_bore_proxy,
               m.max_bore_proxy);
    fmt::print(out, "wrote {}\n", csv.string());
    if (log.flagged()) {
      fmt::print(err, "warning: {} solver failures; zero input was applied on those ticks\n", log.solver_failures);
      if (opts.strict) { return int{kFailure}; }
    }
    return int{kOk};
  });
}

int cmd_compare(const CommonOptions & opts, const std::string & scenario, std::optional<int> repetitions,
                unsigned threads, std::ostream & out, std::ostream & err)
{
  return guarded(err, [&] {
    RunConfig c = resolve(opts);
    if (repetitions) {
      if (*repetitions < 1) { throw ConfigError("config: repetitions: must be >= 1"); }
      c.seeds.repetitions = *repetitions;
    }
    const auto sc = scenario_or_report(scenario, c.robot, err);
    if (!sc) { return int{kUsage}; }

    const Comparison cmp =
      compare_planners(*sc, c.planner, c.weights, c.robot, c.noise, c.seeds.repetitions, c.seeds.base, threads);
    const fs::path dir = output_dir(c);

    std::ostringstream table;
    write_comparison_table(table, cmp);
    out << table.str();
    open_out(dir / fmt::format("compare_{}.txt", scenario)) << table.str();
    open_out(dir / fmt::format("compare_{}.json", scenario)) << to_json(cmp).dump(2) << '\n';

    int flagged = 0;
    for (const auto & ps : cmp.planners) {
      std::vector<const SimLog *> runs;
      for (const auto & l : cmp.logs) {
        if (l.planner == ps.kind) { runs.push_back(&l); }
      }
      std::ofstream env = open_out(dir / fmt::format("{}_{}_envelope.csv", scenario, to_string(ps.kind)));
      write_envelope_csv(env, runs);
      flagged += ps.flagged_runs;
    }
    for (const auto & l : cmp.logs) {
      std::ofstream f = open_out(dir / simlog_filename(l));
      write_simlog_csv(f, l);
    }
    if (flagged > 0) {
      fmt::print(err, "warning: {} flagged runs\n", flagged);
      if (opts.strict) { return int{kFailure}; }
    }
    return int{kOk};
  });
}

int cmd_eigengrid(const CommonOptions & opts, const EigengridOptions & grid, std::ostream & out, std::ostream & err)
{
  return guarded(err, [&] {
    const RunConfig c = resolve(opts);
    const Range v = grid.v.value_or(Range{c.robot.v_min, c.robot.v_max});
    const Range w = grid.w.value_or(Range{c.robot.w_min, c.robot.w_max});
    const auto rows = eigenvalue_grid(v, w, grid.resolution, c.robot, grid.side);
    const fs::path path =
      output_dir(c) / fmt::format("eigengrid_{}.csv", grid.side == WheelSide::Left ? "left" : "right");
    std::ofstream f = open_out(path);
    write_eigenvalue_grid_csv(f, rows);
    fmt::print(out, "wrote {} ({} rows)\n", path.string(), rows.size());
    return int{kOk};
  });
}

int cmd_estimator_replay(const CommonOptions & opts, const std::string & input, std::ostream & out, std::ostream & err)
{
  return guarded(err, [&] {
    const RunConfig c = resolve(opts);
    std::ifstream in(input);
    if (!in) {
      fmt::print(err, "error: cannot open '{}'\n", input);
      return int{kUsage};
    }
    const auto stream = read_velocity_stream(in);
    if (stream.empty()) {
      fmt::print(err, "error: '{}' contains no measurements\n", input);
      return int{kUsage};
    }
    const fs::path path = output_dir(c) / (fs::path(input).stem().string() + "_estimate.csv");
    std::ofstream f = open_out(path);
    write_estimate_csv(f, replay_estimator(stream, c.robot));
    fmt::print(out, "wrote {} ({} rows)\n", path.string(), stream.size());
    return int{kOk};
  });
}

int cmd_check_gradients(const CommonOptions & opts, const std::string & scenario, int points, std::ostream & out,
                        std::ostream & err)
{
  return guarded(err, [&] {
    const RunConfig c = resolve(opts);
    if (points < 1) { throw ConfigError("config: points: must be >= 1"); }
    const auto sc = scenario_or_report(scenario, c.robot, err);
    if (!sc) { return int{kUsage}; }
    const ReferenceTrajectory ref = sc->reference.extended_by_hold(c.planner.horizon.horizon_T);
    const nlp::NlpProblem pr = build_nlp(sc->initial_state, ref, ref.start_time(), c.planner.horizon, c.weights,
                                         c.robot, c.planner.roll_model, Eigen::Vector2d(1.0, 1.0));

    constexpr double kTolerance = 1e-5;
    std::mt19937_64 rng(c.seeds.base);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    nlp::GradientReport worst;
    for (int i = 0; i < points; ++i) {
      Eigen::VectorXd y(pr.n_vars);
      for (Eigen::Index k = 0; k < y.size(); ++k) { y(k) = U(rng); }
      const nlp::GradientReport r = nlp::check_gradients(pr, y, kTolerance);
      if (i == 0) {
        worst = r;
        continue;
      }
      // per-block maximum over the points
      for (std::size_t b = 0; b < r.blocks.size(); ++b) {
        worst.blocks[b].max_rel_error = std::max(worst.blocks[b].max_rel_error, r.blocks[b].max_rel_error);
      }
      worst.max_rel_error = std::max(worst.max_rel_error, r.max_rel_error);
    }
    const fs::path path = output_dir(c) / fmt::format("gradients_{}.csv", scenario);
    std::ofstream f = open_out(path);
    nlp::write_gradient_report_csv(f, worst);
    fmt::print(out, "max relative error {:.3e} over {} points (tolerance {:.0e}): {}\n", worst.max_rel_error, points,
               kTolerance, worst.passed() ? "pass" : "FAIL");
    return int{worst.passed() ? kOk : kFailure};
  });
}

}  // namespace caster::cli

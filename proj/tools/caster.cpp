#include <CLI11.hpp>

#include <iostream>

#include "caster/cli.hpp"

namespace {

void add_common(CLI::App & cmd, caster::cli::CommonOptions & o)
{
  cmd.add_option("--config", o.config, "JSON configuration file");
  cmd.add_option("--set", o.overrides, "Override a config value, e.g. --set weights.q_cw=[0,0]");
  cmd.add_option("--out", o.out, "Output directory (replaces output_dir)");
  cmd.add_option("--seed", o.seed, "Base seed (replaces seeds.base)");
  cmd.add_flag("--strict", o.strict, "Exit nonzero when a run is flagged");
}

}  // namespace

int main(int argc, char ** argv)
{
  using namespace caster::cli;

  CLI::App app{"Caster-wheel-aware trajectory tracking: simulation, comparison and analysis tools"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string scenario = "hairpin", planner = "aware", input;
  std::optional<int> repetitions;
  unsigned threads = 0;
  int points = 100;
  std::string v_range, w_range, side = "left";
  EigengridOptions grid;

  auto * sim = app.add_subcommand("simulate", "Closed-loop run of one planner");
  add_common(*sim, common);
  sim->add_option("--scenario", scenario, "hairpin, rotation or straight")->capture_default_str();
  sim->add_option("--planner", planner, "aware, agnostic or pathfilter")->capture_default_str();

  auto * cmp = app.add_subcommand("compare", "All planners over seeded repetitions");
  add_common(*cmp, common);
  cmp->add_option("--scenario", scenario, "hairpin, rotation or straight")->capture_default_str();
  cmp->add_option("--repetitions", repetitions, "Replaces seeds.repetitions");
  cmp->add_option("--threads", threads, "Worker threads, 0 for all cores")->capture_default_str();

  auto * eig = app.add_subcommand("eigengrid", "Caster linearization eigenvalues over a velocity grid");
  add_common(*eig, common);
  eig->add_option("--v-range", v_range, "lo:hi in m/s, default the velocity bounds");
  eig->add_option("--w-range", w_range, "lo:hi in rad/s, default the yaw-rate bounds");
  eig->add_option("--resolution", grid.resolution, "Points per axis")->capture_default_str();
  eig->add_option("--side", side, "left or right")->capture_default_str()->check(CLI::IsMember({"left", "right"}));

  auto * rep = app.add_subcommand("estimator-replay", "Run the caster estimator over a t,V,Omega stream");
  add_common(*rep, common);
  rep->add_option("--input", input, "CSV with columns t,V,Omega")->required();

  auto * grad = app.add_subcommand("check-gradients", "Finite-difference check of the planner NLP");
  add_common(*grad, common);
  grad->add_option("--scenario", scenario, "hairpin, rotation or straight")->capture_default_str();
  grad->add_option("--points", points, "Random evaluation points")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  if (*sim) { return cmd_simulate(common, scenario, planner, std::cout, std::cerr); }
  if (*cmp) { return cmd_compare(common, scenario, repetitions, threads, std::cout, std::cerr); }
  if (*eig) {
    for (const auto & [text, target, name] :
         {std::tuple{&v_range, &grid.v, "--v-range"}, std::tuple{&w_range, &grid.w, "--w-range"}}) {
      if (text->empty()) { continue; }
      *target = parse_range(*text);
      if (!*target) {
        std::cerr << "error: " << name << " expects lo:hi with lo <= hi\n";
        return kUsage;
      }
    }
    grid.side = side == "right" ? caster::WheelSide::Right : caster::WheelSide::Left;
    return cmd_eigengrid(common, grid, std::cout, std::cerr);
  }
  if (*rep) { return cmd_estimator_replay(common, input, std::cout, std::cerr); }
  return cmd_check_gradients(common, scenario, points, std::cout, std::cerr);
}

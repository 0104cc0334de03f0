#ifndef CASTER_CLI_HPP_
#define CASTER_CLI_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "caster/robot_model.hpp"
#include "caster/stability.hpp"

namespace caster::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,  ///< the command ran but its check failed (flagged run under --strict, gradient mismatch)
  kUsage = 2,    ///< bad config, unknown name, unreadable input
};

struct CommonOptions
{
  std::string config;                  ///< empty: defaults
  std::vector<std::string> overrides;  ///< `key=value`, applied after the file
  std::optional<std::string> out;      ///< replaces output_dir
  std::optional<std::uint64_t> seed;   ///< replaces seeds.base
  bool strict{false};
};

/// Writes `<out>/<scenario>_<planner>_<seed>.csv` and the matching `.json` metrics.
int cmd_simulate(const CommonOptions & opts, const std::string & scenario, const std::string & planner,
                 std::ostream & out, std::ostream & err);

/**
 * Runs every planner with seeds base..base+repetitions-1. Writes the table to `out` and to
 * `<out>/compare_<scenario>.txt`, plus `compare_<scenario>.json`, per-planner envelopes and every log.
 */
int cmd_compare(const CommonOptions & opts, const std::string & scenario, std::optional<int> repetitions,
                unsigned threads, std::ostream & out, std::ostream & err);

struct EigengridOptions
{
  std::optional<Range> v;  ///< default: the robot's velocity bounds
  std::optional<Range> w;
  int resolution{101};
  WheelSide side{WheelSide::Left};
};

/// Writes `<out>/eigengrid_<side>.csv`.
int cmd_eigengrid(const CommonOptions & opts, const EigengridOptions & grid, std::ostream & out, std::ostream & err);

/// Reads a `t,V,Omega` stream and writes `<out>/<input stem>_estimate.csv`.
int cmd_estimator_replay(const CommonOptions & opts, const std::string & input, std::ostream & out, std::ostream & err);

/// Checks derivatives of the first-tick NLP at `points` random points. Writes `<out>/gradients_<scenario>.csv`.
int cmd_check_gradients(const CommonOptions & opts, const std::string & scenario, int points, std::ostream & out,
                        std::ostream & err);

/// "a:b" into a range; nullopt on malformed text.
std::optional<Range> parse_range(const std::string & text);

}  // namespace caster::cli

#endif  // CASTER_CLI_HPP_

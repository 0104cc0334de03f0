#ifndef CASTER_CONFIG_HPP_
#define CASTER_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "caster/harness.hpp"

namespace caster {

/// Bad configuration; the message names the offending key.
struct ConfigError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct SeedConfig
{
  std::uint64_t base{0};
  int repetitions{10};

  bool operator==(const SeedConfig &) const = default;
};

/**
 * Everything a command needs. JSON layout, every section optional:
 *
 *     { "robot": {...}, "weights": {...}, "horizon": {...}, "roll_model": "predicted",
 *       "path_filter": {...}, "noise": {...}, "seeds": {...}, "solver": {...}, "output_dir": "out" }
 *
 * Field names match the struct members; vectors are JSON arrays.
 */
struct RunConfig
{
  RobotParams robot{};
  PlannerWeights weights{};
  PlannerConfig planner{};
  NoiseConfig noise{};
  SeedConfig seeds{};
  std::string output_dir{"out"};

  /// Throws ConfigError with a key-qualified message.
  void validate() const;
};

/// Unknown keys and wrongly typed values throw ConfigError; the result is validated.
RunConfig config_from_json(const nlohmann::json & j);
nlohmann::json to_json(const RunConfig & c);

/// Applies `a.b.c=value` to a JSON document. The value is parsed as JSON, falling back to a string.
void apply_override(nlohmann::json & j, std::string_view assignment);

/// Reads `path` (defaults when empty), applies the overrides in order, then parses.
RunConfig load_config(const std::filesystem::path & path, const std::vector<std::string> & overrides = {});

}  // namespace caster

#endif  // CASTER_CONFIG_HPP_

#ifndef CASTER_HARNESS_HPP_
#define CASTER_HARNESS_HPP_

#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "caster/planner.hpp"

namespace caster {

struct Scenario
{
  std::string name;
  ReferenceTrajectory reference;
  PlantState initial_state{PlantState::Zero()};
  double duration{0.0};            ///< s
  double estimator_mismatch{0.0};  ///< rad added to both initial caster estimates
};

/**
 * Out along +x, a clockwise half turn on the spot (hairpin A), straight back, a counter-clockwise
 * half turn (hairpin B). Trapezoidal profiles at 80 % of the acceleration bounds.
 * Throws std::invalid_argument for a non-positive length or a cruise speed outside (0, v_max].
 */
Scenario scenario_hairpin_line(const RobotParams & p, double length_m = 4.0, double cruise_speed = 0.5);

/// Fixed position, heading turned by `angle` with a trapezoidal yaw-rate profile.
Scenario scenario_rotation_on_spot(const RobotParams & p, double angle = std::numbers::pi);

/// Constant-speed line along +x, starting at speed with aligned casters.
Scenario scenario_straight_line(const RobotParams & p, double length_m = 8.0, double speed = 0.5);

/// "hairpin", "rotation" or "straight" with default arguments.
std::optional<Scenario> make_scenario(std::string_view name, const RobotParams & p);

struct NoiseConfig
{
  double v_amplitude{0.01};  ///< m/s, uniform
  double w_amplitude{0.02};  ///< rad/s, uniform

  void validate() const;
  bool operator==(const NoiseConfig &) const = default;
};

struct SimRow
{
  double t;
  PlantState x;
  ControlInput u;  ///< applied over [t, t + dt]; zero on the final row
  CasterEstimate est;
  std::optional<nlp::SolveStatus> status;  ///< empty on the final row
  int iterations{0};
  Eigen::Vector2d dgamma;       ///< true roll rate minus Gamma, per side
  Eigen::Vector2d misalignment; ///< wrap(phi - phi_ss); NaN at rest
  bool filtered{false};
  bool clamped{false};
};

struct SimLog
{
  std::string scenario;
  PlannerKind planner{PlannerKind::Aware};
  std::uint64_t seed{0};
  double dt{0.05};
  std::vector<SimRow> rows;
  int solver_failures{0};       ///< NumericalFailure ticks; zero input applied
  int constraint_violations{0}; ///< applied inputs breaking the actuator bounds by more than 1e-6
  int clamp_events{0};

  bool flagged() const { return solver_failures > 0; }
};

/**
 * @brief Closed loop of plant, estimator and planner.
 *
 * Each tick: measure (v, omega) with seeded uniform noise, advance the estimator on the measurement,
 * plan from the plant state, apply the first input, integrate the plant. The Aware planner replaces
 * the caster angles with the estimate. The reference is held at its final pose beyond its end.
 */
SimLog run_closed_loop(
  const Scenario & scenario, PlannerKind kind, const PlannerConfig & cfg, const PlannerWeights & w,
  const RobotParams & p, const NoiseConfig & noise, std::uint64_t seed);

/// `<scenario>_<planner>_<seed>.csv`
std::string simlog_filename(const SimLog & log);
void write_simlog_csv(std::ostream & os, const SimLog & log);

/// Root mean square of the distance from each logged position to the reference polyline.
double rmse_tracking(const SimLog & log, const ReferenceTrajectory & ref);

struct BoreProxy
{
  double mean;
  double max;
};

/**
 * @brief Dimensionless misalignment-at-low-roll-speed indicator, for relative comparison only.
 *
 * Per sample and caster |sin(wrap(phi - phi_ss))| exp(-|gdot| / 2). At rest phi_ss is taken from
 * the velocities the applied input leads to; a sample at rest with a zero command scores 0.
 */
BoreProxy bore_proxy(const SimLog & log, const RobotParams & p);

struct Metrics
{
  double time_s{0.0};
  double distance_m{0.0};
  double rmse_m{0.0};
  double mean_bore_proxy{0.0};
  double max_bore_proxy{0.0};
  int constraint_violations{0};
  int clamp_events{0};
  bool flagged{false};
};

/**
 * time_s is the first time from which the robot stays within 0.05 m and 0.1 rad of the final
 * reference pose at rest; the full log duration when it never settles.
 */
Metrics compute_metrics(const SimLog & log, const Scenario & scenario, const RobotParams & p);

nlohmann::json to_json(const Metrics & m);

struct MetricSummary
{
  double mean{0.0};
  double max_deviation{0.0};  ///< max |x - mean| over repetitions
};

struct PlannerSummary
{
  PlannerKind kind;
  MetricSummary time_s, distance_m, rmse_m, mean_bore_proxy, max_bore_proxy;
  int constraint_violations{0};
  int clamp_events{0};
  int flagged_runs{0};
  std::vector<Metrics> runs;  ///< seed order
};

struct Comparison
{
  std::string scenario;
  int repetitions{0};
  std::uint64_t base_seed{0};
  std::vector<PlannerSummary> planners;  ///< Agnostic, PathFilter, Aware
  std::vector<SimLog> logs;              ///< planner-major, seed order
};

/**
 * Runs every planner `repetitions` times with seeds base_seed, base_seed + 1, ... Runs execute on
 * up to `threads` workers (0: hardware concurrency); results are merged in seed order.
 */
Comparison compare_planners(
  const Scenario & scenario, const PlannerConfig & cfg, const PlannerWeights & w, const RobotParams & p,
  const NoiseConfig & noise, int repetitions = 10, std::uint64_t base_seed = 0, unsigned threads = 0);

nlohmann::json to_json(const Comparison & c);

/// Aligned plain-text table with rows Time [s], Distance [m], RMSE [m], Mean/Max bore proxy.
void write_comparison_table(std::ostream & os, const Comparison & c);

/// Per-sample min/max of x and y across the runs of one planner: `t,x_min,x_max,y_min,y_max`.
void write_envelope_csv(std::ostream & os, const std::vector<const SimLog *> & runs);

}  // namespace caster

#endif  // CASTER_HARNESS_HPP_

#ifndef CASTER_PLANNER_HPP_
#define CASTER_PLANNER_HPP_

/**
 * @file
 * @brief Receding-horizon tracking NMPC with a caster-wheel-aware cost term.
 *
 * The horizon is transcribed by multiple shooting over the seven-state plant. Stage k costs
 * \f[
 *   \|\Delta p^k\|^2_{Q_{nav}} + \|\Delta\dot\gamma^k\|^2_{Q_{cw}} + \|u^k\|^2_{Q_u},
 * \f]
 * where \f$ \Delta\dot\gamma \f$ is the gap between the caster roll speed and its smoothed
 * steady-state value \f$ \Gamma(v, \omega) \f$. A caster that rolls slower than its steady
 * state is misaligned, which is where bore torques peak, so the term steers plans away from
 * such maneuvers. The terminal stage carries no input term.
 */

#include <Eigen/Core>

#include <optional>
#include <string_view>

#include "caster/estimator.hpp"
#include "caster/nlp/sqp.hpp"
#include "caster/reference.hpp"
#include "caster/robot_model.hpp"

namespace caster {

struct PlannerWeights
{
  Eigen::Vector3d q_nav{10.0, 10.0, 2.0};  ///< x, y, heading
  Eigen::Vector2d q_cw{0.02, 0.02};       ///< left, right caster
  Eigen::Vector2d q_u{0.1, 0.05};         ///< a, alpha

  void validate() const;
  bool operator==(const PlannerWeights &) const = default;
};

struct HorizonConfig
{
  double horizon_T{2.0};      ///< s
  double control_rate{20.0};  ///< Hz

  Eigen::Index stages() const;
  double dt() const { return 1.0 / control_rate; }
  void validate() const;
  bool operator==(const HorizonConfig &) const = default;
};

/// How the caster roll speed evolves inside the horizon.
enum class RollModel {
  Predicted,  ///< roll rate of the predicted (v, omega, phi) at every stage
  Measured,   ///< the current estimate held constant over the horizon
};

enum class PlannerKind { Aware, Agnostic, PathFilter };

enum class FilterMode {
  OneWheel,  ///< watches the left caster only
  TwoWheel,
};

struct PathFilterOptions
{
  double gdot_lo{1.0};  ///< rad/s, roll speed below which a caster counts as stalled
  double e_hi{0.35};    ///< rad, misalignment that triggers the filter
  double v_creep{0.05}; ///< m/s
  FilterMode mode{FilterMode::OneWheel};

  void validate() const;
  bool operator==(const PathFilterOptions &) const = default;
};

struct PlannerConfig
{
  HorizonConfig horizon{};
  RollModel roll_model{RollModel::Predicted};
  PathFilterOptions filter{};
  nlp::SolverOptions solver{};
};

const char * to_string(PlannerKind kind);
const char * to_string(FilterMode mode);
const char * to_string(RollModel model);
std::optional<PlannerKind> parse_planner_kind(std::string_view name);

/// Per-side gap gdot_hat - Gamma(v, omega).
Eigen::Vector2d caster_penalty(const PlantState & x, const Eigen::Vector2d & gdot_hat, const RobotParams & p);

/// Single-stage cost; the heading error is wrapped.
double stage_cost(
  const PlantState & x, const ControlInput & u, const Eigen::Vector3d & p_ref, const Eigen::Vector2d & gdot_hat,
  const PlannerWeights & w, const RobotParams & p);

/**
 * @brief Multiple-shooting NLP over stages k = 0..N-1 at times t0 + k dt.
 *
 * Variables [x^0..x^{N-1}, u^0..u^{N-2}]. x^0 is pinned to x0. With RollModel::Measured the
 * caster residual uses `gdot_hat` at every stage. Caster blocks are omitted when q_cw is zero.
 * Throws std::invalid_argument when the reference does not cover the horizon.
 */
nlp::NlpProblem build_nlp(
  const PlantState & x0, const ReferenceTrajectory & ref, double t0, const HorizonConfig & cfg,
  const PlannerWeights & w, const RobotParams & p, RollModel roll_model = RollModel::Predicted,
  const Eigen::Vector2d & gdot_hat = Eigen::Vector2d::Zero());

struct FilteredCommand
{
  double v;
  double w;
  bool active;
};

/**
 * @brief Decoupled caster filter on velocity commands.
 *
 * A watched caster triggers when its roll rate under the command, at its estimated angle, is
 * below gdot_lo while its misalignment to the commanded steady yaw exceeds e_hi. The yaw
 * rate is then scaled down by e_hi / |e| and the speed raised to at least v_creep.
 */
FilteredCommand path_filter(
  double v_cmd, double w_cmd, const CasterEstimate & est, const RobotParams & p, const PathFilterOptions & opts);

struct PlanResult
{
  ControlInput input{ControlInput::Zero()};
  nlp::Solution solution;
  bool filtered{false};  ///< PathFilter changed the command
  bool clamped{false};   ///< the filtered command had to be clamped to the actuator bounds
};

/**
 * @brief Solve one tick and return the input to apply.
 *
 * Aware overrides the caster angles of x0 with the estimate; kinds with zero q_cw ignore `est`
 * entirely. PathFilter solves the Agnostic problem, filters the stage-1 velocities and converts
 * them back to accelerations over one period, clamping per wheel.
 */
PlanResult plan_step(
  PlannerKind kind, const PlantState & x0, const CasterEstimate & est, const ReferenceTrajectory & ref, double t0,
  const PlannerConfig & cfg, const PlannerWeights & w, const RobotParams & p, const nlp::Solution * warm = nullptr);

/// Largest violation of the velocity and wheel-acceleration bounds by applying u at x.
double actuator_violation(const PlantState & x, const ControlInput & u, double dt, const RobotParams & p);

}  // namespace caster

#endif  // CASTER_PLANNER_HPP_

#ifndef CASTER_ESTIMATOR_HPP_
#define CASTER_ESTIMATOR_HPP_

/**
 * @file
 * @brief Open-loop observer for the caster yaw angles and roll speeds.
 *
 * The observer integrates the caster yaw dynamics driven by the measured body velocities
 * \f$ (V, \Omega) \f$. The stable equilibrium is globally attractive for constant non-zero
 * velocities, so the estimate converges without caster sensors.
 */

#include <Eigen/Core>

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "caster/robot_model.hpp"

namespace caster {

struct VelocityMeasurement
{
  double V{0.0};      ///< longitudinal velocity, m/s
  double Omega{0.0};  ///< yaw rate, rad/s
  double t{0.0};      ///< timestamp, s
};

struct CasterEstimate
{
  Eigen::Vector2d xi{Eigen::Vector2d::Zero()};         ///< [phi_L_hat, phi_R_hat], unwrapped
  Eigen::Vector2d gamma_dot{Eigen::Vector2d::Zero()};  ///< [gdot_L_hat, gdot_R_hat]
  double t{0.0};
};

/// Per-side roll rates at the estimated yaw angles and measured velocities.
Eigen::Vector2d estimate_roll_speeds(const Eigen::Vector2d & xi, const VelocityMeasurement & meas, const RobotParams & p);

/// Steady yaws when moving, forward-facing [0, 0] at rest.
CasterEstimate init_estimate(const VelocityMeasurement & meas, const RobotParams & p);

/**
 * @brief Advance the estimate to meas.t.
 *
 * RK4 over dt = meas.t - est.t with (meas.V, meas.Omega) held constant, then the roll speeds
 * are refreshed from the new angles. Throws std::invalid_argument if meas.t <= est.t.
 */
CasterEstimate estimator_step(const CasterEstimate & est, const VelocityMeasurement & meas, const RobotParams & p);

/// Per-side 1/2 wrap(xi - phi_ss)^2; nullopt at zero velocity where phi_ss is undefined.
std::optional<Eigen::Vector2d> lyapunov_value(
  const Eigen::Vector2d & xi, const VelocityMeasurement & meas, const RobotParams & p);

/// Thrown by read_velocity_stream for an unparsable row; carries the 1-based line number.
struct StreamParseError : std::runtime_error
{
  StreamParseError(std::size_t line_no, const std::string & what);
  std::size_t line;
};

/// Reads `t,V,Omega` CSV (header optional). Throws StreamParseError.
std::vector<VelocityMeasurement> read_velocity_stream(std::istream & is);

/// Runs the estimator over a stream; the first sample initializes it.
std::vector<CasterEstimate> replay_estimator(const std::vector<VelocityMeasurement> & stream, const RobotParams & p);

/// CSV with header `t,phi_L_hat,phi_R_hat,gdot_L_hat,gdot_R_hat`.
void write_estimate_csv(std::ostream & os, const std::vector<CasterEstimate> & estimates);

}  // namespace caster

#endif  // CASTER_ESTIMATOR_HPP_

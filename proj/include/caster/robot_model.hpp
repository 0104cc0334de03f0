#ifndef CASTER_ROBOT_MODEL_HPP_
#define CASTER_ROBOT_MODEL_HPP_

/**
 * @file
 * @brief Kinematics of a differential-drive robot with two passive caster wheels.
 *
 * The plant has seven states
 * \f[
 *   x = [WB_x,\ WB_y,\ \theta,\ v,\ \omega,\ \varphi_L,\ \varphi_R]
 * \f]
 * driven by the accelerations \f$ u = [a, \alpha] \f$. Each caster wheel is mounted on a
 * hinge located at \f$ (\Delta x_{cw}, \pm\Delta y_{cw}) \f$ in the body frame and trails the
 * hinge by \f$ l_{tr} \f$. The hinge velocity seen by a wheel is
 * \f$ (v \mp \omega \Delta y_{cw},\ \omega \Delta x_{cw}) \f$ with the upper sign for the left
 * wheel.
 *
 * All functions are templated on the scalar type and free of side effects.
 */

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>

namespace caster {

/// Geometry and actuation limits of the robot. SI units.
struct RobotParams
{
  double dx_cw{0.25};  ///< longitudinal offset body origin -> caster hinge
  double dy_cw{0.18};  ///< lateral offset of each caster hinge
  double dy_dw{0.36};  ///< driven-wheel track width
  double l_tr{0.04};   ///< caster trail
  double r_cw{0.04};   ///< caster wheel radius

  double v_min{-1.0};
  double v_max{1.0};
  double w_min{-1.0};
  double w_max{1.0};
  double a_min{-1.0};  ///< per driven wheel
  double a_max{1.0};   ///< per driven wheel

  double zeta{1e-6};   ///< smoothing constant under the square root of the steady roll speed

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const;

  bool operator==(const RobotParams &) const = default;
};

enum class WheelSide { Left, Right };

/// Sign applied to the \f$ \omega \Delta y_{cw} \f$ term: -1 for Left, +1 for Right.
constexpr double lateral_sign(WheelSide side) noexcept { return side == WheelSide::Left ? -1.0 : 1.0; }

/// Indices into the plant state vector.
enum StateIndex : Eigen::Index { kPosX = 0, kPosY, kTheta, kVel, kOmega, kPhiL, kPhiR };

inline constexpr Eigen::Index kStateDim = 7;
inline constexpr Eigen::Index kInputDim = 2;

template<typename Scalar>
using PlantStateT = Eigen::Matrix<Scalar, kStateDim, 1>;
template<typename Scalar>
using ControlInputT = Eigen::Matrix<Scalar, kInputDim, 1>;

using PlantState   = PlantStateT<double>;
using ControlInput = ControlInputT<double>;

using StateJacobian = Eigen::Matrix<double, kStateDim, kStateDim>;
using InputJacobian = Eigen::Matrix<double, kStateDim, kInputDim>;

/// Wrap an angle to (-pi, pi].
template<typename Scalar>
Scalar wrap_angle(const Scalar & angle)
{
  using std::floor;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  Scalar wrapped = angle - two_pi * floor((angle + std::numbers::pi) / two_pi);
  // floor maps +pi to -pi; the interval is closed on the right
  if (wrapped <= -std::numbers::pi) { wrapped += two_pi; }
  return wrapped;
}

constexpr Eigen::Index caster_state_index(WheelSide side) noexcept
{
  return side == WheelSide::Left ? kPhiL : kPhiR;
}

// ---------------------------------------------------------------------------------------------
// Differential drive
// ---------------------------------------------------------------------------------------------

/// Rows 1-5 of the plant: [v cos(theta), v sin(theta), omega, a, alpha].
template<typename Scalar>
Eigen::Matrix<Scalar, 5, 1> diff_drive_derivative(const PlantStateT<Scalar> & x, const ControlInputT<Scalar> & u)
{
  using std::cos, std::sin;
  Eigen::Matrix<Scalar, 5, 1> dx;
  dx << x(kVel) * cos(x(kTheta)), x(kVel) * sin(x(kTheta)), x(kOmega), u(0), u(1);
  return dx;
}

// ---------------------------------------------------------------------------------------------
// Caster wheel
// ---------------------------------------------------------------------------------------------

/// Caster yaw rate \f$ \dot\varphi = -\frac{1}{l_{tr}}[(v \mp \omega\Delta y)\sin\varphi - \omega\Delta x\cos\varphi] \f$.
template<typename Scalar>
Scalar caster_yaw_rate(const Scalar & v, const Scalar & w, const Scalar & phi, WheelSide side, const RobotParams & p)
{
  using std::cos, std::sin;
  const Scalar along = v + lateral_sign(side) * w * p.dy_cw;
  const Scalar across = w * p.dx_cw;
  return -(along * sin(phi) - across * cos(phi)) / p.l_tr;
}

/// Caster roll rate \f$ \dot\gamma = \frac{1}{r_{cw}}[(v \mp \omega\Delta y)\cos\varphi + \omega\Delta x\sin\varphi] \f$.
template<typename Scalar>
Scalar caster_roll_rate(const Scalar & v, const Scalar & w, const Scalar & phi, WheelSide side, const RobotParams & p)
{
  using std::cos, std::sin;
  const Scalar along = v + lateral_sign(side) * w * p.dy_cw;
  const Scalar across = w * p.dx_cw;
  return (along * cos(phi) + across * sin(phi)) / p.r_cw;
}

/**
 * @brief Stable steady-state caster yaw angle in (-pi, pi].
 *
 * Returns std::nullopt when (v, w) = (0, 0): every angle is an equilibrium of a robot at rest.
 * The unstable equilibrium is the returned angle plus pi.
 */
template<typename Scalar>
std::optional<Scalar> caster_steady_yaw(const Scalar & v, const Scalar & w, WheelSide side, const RobotParams & p)
{
  using std::atan2;
  if (v == Scalar(0) && w == Scalar(0)) { return std::nullopt; }
  const Scalar along = v + lateral_sign(side) * w * p.dy_cw;
  const Scalar across = w * p.dx_cw;
  return wrap_angle<Scalar>(atan2(across, along));
}

/// Steady-state roll speed \f$ \frac{1}{r_{cw}}\sqrt{(v \mp \omega\Delta y)^2 + (\omega\Delta x)^2} \f$.
template<typename Scalar>
Scalar caster_steady_roll(const Scalar & v, const Scalar & w, WheelSide side, const RobotParams & p)
{
  using std::sqrt;
  const Scalar along = v + lateral_sign(side) * w * p.dy_cw;
  const Scalar across = w * p.dx_cw;
  return sqrt(along * along + across * across) / p.r_cw;
}

/// Smoothed steady-state roll speed \f$ \Gamma \f$: the steady roll speed with \f$ \zeta \f$ added under the root.
template<typename Scalar>
Scalar smoothed_steady_roll(const Scalar & v, const Scalar & w, WheelSide side, const RobotParams & p)
{
  using std::sqrt;
  const Scalar along = v + lateral_sign(side) * w * p.dy_cw;
  const Scalar across = w * p.dx_cw;
  return sqrt(along * along + across * across + p.zeta) / p.r_cw;
}

/// \f$ \partial\dot\varphi / \partial\varphi \f$, the eigenvalue of the linearized yaw dynamics.
template<typename Scalar>
Scalar caster_linearization_eigenvalue(
  const Scalar & v, const Scalar & w, const Scalar & phi, const RobotParams & p, WheelSide side)
{
  using std::cos, std::sin;
  const Scalar along = v + lateral_sign(side) * w * p.dy_cw;
  const Scalar across = w * p.dx_cw;
  return -(along * cos(phi) + across * sin(phi)) / p.l_tr;
}

// ---------------------------------------------------------------------------------------------
// Plant
// ---------------------------------------------------------------------------------------------

template<typename Scalar>
PlantStateT<Scalar> plant_derivative(const PlantStateT<Scalar> & x, const ControlInputT<Scalar> & u, const RobotParams & p)
{
  PlantStateT<Scalar> dx;
  dx.template head<5>() = diff_drive_derivative<Scalar>(x, u);
  dx(kPhiL) = caster_yaw_rate<Scalar>(x(kVel), x(kOmega), x(kPhiL), WheelSide::Left, p);
  dx(kPhiR) = caster_yaw_rate<Scalar>(x(kVel), x(kOmega), x(kPhiR), WheelSide::Right, p);
  return dx;
}

/// One classical Runge-Kutta step with the input held constant over [t, t + dt].
template<typename Scalar>
PlantStateT<Scalar> integrate_step(
  const PlantStateT<Scalar> & x, const ControlInputT<Scalar> & u, double dt, const RobotParams & p)
{
  if (!(dt > 0.0)) { throw std::invalid_argument("integrate_step: dt must be positive"); }
  const PlantStateT<Scalar> k1 = plant_derivative<Scalar>(x, u, p);
  const PlantStateT<Scalar> k2 = plant_derivative<Scalar>(x + (0.5 * dt) * k1, u, p);
  const PlantStateT<Scalar> k3 = plant_derivative<Scalar>(x + (0.5 * dt) * k2, u, p);
  const PlantStateT<Scalar> k4 = plant_derivative<Scalar>(x + dt * k3, u, p);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// ---------------------------------------------------------------------------------------------
// Analytic derivatives (double only)
// ---------------------------------------------------------------------------------------------

/// Gradient of caster_yaw_rate w.r.t. (v, w, phi).
Eigen::Vector3d caster_yaw_rate_gradient(double v, double w, double phi, WheelSide side, const RobotParams & p);

/// Gradient of caster_roll_rate w.r.t. (v, w, phi).
Eigen::Vector3d caster_roll_rate_gradient(double v, double w, double phi, WheelSide side, const RobotParams & p);

/// Gradient of smoothed_steady_roll w.r.t. (v, w). Defined everywhere since zeta > 0.
Eigen::Vector2d smoothed_steady_roll_gradient(double v, double w, WheelSide side, const RobotParams & p);

/// Jacobians of plant_derivative: d(xdot)/dx and d(xdot)/du.
void plant_jacobian(const PlantState & x, const RobotParams & p, StateJacobian & A);

/**
 * @brief integrate_step together with its sensitivities.
 *
 * @param[out] A d(x_next)/dx
 * @param[out] B d(x_next)/du
 */
PlantState integrate_step_with_jacobian(
  const PlantState & x, const ControlInput & u, double dt, const RobotParams & p, StateJacobian & A, InputJacobian & B);

}  // namespace caster

#endif  // CASTER_ROBOT_MODEL_HPP_

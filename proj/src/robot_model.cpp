#include "caster/robot_model.hpp"

#include <string>

namespace caster {

namespace {

void require(bool condition, const char * field, const char * what)
{
  if (!condition) { throw std::invalid_argument(std::string("RobotParams.") + field + ": " + what); }
}

}  // namespace

void RobotParams::validate() const
{
  require(std::isfinite(dx_cw) && dx_cw > 0.0, "dx_cw", "must be > 0");
  require(std::isfinite(dy_cw) && dy_cw >= 0.0, "dy_cw", "must be >= 0");
  require(std::isfinite(dy_dw) && dy_dw > 0.0, "dy_dw", "must be > 0");
  require(std::isfinite(l_tr) && l_tr > 0.0, "l_tr", "must be > 0");
  require(std::isfinite(r_cw) && r_cw > 0.0, "r_cw", "must be > 0");
  require(std::isfinite(v_min) && v_min < 0.0, "v_min", "must be < 0");
  require(std::isfinite(v_max) && v_max > 0.0, "v_max", "must be > 0");
  require(std::isfinite(w_min) && w_min < 0.0, "w_min", "must be < 0");
  require(std::isfinite(w_max) && w_max > 0.0, "w_max", "must be > 0");
  require(std::isfinite(a_min) && a_min < 0.0, "a_min", "must be < 0");
  require(std::isfinite(a_max) && a_max > 0.0, "a_max", "must be > 0");
  require(std::isfinite(zeta) && zeta > 0.0 && zeta <= 1e-4, "zeta", "must lie in (0, 1e-4]");
}

Eigen::Vector3d caster_yaw_rate_gradient(double v, double w, double phi, WheelSide side, const RobotParams & p)
{
  const double s = lateral_sign(side);
  const double sp = std::sin(phi), cp = std::cos(phi);
  const double along = v + s * w * p.dy_cw;
  const double across = w * p.dx_cw;
  return Eigen::Vector3d(
    -sp / p.l_tr, -(s * p.dy_cw * sp - p.dx_cw * cp) / p.l_tr, -(along * cp + across * sp) / p.l_tr);
}

Eigen::Vector3d caster_roll_rate_gradient(double v, double w, double phi, WheelSide side, const RobotParams & p)
{
  const double s = lateral_sign(side);
  const double sp = std::sin(phi), cp = std::cos(phi);
  const double along = v + s * w * p.dy_cw;
  const double across = w * p.dx_cw;
  return Eigen::Vector3d(
    cp / p.r_cw, (s * p.dy_cw * cp + p.dx_cw * sp) / p.r_cw, (-along * sp + across * cp) / p.r_cw);
}

Eigen::Vector2d smoothed_steady_roll_gradient(double v, double w, WheelSide side, const RobotParams & p)
{
  const double s = lateral_sign(side);
  const double along = v + s * w * p.dy_cw;
  const double across = w * p.dx_cw;
  const double root = std::sqrt(along * along + across * across + p.zeta);
  return Eigen::Vector2d(along, s * p.dy_cw * along + p.dx_cw * across) / (p.r_cw * root);
}

void plant_jacobian(const PlantState & x, const RobotParams & p, StateJacobian & A)
{
  A.setZero();
  const double ct = std::cos(x(kTheta)), st = std::sin(x(kTheta));
  A(kPosX, kTheta) = -x(kVel) * st;
  A(kPosX, kVel) = ct;
  A(kPosY, kTheta) = x(kVel) * ct;
  A(kPosY, kVel) = st;
  A(kTheta, kOmega) = 1.0;

  for (const WheelSide side : {WheelSide::Left, WheelSide::Right}) {
    const Eigen::Index row = caster_state_index(side);
    const Eigen::Vector3d g = caster_yaw_rate_gradient(x(kVel), x(kOmega), x(row), side, p);
    A(row, kVel) = g(0);
    A(row, kOmega) = g(1);
    A(row, row) = g(2);
  }
}

PlantState integrate_step_with_jacobian(
  const PlantState & x, const ControlInput & u, double dt, const RobotParams & p, StateJacobian & A, InputJacobian & B)
{
  if (!(dt > 0.0)) { throw std::invalid_argument("integrate_step: dt must be positive"); }

  // the input enters only rows kVel and kOmega, linearly
  InputJacobian Fu = InputJacobian::Zero();
  Fu(kVel, 0) = 1.0;
  Fu(kOmega, 1) = 1.0;

  StateJacobian J;
  const StateJacobian I = StateJacobian::Identity();

  const PlantState k1 = plant_derivative<double>(x, u, p);
  plant_jacobian(x, p, J);
  const StateJacobian dk1x = J;
  const InputJacobian dk1u = Fu;

  const PlantState x2 = x + (0.5 * dt) * k1;
  const PlantState k2 = plant_derivative<double>(x2, u, p);
  plant_jacobian(x2, p, J);
  const StateJacobian dk2x = J * (I + (0.5 * dt) * dk1x);
  const InputJacobian dk2u = J * ((0.5 * dt) * dk1u) + Fu;

  const PlantState x3 = x + (0.5 * dt) * k2;
  const PlantState k3 = plant_derivative<double>(x3, u, p);
  plant_jacobian(x3, p, J);
  const StateJacobian dk3x = J * (I + (0.5 * dt) * dk2x);
  const InputJacobian dk3u = J * ((0.5 * dt) * dk2u) + Fu;

  const PlantState x4 = x + dt * k3;
  const PlantState k4 = plant_derivative<double>(x4, u, p);
  plant_jacobian(x4, p, J);
  const StateJacobian dk4x = J * (I + dt * dk3x);
  const InputJacobian dk4u = J * (dt * dk3u) + Fu;

  A = I + (dt / 6.0) * (dk1x + 2.0 * dk2x + 2.0 * dk3x + dk4x);
  B = (dt / 6.0) * (dk1u + 2.0 * dk2u + 2.0 * dk3u + dk4u);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace caster

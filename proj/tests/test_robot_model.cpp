#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "caster/robot_model.hpp"
#include "caster/stability.hpp"

using namespace caster;

namespace {

constexpr double kPi = std::numbers::pi;

// Integrates the yaw ODE alone with a fine explicit midpoint scheme until it settles.
double settle_yaw(double v, double w, double phi, WheelSide side, const RobotParams & p)
{
  const double h = 1e-4;
  for (int i = 0; i < 2'000'000; ++i) {
    const double k1 = caster_yaw_rate(v, w, phi, side, p);
    const double k2 = caster_yaw_rate(v, w, phi + 0.5 * h * k1, side, p);
    phi += h * k2;
    if (std::abs(k2) < 1e-9) { break; }
  }
  return phi;
}

}  // namespace

TEST(DiffDrive, Evaluation)
{
  PlantState x = PlantState::Zero();
  ControlInput u = ControlInput::Zero();
  EXPECT_TRUE(diff_drive_derivative(x, u).isZero(0.0));

  x(kVel) = 1.0;
  Eigen::Matrix<double, 5, 1> expect;
  expect << 1, 0, 0, 0, 0;
  EXPECT_TRUE(diff_drive_derivative(x, u).isApprox(expect));

  x(kTheta) = kPi / 2;
  x(kVel) = 2.0;
  x(kOmega) = 0.5;
  u << 0.1, -0.2;
  const auto d = diff_drive_derivative(x, u);
  EXPECT_NEAR(d(0), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(d(1), 2.0);
  EXPECT_DOUBLE_EQ(d(2), 0.5);
  EXPECT_DOUBLE_EQ(d(3), 0.1);
  EXPECT_DOUBLE_EQ(d(4), -0.2);
}

TEST(Caster, YawRateHandValue)
{
  const RobotParams p;
  // hand substitution: along = 0.5 - 0.3*0.18 = 0.446, across = 0.075
  const double along = 0.446, across = 0.075;
  const double expect = -(along * std::sin(0.2) - across * std::cos(0.2)) / 0.04;
  EXPECT_NEAR(caster_yaw_rate(0.5, 0.3, 0.2, WheelSide::Left, p), expect, 1e-12);
  EXPECT_EQ(caster_yaw_rate(1.0, 0.0, 0.0, WheelSide::Left, p), 0.0);
  EXPECT_EQ(caster_yaw_rate(0.0, 0.0, 1.3, WheelSide::Right, p), 0.0);
}

TEST(Caster, RollRate)
{
  const RobotParams p;
  EXPECT_DOUBLE_EQ(caster_roll_rate(0.5, 0.0, 0.0, WheelSide::Left, p), 12.5);
  EXPECT_EQ(caster_roll_rate(0.0, 0.0, 0.7, WheelSide::Left, p), 0.0);
  EXPECT_NEAR(caster_roll_rate(0.5, 0.0, kPi / 2, WheelSide::Right, p), 0.0, 1e-12);
}

TEST(Caster, SteadyYawMatchesLongIntegration)
{
  const RobotParams p;
  EXPECT_FALSE(caster_steady_yaw(0.0, 0.0, WheelSide::Left, p).has_value());
  EXPECT_EQ(*caster_steady_yaw(1.0, 0.0, WheelSide::Left, p), 0.0);

  const double left = *caster_steady_yaw(0.0, 1.0, WheelSide::Left, p);
  const double right = *caster_steady_yaw(0.0, 1.0, WheelSide::Right, p);
  EXPECT_NEAR(left, 2.195, 1e-3);
  EXPECT_NEAR(right, 0.946, 1e-3);
  EXPECT_NEAR(wrap_angle(settle_yaw(0.0, 1.0, 0.0, WheelSide::Left, p)), left, 1e-6);
  EXPECT_NEAR(wrap_angle(settle_yaw(0.0, 1.0, 0.0, WheelSide::Right, p)), right, 1e-6);
}

TEST(Caster, SteadyRollConsistency)
{
  const RobotParams p;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> vd(p.v_min, p.v_max), wd(p.w_min, p.w_max);
  for (int i = 0; i < 1000; ++i) {
    const double v = vd(rng), w = wd(rng);
    for (const auto side : {WheelSide::Left, WheelSide::Right}) {
      const double phi = *caster_steady_yaw(v, w, side, p);
      const double g = caster_steady_roll(v, w, side, p);
      EXPECT_NEAR(caster_yaw_rate(v, w, phi, side, p), 0.0, 1e-12);
      EXPECT_NEAR(caster_roll_rate(v, w, phi, side, p), g, 1e-10);
      EXPECT_NEAR(caster_linearization_eigenvalue(v, w, phi, p, side), -(p.r_cw / p.l_tr) * g, 1e-12);
      EXPECT_LT(caster_linearization_eigenvalue(v, w, phi, p, side), 0.0);
      EXPECT_GT(caster_linearization_eigenvalue(v, w, phi + kPi, p, side), 0.0);
      const double gs = smoothed_steady_roll(v, w, side, p);
      EXPECT_GE(gs - g, 0.0);
      EXPECT_LE(gs - g, std::sqrt(p.zeta) / p.r_cw);
    }
    // mirror: swap side, negate w
    const double phl = *caster_steady_yaw(v, w, WheelSide::Left, p);
    const double phr = *caster_steady_yaw(v, -w, WheelSide::Right, p);
    EXPECT_NEAR(wrap_angle(phl + phr), 0.0, 1e-12);
    EXPECT_NEAR(caster_steady_roll(v, w, WheelSide::Left, p), caster_steady_roll(v, -w, WheelSide::Right, p), 1e-12);
  }
}

TEST(Caster, SmoothedRoll)
{
  const RobotParams p;
  EXPECT_NEAR(smoothed_steady_roll(0.0, 0.0, WheelSide::Left, p), 0.025, 1e-15);
  const double bound = p.zeta / (2.0 * p.r_cw * p.r_cw * 12.5);
  EXPECT_LE(std::abs(smoothed_steady_roll(0.5, 0.0, WheelSide::Left, p) - 12.5), bound * (1.0 + 1e-6));
}

TEST(Caster, EigenvalueFiniteDifference)
{
  const RobotParams p;
  EXPECT_NEAR(caster_linearization_eigenvalue(0.2, 0.0, 0.0, p, WheelSide::Left), -5.0, 1e-12);
  const double h = 1e-6;
  for (const double phi : {0.0, 0.4, -2.0}) {
    const double fd = (caster_yaw_rate(0.2, 0.3, phi + h, WheelSide::Left, p)
                       - caster_yaw_rate(0.2, 0.3, phi - h, WheelSide::Left, p)) / (2 * h);
    EXPECT_NEAR(caster_linearization_eigenvalue(0.2, 0.3, phi, p, WheelSide::Left), fd, 1e-8);
  }
}

TEST(Caster, ConvergenceAndInstability)
{
  const RobotParams p;
  const double v = 0.3, w = -0.4;
  for (const auto side : {WheelSide::Left, WheelSide::Right}) {
    const double ss = *caster_steady_yaw(v, w, side, p);
    const double g = caster_steady_roll(v, w, side, p);
    const double T = 10.0 * p.l_tr / (p.r_cw * g);
    // tan(e/2) decays like exp(-t / tau); offsets closer to pi need longer than 10 tau
    for (const double phi0 : {ss + 2.9, ss - 2.5, ss + 0.5}) {
      double phi = phi0;
      const int steps = 20000;
      const double h = T / steps;
      for (int i = 0; i < steps; ++i) {
        const double k1 = caster_yaw_rate(v, w, phi, side, p);
        const double k2 = caster_yaw_rate(v, w, phi + 0.5 * h * k1, side, p);
        const double k3 = caster_yaw_rate(v, w, phi + 0.5 * h * k2, side, p);
        const double k4 = caster_yaw_rate(v, w, phi + h * k3, side, p);
        phi += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
      }
      EXPECT_LT(std::abs(wrap_angle(phi - ss)), 1e-3);
    }
    for (const double eps : {1e-3, -1e-3}) {
      const double end = settle_yaw(v, w, ss + kPi + eps, side, p);
      EXPECT_LT(std::abs(wrap_angle(end - ss)), 1e-6);
    }
  }
}

TEST(Plant, DerivativeComposition)
{
  const RobotParams p;
  EXPECT_TRUE(plant_derivative(PlantState::Zero().eval(), ControlInput::Zero().eval(), p).isZero(0.0));
  PlantState x;
  x << 0.1, -0.2, 0.3, 0.4, -0.5, 0.6, -0.7;
  const ControlInput u(0.2, 0.1);
  const PlantState d = plant_derivative(x, u, p);
  EXPECT_EQ(d(kPhiL), caster_yaw_rate(0.4, -0.5, 0.6, WheelSide::Left, p));
  EXPECT_EQ(d(kPhiR), caster_yaw_rate(0.4, -0.5, -0.7, WheelSide::Right, p));

  x(kPhiL) = *caster_steady_yaw(0.4, -0.5, WheelSide::Left, p);
  x(kPhiR) = *caster_steady_yaw(0.4, -0.5, WheelSide::Right, p);
  const PlantState d2 = plant_derivative(x, u, p);
  EXPECT_NEAR(d2(kPhiL), 0.0, 1e-12);
  EXPECT_NEAR(d2(kPhiR), 0.0, 1e-12);
}

TEST(Plant, IntegrateStep)
{
  const RobotParams p;
  PlantState x = PlantState::Zero();
  x(kVel) = 0.3;
  EXPECT_THROW(integrate_step(x, ControlInput::Zero().eval(), 0.0, p), std::invalid_argument);
  EXPECT_THROW(integrate_step(x, ControlInput::Zero().eval(), -0.1, p), std::invalid_argument);

  const PlantState y = integrate_step(x, ControlInput(0.7, 0.0), 0.05, p);
  EXPECT_DOUBLE_EQ(y(kVel), 0.3 + 0.7 * 0.05);

  PlantState s = PlantState::Zero();
  s(kVel) = 0.4;
  s(kOmega) = 0.3;
  s(kPhiL) = *caster_steady_yaw(0.4, 0.3, WheelSide::Left, p);
  s(kPhiR) = *caster_steady_yaw(0.4, 0.3, WheelSide::Right, p);
  const PlantState s1 = integrate_step(s, ControlInput::Zero().eval(), 0.05, p);
  EXPECT_NEAR(s1(kPhiL), s(kPhiL), 1e-12);
  EXPECT_NEAR(s1(kPhiR), s(kPhiR), 1e-12);
}

TEST(Plant, Rk4Order)
{
  const RobotParams p;
  PlantState x;
  x << 0, 0, 0.2, 0.5, 0.4, 1.0, -1.0;
  const ControlInput u(0.3, -0.2);
  // one step of dt against two steps of dt/2
  std::vector<double> lh, le;
  for (const double dt : {0.08, 0.04, 0.02, 0.01}) {
    const PlantState one = integrate_step(x, u, dt, p);
    const PlantState two = integrate_step(integrate_step(x, u, dt / 2, p), u, dt / 2, p);
    lh.push_back(std::log(dt));
    le.push_back(std::log((one - two).norm()));
  }
  const double mh = (lh[0] + lh[1] + lh[2] + lh[3]) / 4, me = (le[0] + le[1] + le[2] + le[3]) / 4;
  double num = 0, den = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    num += (lh[i] - mh) * (le[i] - me);
    den += (lh[i] - mh) * (lh[i] - mh);
  }
  EXPECT_GE(num / den, 4.5);
}

TEST(Plant, JacobianMatchesFiniteDifference)
{
  const RobotParams p;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    PlantState x;
    for (int i = 0; i < 7; ++i) { x(i) = 2.0 * d(rng); }
    const ControlInput u(d(rng), d(rng));
    StateJacobian A;
    InputJacobian B;
    const PlantState y = integrate_step_with_jacobian(x, u, 0.05, p, A, B);
    EXPECT_TRUE(y.isApprox(integrate_step(x, u, 0.05, p), 1e-14));
    for (int j = 0; j < 7; ++j) {
      const double h = 1e-6 * (1 + std::abs(x(j)));
      PlantState xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      const PlantState fd = (integrate_step(xp, u, 0.05, p) - integrate_step(xm, u, 0.05, p)) / (2 * h);
      EXPECT_LT((A.col(j) - fd).lpNorm<Eigen::Infinity>(), 1e-7);
    }
    for (int j = 0; j < 2; ++j) {
      const double h = 1e-6;
      ControlInput up = u, um = u;
      up(j) += h;
      um(j) -= h;
      const PlantState fd = (integrate_step(x, up, 0.05, p) - integrate_step(x, um, 0.05, p)) / (2 * h);
      EXPECT_LT((B.col(j) - fd).lpNorm<Eigen::Infinity>(), 1e-7);
    }
  }
}

TEST(Gradients, CasterRates)
{
  const RobotParams p;
  const double v = 0.3, w = -0.6, phi = 0.9, h = 1e-6;
  for (const auto side : {WheelSide::Left, WheelSide::Right}) {
    const Eigen::Vector3d gy = caster_yaw_rate_gradient(v, w, phi, side, p);
    const Eigen::Vector3d gr = caster_roll_rate_gradient(v, w, phi, side, p);
    EXPECT_NEAR(gy(0), (caster_yaw_rate(v + h, w, phi, side, p) - caster_yaw_rate(v - h, w, phi, side, p)) / (2 * h), 1e-6);
    EXPECT_NEAR(gy(1), (caster_yaw_rate(v, w + h, phi, side, p) - caster_yaw_rate(v, w - h, phi, side, p)) / (2 * h), 1e-6);
    EXPECT_NEAR(gy(2), caster_linearization_eigenvalue(v, w, phi, p, side), 1e-12);
    EXPECT_NEAR(gr(2), (caster_roll_rate(v, w, phi + h, side, p) - caster_roll_rate(v, w, phi - h, side, p)) / (2 * h), 1e-6);
    EXPECT_NEAR(gr(0), (caster_roll_rate(v + h, w, phi, side, p) - caster_roll_rate(v - h, w, phi, side, p)) / (2 * h), 1e-6);
  }
  const Eigen::Vector2d g0 = smoothed_steady_roll_gradient(0.0, 0.0, WheelSide::Left, p);
  EXPECT_TRUE(g0.allFinite());
  EXPECT_TRUE(g0.isZero(0.0));
}

TEST(WrapAngle, Range)
{
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi + 0.1), -kPi + 0.1, 1e-12);
  EXPECT_NEAR(wrap_angle(-0.2), -0.2, 1e-15);
}

TEST(Params, Validation)
{
  RobotParams p;
  EXPECT_NO_THROW(p.validate());
  p.l_tr = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = RobotParams{};
  p.zeta = 1e-3;
  try {
    p.validate();
    FAIL();
  } catch (const std::invalid_argument & e) {
    EXPECT_NE(std::string(e.what()).find("zeta"), std::string::npos);
  }
  p = RobotParams{};
  p.v_min = 0.1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(EigenGrid, Structure)
{
  const RobotParams p;
  EXPECT_THROW(eigenvalue_grid({0.0, 0.0}, {-1.0, 1.0}, 5, p), std::invalid_argument);
  EXPECT_THROW(eigenvalue_grid({-1.0, 1.0}, {-1.0, 1.0}, 1, p), std::invalid_argument);

  const auto rows = eigenvalue_grid({-1.0, 1.0}, {-1.0, 1.0}, 11, p);
  ASSERT_EQ(rows.size(), 121u);
  bool has_origin = false;
  for (const auto & r : rows) {
    EXPECT_NEAR(r.lambda_stable, -r.lambda_unstable, 1e-12 * std::abs(r.lambda_stable));
    if (r.v == 0.0 && r.w == 0.0) {
      has_origin = true;
      EXPECT_EQ(r.lambda_stable, 0.0);
    } else {
      EXPECT_LT(r.lambda_stable, 0.0);
    }
  }
  EXPECT_TRUE(has_origin);
  // along w = 0 the stable eigenvalue is -|v| / l_tr
  for (const auto & r : rows) {
    if (r.w == 0.0) { EXPECT_NEAR(r.lambda_stable, -std::abs(r.v) / p.l_tr, 1e-12); }
  }
}

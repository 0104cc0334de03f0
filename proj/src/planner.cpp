#include "caster/planner.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace caster {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr WheelSide kSides[2] = {WheelSide::Left, WheelSide::Right};

void require(bool ok, const char * what)
{
  if (!ok) { throw std::invalid_argument(what); }
}

}  // namespace

void PlannerWeights::validate() const
{
  require(q_nav.allFinite() && (q_nav.array() >= 0.0).all(), "weights.q_nav: entries must be finite and >= 0");
  require((q_nav.array() > 0.0).any(), "weights.q_nav: at least one entry must be positive");
  require(q_cw.allFinite() && (q_cw.array() >= 0.0).all(), "weights.q_cw: entries must be finite and >= 0");
  require(q_u.allFinite() && (q_u.array() >= 0.0).all(), "weights.q_u: entries must be finite and >= 0");
}

Eigen::Index HorizonConfig::stages() const
{
  return static_cast<Eigen::Index>(std::lround(horizon_T * control_rate));
}

void HorizonConfig::validate() const
{
  require(std::isfinite(horizon_T) && horizon_T > 0.0, "horizon.horizon_T: must be > 0");
  require(std::isfinite(control_rate) && control_rate > 0.0, "horizon.control_rate: must be > 0");
  require(stages() >= 2, "horizon: horizon_T * control_rate must give at least 2 stages");
}

void PathFilterOptions::validate() const
{
  require(std::isfinite(gdot_lo) && gdot_lo >= 0.0, "path_filter.gdot_lo: must be >= 0");
  require(std::isfinite(e_hi) && e_hi > 0.0 && e_hi < std::numbers::pi, "path_filter.e_hi: must lie in (0, pi)");
  require(std::isfinite(v_creep) && v_creep >= 0.0, "path_filter.v_creep: must be >= 0");
}

const char * to_string(PlannerKind kind)
{
  switch (kind) {
    case PlannerKind::Aware: return "aware";
    case PlannerKind::Agnostic: return "agnostic";
    case PlannerKind::PathFilter: return "pathfilter";
  }
  return "unknown";
}

const char * to_string(FilterMode mode)
{
  return mode == FilterMode::OneWheel ? "one_wheel" : "two_wheel";
}

const char * to_string(RollModel model)
{
  return model == RollModel::Predicted ? "predicted" : "measured";
}

std::optional<PlannerKind> parse_planner_kind(std::string_view name)
{
  for (const auto k : {PlannerKind::Aware, PlannerKind::Agnostic, PlannerKind::PathFilter}) {
    if (name == to_string(k)) { return k; }
  }
  return std::nullopt;
}

Eigen::Vector2d caster_penalty(const PlantState & x, const Eigen::Vector2d & gdot_hat, const RobotParams & p)
{
  return {gdot_hat(0) - smoothed_steady_roll(x(kVel), x(kOmega), WheelSide::Left, p),
          gdot_hat(1) - smoothed_steady_roll(x(kVel), x(kOmega), WheelSide::Right, p)};
}

double stage_cost(
  const PlantState & x, const ControlInput & u, const Eigen::Vector3d & p_ref, const Eigen::Vector2d & gdot_hat,
  const PlannerWeights & w, const RobotParams & p)
{
  const Eigen::Vector3d dp(p_ref(0) - x(kPosX), p_ref(1) - x(kPosY), wrap_angle(p_ref(2) - x(kTheta)));
  const Eigen::Vector2d dg = caster_penalty(x, gdot_hat, p);
  return (w.q_nav.array() * dp.array().square()).sum() + (w.q_cw.array() * dg.array().square()).sum()
         + (w.q_u.array() * u.array().square()).sum();
}

nlp::NlpProblem build_nlp(
  const PlantState & x0, const ReferenceTrajectory & ref, double t0, const HorizonConfig & cfg,
  const PlannerWeights & w, const RobotParams & p, RollModel roll_model, const Eigen::Vector2d & gdot_hat)
{
  using nlp::Index;
  using nlp::MatrixXd;
  using nlp::VectorXd;

  cfg.validate();
  const Index N = cfg.stages();
  const double dt = cfg.dt();
  if (ref.empty() || t0 < ref.start_time() - 1e-9 || t0 + (N - 1) * dt > ref.end_time() + 1e-9) {
    throw std::invalid_argument(fmt::format("build_nlp: reference does not cover [{}, {}]", t0, t0 + (N - 1) * dt));
  }

  const nlp::StageLayout L{kStateDim, kInputDim, N};
  nlp::NlpProblem pr;
  pr.n_vars = L.n_vars();
  pr.layout = L;
  pr.lower_bounds = VectorXd::Constant(pr.n_vars, -kInf);
  pr.upper_bounds = VectorXd::Constant(pr.n_vars, kInf);

  const auto state_idx = [&L](Index k, std::initializer_list<Index> rows) {
    std::vector<Index> idx;
    for (const Index r : rows) { idx.push_back(L.state_offset(k) + r); }
    return idx;
  };
  const auto input_idx = [&L](Index k) {
    return std::vector<Index>{L.input_offset(k), L.input_offset(k) + 1};
  };
  const bool caster_term = (w.q_cw.array() > 0.0).any();

  for (Index k = 0; k < N; ++k) {
    const int stage = static_cast<int>(k);
    const Eigen::Vector3d pose = ref.pose_at(t0 + k * dt);

    nlp::ResidualBlock nav;
    nav.name = fmt::format("pose[{}]", k);
    nav.vars = state_idx(k, {kPosX, kPosY, kTheta});
    nav.weights = w.q_nav;
    nav.stage = stage;
    nav.eval = [pose](const VectorXd & x, VectorXd & r, MatrixXd * J) {
      r.resize(3);
      r << x(0) - pose(0), x(1) - pose(1), wrap_angle(x(2) - pose(2));
      if (J) { J->setIdentity(3, 3); }
    };
    pr.residuals.push_back(std::move(nav));

    if (caster_term) {
      nlp::ResidualBlock cw;
      cw.name = fmt::format("caster[{}]", k);
      cw.weights = w.q_cw;
      cw.stage = stage;
      if (roll_model == RollModel::Predicted) {
        cw.vars = state_idx(k, {kVel, kOmega, kPhiL, kPhiR});
        cw.eval = [p](const VectorXd & x, VectorXd & r, MatrixXd * J) {
          r.resize(2);
          if (J) { J->setZero(2, 4); }
          for (int s = 0; s < 2; ++s) {
            const WheelSide side = kSides[s];
            r(s) = caster_roll_rate(x(0), x(1), x(2 + s), side, p) - smoothed_steady_roll(x(0), x(1), side, p);
            if (J) {
              const Eigen::Vector3d gr = caster_roll_rate_gradient(x(0), x(1), x(2 + s), side, p);
              const Eigen::Vector2d gs = smoothed_steady_roll_gradient(x(0), x(1), side, p);
              (*J)(s, 0) = gr(0) - gs(0);
              (*J)(s, 1) = gr(1) - gs(1);
              (*J)(s, 2 + s) = gr(2);
            }
          }
        };
      } else {
        cw.vars = state_idx(k, {kVel, kOmega});
        cw.eval = [p, gdot_hat](const VectorXd & x, VectorXd & r, MatrixXd * J) {
          r.resize(2);
          if (J) { J->resize(2, 2); }
          for (int s = 0; s < 2; ++s) {
            r(s) = gdot_hat(s) - smoothed_steady_roll(x(0), x(1), kSides[s], p);
            if (J) { J->row(s) = -smoothed_steady_roll_gradient(x(0), x(1), kSides[s], p).transpose(); }
          }
        };
      }
      pr.residuals.push_back(std::move(cw));
    }

    if (k + 1 < N) {
      nlp::ResidualBlock in;
      in.name = fmt::format("input[{}]", k);
      in.vars = input_idx(k);
      in.weights = w.q_u;
      in.stage = stage;
      in.eval = [](const VectorXd & x, VectorXd & r, MatrixXd * J) {
        r = x;
        if (J) { J->setIdentity(2, 2); }
      };
      pr.residuals.push_back(std::move(in));
    }
  }

  nlp::DefectBlock init;
  init.name = "initial_state";
  init.targets = state_idx(0, {0, 1, 2, 3, 4, 5, 6});
  init.stage = 0;
  const VectorXd x0_dyn = x0;
  init.eval = [x0_dyn](const VectorXd &, VectorXd & f, MatrixXd * J) {
    f = x0_dyn;
    if (J) { J->resize(kStateDim, 0); }
  };
  pr.defects.push_back(std::move(init));

  for (Index k = 1; k < N; ++k) {
    nlp::DefectBlock d;
    d.name = fmt::format("dynamics[{}]", k);
    d.targets = state_idx(k, {0, 1, 2, 3, 4, 5, 6});
    d.deps = state_idx(k - 1, {0, 1, 2, 3, 4, 5, 6});
    for (const Index i : input_idx(k - 1)) { d.deps.push_back(i); }
    d.stage = static_cast<int>(k);
    d.eval = [p, dt](const VectorXd & z, VectorXd & f, MatrixXd * J) {
      const PlantState x = z.head<kStateDim>();
      const ControlInput u = z.tail<kInputDim>();
      if (!J) {
        f = integrate_step(x, u, dt, p);
        return;
      }
      StateJacobian A;
      InputJacobian B;
      f = integrate_step_with_jacobian(x, u, dt, p, A, B);
      J->resize(kStateDim, kStateDim + kInputDim);
      J->leftCols<kStateDim>() = A;
      J->rightCols<kInputDim>() = B;
    };
    pr.defects.push_back(std::move(d));

    pr.lower_bounds(L.state_offset(k) + kVel) = p.v_min;
    pr.upper_bounds(L.state_offset(k) + kVel) = p.v_max;
    pr.lower_bounds(L.state_offset(k) + kOmega) = p.w_min;
    pr.upper_bounds(L.state_offset(k) + kOmega) = p.w_max;
  }

  MatrixXd wheel(2, 2);
  wheel << 1.0, -0.5 * p.dy_dw, 1.0, 0.5 * p.dy_dw;
  for (Index k = 0; k + 1 < N; ++k) {
    pr.inequalities.push_back({fmt::format("wheel_accel[{}]", k), input_idx(k), wheel, VectorXd::Constant(2, p.a_min),
                               VectorXd::Constant(2, p.a_max), static_cast<int>(k)});
  }
  return pr;
}

FilteredCommand path_filter(
  double v_cmd, double w_cmd, const CasterEstimate & est, const RobotParams & p, const PathFilterOptions & opts)
{
  double worst = 0.0;
  const int n_sides = opts.mode == FilterMode::OneWheel ? 1 : 2;
  for (int s = 0; s < n_sides; ++s) {
    const WheelSide side = kSides[s];
    const auto ss = caster_steady_yaw(v_cmd, w_cmd, side, p);
    if (!ss) { continue; }
    const double e = std::abs(wrap_angle(*ss - est.xi(s)));
    const double roll = caster_roll_rate(v_cmd, w_cmd, est.xi(s), side, p);
    if (roll < opts.gdot_lo && e > opts.e_hi) { worst = std::max(worst, e); }
  }
  if (worst == 0.0) { return {v_cmd, w_cmd, false}; }
  const double dir = v_cmd < 0.0 ? -1.0 : 1.0;
  return {dir * std::max(std::abs(v_cmd), opts.v_creep), w_cmd * opts.e_hi / worst, true};
}

double actuator_violation(const PlantState & x, const ControlInput & u, double dt, const RobotParams & p)
{
  const double v1 = x(kVel) + dt * u(0), w1 = x(kOmega) + dt * u(1);
  const double aL = u(0) - 0.5 * p.dy_dw * u(1), aR = u(0) + 0.5 * p.dy_dw * u(1);
  return std::max({0.0, p.v_min - v1, v1 - p.v_max, p.w_min - w1, w1 - p.w_max, p.a_min - aL, aL - p.a_max,
                   p.a_min - aR, aR - p.a_max});
}

PlanResult plan_step(
  PlannerKind kind, const PlantState & x0, const CasterEstimate & est, const ReferenceTrajectory & ref, double t0,
  const PlannerConfig & cfg, const PlannerWeights & w, const RobotParams & p, const nlp::Solution * warm)
{
  PlannerWeights weights = w;
  if (kind != PlannerKind::Aware) { weights.q_cw.setZero(); }
  const bool caster_term = (weights.q_cw.array() > 0.0).any();

  PlantState start = x0;
  if (caster_term) {
    start(kPhiL) = est.xi(0);
    start(kPhiR) = est.xi(1);
  }
  const Eigen::Vector2d gdot = caster_term ? est.gamma_dot : Eigen::Vector2d::Zero();
  const nlp::NlpProblem pr = build_nlp(start, ref, t0, cfg.horizon, weights, p, cfg.roll_model, gdot);
  const nlp::StageLayout & L = *pr.layout;

  Eigen::VectorXd guess;
  if (warm && warm->layout == pr.layout && warm->variables.size() == pr.n_vars
      && warm->status != nlp::SolveStatus::NumericalFailure) {
    guess = nlp::warm_start(*warm, 1);
    guess.head<kStateDim>() = start;
  } else {
    // zero-input rollout satisfies every defect
    guess = Eigen::VectorXd::Zero(pr.n_vars);
    PlantState x = start;
    guess.head<kStateDim>() = x;
    for (Eigen::Index k = 1; k < L.stages; ++k) {
      x = integrate_step(x, ControlInput::Zero().eval(), cfg.horizon.dt(), p);
      guess.segment<kStateDim>(L.state_offset(k)) = x;
    }
  }

  PlanResult res;
  res.solution = nlp::minimize(pr, guess, cfg.solver);
  if (res.solution.status == nlp::SolveStatus::NumericalFailure) { return res; }
  const Eigen::VectorXd & y = res.solution.variables;
  res.input = y.segment<kInputDim>(L.input_offset(0));
  if (kind != PlannerKind::PathFilter) { return res; }

  const double dt = cfg.horizon.dt();
  const double v_cmd = y(L.state_offset(1) + kVel), w_cmd = y(L.state_offset(1) + kOmega);
  const FilteredCommand f = path_filter(v_cmd, w_cmd, est, p, cfg.filter);
  res.filtered = f.active;
  if (!f.active) { return res; }

  // per-wheel accelerations, clamped to the wheel and velocity bounds
  const double half = 0.5 * p.dy_dw;
  const double a = (f.v - x0(kVel)) / dt, alpha = (f.w - x0(kOmega)) / dt;
  const double aL = a - half * alpha, aR = a + half * alpha;
  double cL = std::clamp(aL, p.a_min, p.a_max), cR = std::clamp(aR, p.a_min, p.a_max);
  ControlInput u(0.5 * (cL + cR), (cR - cL) / p.dy_dw);
  const double v_next = std::clamp(x0(kVel) + dt * u(0), p.v_min, p.v_max);
  const double w_next = std::clamp(x0(kOmega) + dt * u(1), p.w_min, p.w_max);
  u << (v_next - x0(kVel)) / dt, (w_next - x0(kOmega)) / dt;
  res.clamped = std::abs(u(0) - a) > 1e-9 || std::abs(u(1) - alpha) > 1e-9;
  res.input = u;
  return res;
}

}  // namespace caster

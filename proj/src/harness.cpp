#include "caster/harness.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

namespace caster {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kSampleDt = 0.05;
constexpr double kAuditTolerance = 1e-6;
constexpr double kProfileFraction = 0.8;
/// Simulated time after the reference ends. Long enough to settle; a parked robot scores nothing useful.
constexpr double kSettleMargin = 2.0;

/// Rest-to-rest trapezoidal profile over `dist` (triangular when the cruise speed is not reached).
class Trapezoid
{
public:
  Trapezoid(double dist, double v_peak, double acc) : dist_(dist), acc_(acc)
  {
    v_ = std::min(v_peak, std::sqrt(dist * acc));
    t_acc_ = v_ / acc;
    t_cruise_ = (dist - v_ * t_acc_) / v_;
  }

  double duration() const { return 2.0 * t_acc_ + t_cruise_; }

  double position(double t) const
  {
    if (t <= 0.0) { return 0.0; }
    if (t < t_acc_) { return 0.5 * acc_ * t * t; }
    const double s1 = 0.5 * v_ * t_acc_;
    if (t < t_acc_ + t_cruise_) { return s1 + v_ * (t - t_acc_); }
    if (t < duration()) {
      const double r = duration() - t;
      return dist_ - 0.5 * acc_ * r * r;
    }
    return dist_;
  }

private:
  double dist_, acc_, v_{0.0}, t_acc_{0.0}, t_cruise_{0.0};
};

class ReferenceBuilder
{
public:
  void translate(double dist, double v_peak, double acc)
  {
    const Trapezoid prof(dist, v_peak, acc);
    const double c = std::cos(theta_), s = std::sin(theta_);
    const double x0 = x_, y0 = y_;
    append(prof.duration(), [&](double tau) {
      const double d = prof.position(tau);
      return ReferenceSample{0.0, x0 + c * d, y0 + s * d, theta_};
    });
    x_ = x0 + c * dist;
    y_ = y0 + s * dist;
  }

  void rotate(double angle, double w_peak, double alpha)
  {
    const Trapezoid prof(std::abs(angle), w_peak, alpha);
    const double th0 = theta_, dir = angle < 0.0 ? -1.0 : 1.0;
    append(prof.duration(), [&](double tau) { return ReferenceSample{0.0, x_, y_, th0 + dir * prof.position(tau)}; });
    theta_ = th0 + angle;
  }

  ReferenceTrajectory build() const { return ReferenceTrajectory(samples_); }

private:
  template<typename F>
  void append(double duration, F pose)
  {
    if (samples_.empty()) { samples_.push_back({0.0, x_, y_, theta_}); }
    const double t0 = samples_.back().t;
    const int n = std::max(1, static_cast<int>(std::ceil(duration / kSampleDt - 1e-9)));
    for (int i = 1; i <= n; ++i) {
      const double tau = std::min(duration, i * kSampleDt);
      ReferenceSample s = pose(tau);
      s.t = t0 + tau;
      samples_.push_back(s);
    }
  }

  std::vector<ReferenceSample> samples_;
  double x_{0.0}, y_{0.0}, theta_{0.0};
};

double linear_accel_limit(const RobotParams & p) { return kProfileFraction * std::min(p.a_max, -p.a_min); }
double angular_accel_limit(const RobotParams & p) { return kProfileFraction * std::min(p.a_max, -p.a_min) * 2.0 / p.dy_dw; }
double angular_speed_limit(const RobotParams & p) { return kProfileFraction * std::min(p.w_max, -p.w_min); }

}  // namespace

Scenario scenario_hairpin_line(const RobotParams & p, double length_m, double cruise_speed)
{
  p.validate();
  if (!(length_m > 0.0)) { throw std::invalid_argument("scenario_hairpin_line: length must be positive"); }
  if (!(cruise_speed > 0.0) || cruise_speed > std::min(p.v_max, -p.v_min)) {
    throw std::invalid_argument(fmt::format("scenario_hairpin_line: cruise speed {} infeasible for the velocity bounds", cruise_speed));
  }
  ReferenceBuilder b;
  const double v_peak = std::min(cruise_speed, kProfileFraction * std::min(p.v_max, -p.v_min));
  b.translate(length_m, v_peak, linear_accel_limit(p));
  b.rotate(-kPi, angular_speed_limit(p), angular_accel_limit(p));
  b.translate(length_m, v_peak, linear_accel_limit(p));
  b.rotate(kPi, angular_speed_limit(p), angular_accel_limit(p));

  Scenario sc;
  sc.name = "hairpin";
  sc.reference = b.build();
  sc.duration = sc.reference.end_time() + kSettleMargin;
  return sc;
}

Scenario scenario_rotation_on_spot(const RobotParams & p, double angle)
{
  p.validate();
  if (!(std::abs(angle) > 0.0) || !std::isfinite(angle)) {
    throw std::invalid_argument("scenario_rotation_on_spot: angle must be non-zero");
  }
  ReferenceBuilder b;
  b.rotate(angle, angular_speed_limit(p), angular_accel_limit(p));
  Scenario sc;
  sc.name = "rotation";
  sc.reference = b.build();
  sc.duration = sc.reference.end_time() + kSettleMargin;
  return sc;
}

Scenario scenario_straight_line(const RobotParams & p, double length_m, double speed)
{
  p.validate();
  if (!(length_m > 0.0)) { throw std::invalid_argument("scenario_straight_line: length must be positive"); }
  if (!(speed > 0.0) || speed > p.v_max) {
    throw std::invalid_argument(fmt::format("scenario_straight_line: speed {} infeasible for the velocity bounds", speed));
  }
  std::vector<ReferenceSample> s;
  const double T = length_m / speed;
  const int n = static_cast<int>(std::ceil(T / kSampleDt - 1e-9));
  for (int i = 0; i <= n; ++i) {
    const double t = std::min(T, i * kSampleDt);
    s.push_back({t, speed * t, 0.0, 0.0});
  }
  Scenario sc;
  sc.name = "straight";
  sc.reference = ReferenceTrajectory(std::move(s));
  sc.initial_state(kVel) = speed;
  sc.duration = T;
  return sc;
}

std::optional<Scenario> make_scenario(std::string_view name, const RobotParams & p)
{
  if (name == "hairpin") { return scenario_hairpin_line(p); }
  if (name == "rotation") { return scenario_rotation_on_spot(p); }
  if (name == "straight") { return scenario_straight_line(p); }
  return std::nullopt;
}

void NoiseConfig::validate() const
{
  if (!std::isfinite(v_amplitude) || v_amplitude < 0.0) { throw std::invalid_argument("noise.v_amplitude: must be >= 0"); }
  if (!std::isfinite(w_amplitude) || w_amplitude < 0.0) { throw std::invalid_argument("noise.w_amplitude: must be >= 0"); }
}

namespace {

Eigen::Vector2d roll_gap(const PlantState & x, const RobotParams & p)
{
  Eigen::Vector2d g;
  for (int s = 0; s < 2; ++s) {
    const WheelSide side = s == 0 ? WheelSide::Left : WheelSide::Right;
    g(s) = caster_roll_rate(x(kVel), x(kOmega), x(kPhiL + s), side, p) - smoothed_steady_roll(x(kVel), x(kOmega), side, p);
  }
  return g;
}

Eigen::Vector2d misalignment(const PlantState & x, const RobotParams & p)
{
  const auto l = caster_steady_yaw(x(kVel), x(kOmega), WheelSide::Left, p);
  const auto r = caster_steady_yaw(x(kVel), x(kOmega), WheelSide::Right, p);
  if (!l || !r) { return {kNaN, kNaN}; }
  return {wrap_angle(x(kPhiL) - *l), wrap_angle(x(kPhiR) - *r)};
}

}  // namespace

SimLog run_closed_loop(
  const Scenario & scenario, PlannerKind kind, const PlannerConfig & cfg, const PlannerWeights & w,
  const RobotParams & p, const NoiseConfig & noise, std::uint64_t seed)
{
  p.validate();
  w.validate();
  noise.validate();
  cfg.horizon.validate();
  cfg.filter.validate();
  if (!scenario.initial_state.allFinite()) { throw std::invalid_argument("run_closed_loop: non-finite initial state"); }

  const double dt = cfg.horizon.dt();
  SimLog log;
  log.scenario = scenario.name;
  log.planner = kind;
  log.seed = seed;
  log.dt = dt;

  const auto K = static_cast<long>(std::lround(scenario.duration / dt));
  PlantState x = scenario.initial_state;
  CasterEstimate est;

  if (scenario.reference.empty() || K <= 0) {
    log.rows.push_back({0.0, x, ControlInput::Zero(), est, std::nullopt, 0, roll_gap(x, p), misalignment(x, p)});
    return log;
  }
  const double uncovered = std::max(0.0, scenario.reference.start_time() + scenario.duration - scenario.reference.end_time());
  const ReferenceTrajectory ref = scenario.reference.extended_by_hold(uncovered + cfg.horizon.horizon_T + dt);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const auto measure = [&](double t) {
    // draw both even when an amplitude is zero so the stream does not depend on the config
    const double nv = unit(rng), nw = unit(rng);
    return VelocityMeasurement{x(kVel) + noise.v_amplitude * nv, x(kOmega) + noise.w_amplitude * nw, t};
  };

  std::optional<nlp::Solution> warm;
  log.rows.reserve(static_cast<std::size_t>(K) + 1);
  for (long i = 0; i < K; ++i) {
    const double t = static_cast<double>(i) * dt;
    const VelocityMeasurement meas = measure(t);
    if (i == 0) {
      est.xi << x(kPhiL) + scenario.estimator_mismatch, x(kPhiR) + scenario.estimator_mismatch;
      est.gamma_dot = estimate_roll_speeds(est.xi, meas, p);
      est.t = t;
    } else {
      est = estimator_step(est, meas, p);
    }

    // the planner sees the plant state; measurement noise reaches it through the caster estimate
    const PlantState & x_plan = x;
    PlanResult plan = plan_step(kind, x_plan, est, ref, ref.start_time() + t, cfg, w, p, warm ? &*warm : nullptr);

    ControlInput u = plan.input;
    if (plan.solution.status == nlp::SolveStatus::NumericalFailure) {
      u.setZero();
      ++log.solver_failures;
      warm.reset();
    } else {
      warm = std::move(plan.solution);
    }
    if (actuator_violation(x_plan, u, dt, p) > kAuditTolerance) { ++log.constraint_violations; }
    if (plan.clamped) { ++log.clamp_events; }

    SimRow row{t, x, u, est, warm ? warm->status : nlp::SolveStatus::NumericalFailure,
               warm ? warm->iterations : 0, roll_gap(x, p), misalignment(x, p), plan.filtered, plan.clamped};
    log.rows.push_back(std::move(row));
    x = integrate_step(x, u, dt, p);
  }
  log.rows.push_back({static_cast<double>(K) * dt, x, ControlInput::Zero(), est, std::nullopt, 0, roll_gap(x, p),
                      misalignment(x, p)});
  return log;
}

std::string simlog_filename(const SimLog & log)
{
  return fmt::format("{}_{}_{}.csv", log.scenario, to_string(log.planner), log.seed);
}

void write_simlog_csv(std::ostream & os, const SimLog & log)
{
  os << "t,x,y,theta,v,omega,phi_L,phi_R,a,alpha,phi_L_hat,phi_R_hat,gdot_L_hat,gdot_R_hat,status,iterations,"
        "dgamma_L,dgamma_R,misalign_L,misalign_R,filtered,clamped\n";
  const auto opt = [](double v) { return std::isfinite(v) ? fmt::format("{}", v) : std::string(); };
  for (const auto & r : log.rows) {
    fmt::print(os, "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.t, r.x(0), r.x(1), r.x(2), r.x(3),
               r.x(4), r.x(5), r.x(6), r.u(0), r.u(1), r.est.xi(0), r.est.xi(1), r.est.gamma_dot(0), r.est.gamma_dot(1),
               r.status ? nlp::to_string(*r.status) : "none", r.iterations, r.dgamma(0), r.dgamma(1),
               opt(r.misalignment(0)), opt(r.misalignment(1)), int(r.filtered), int(r.clamped));
  }
}

namespace {

double point_segment_distance(const Eigen::Vector2d & q, const Eigen::Vector2d & a, const Eigen::Vector2d & b)
{
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) { return (q - a).norm(); }
  const double s = std::clamp((q - a).dot(ab) / len2, 0.0, 1.0);
  return (q - (a + s * ab)).norm();
}

}  // namespace

double rmse_tracking(const SimLog & log, const ReferenceTrajectory & ref)
{
  if (log.rows.empty()) { throw std::invalid_argument("rmse_tracking: empty log"); }
  if (ref.empty()) { throw std::invalid_argument("rmse_tracking: empty reference"); }
  // polyline vertices with consecutive duplicates removed
  std::vector<Eigen::Vector2d> poly;
  for (const auto & s : ref.samples()) {
    const Eigen::Vector2d v(s.x, s.y);
    if (poly.empty() || (poly.back() - v).norm() > 0.0) { poly.push_back(v); }
  }
  double sum = 0.0;
  for (const auto & r : log.rows) {
    const Eigen::Vector2d q = r.x.head<2>();
    double d = (q - poly.front()).norm();
    for (std::size_t i = 1; i < poly.size(); ++i) { d = std::min(d, point_segment_distance(q, poly[i - 1], poly[i])); }
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(log.rows.size()));
}

BoreProxy bore_proxy(const SimLog & log, const RobotParams & p)
{
  if (log.rows.empty()) { throw std::invalid_argument("bore_proxy: empty log"); }
  constexpr double gdot_ref = 2.0;
  double sum = 0.0, worst = 0.0;
  std::size_t n = 0;
  for (const auto & r : log.rows) {
    double v = r.x(kVel), w = r.x(kOmega);
    if (v == 0.0 && w == 0.0) {
      v += log.dt * r.u(0);
      w += log.dt * r.u(1);
    }
    for (int s = 0; s < 2; ++s) {
      const WheelSide side = s == 0 ? WheelSide::Left : WheelSide::Right;
      const auto ss = caster_steady_yaw(v, w, side, p);
      double value = 0.0;
      if (ss) {
        const double phi = r.x(kPhiL + s);
        const double gdot = caster_roll_rate(r.x(kVel), r.x(kOmega), phi, side, p);
        value = std::abs(std::sin(wrap_angle(phi - *ss))) * std::exp(-std::abs(gdot) / gdot_ref);
      }
      sum += value;
      worst = std::max(worst, value);
      ++n;
    }
  }
  return {sum / static_cast<double>(n), worst};
}

Metrics compute_metrics(const SimLog & log, const Scenario & scenario, const RobotParams & p)
{
  if (log.rows.empty()) { throw std::invalid_argument("compute_metrics: empty log"); }
  Metrics m;
  for (std::size_t i = 1; i < log.rows.size(); ++i) {
    m.distance_m += (log.rows[i].x.head<2>() - log.rows[i - 1].x.head<2>()).norm();
  }
  m.time_s = log.rows.back().t;
  if (!scenario.reference.empty()) {
    const Eigen::Vector3d goal = scenario.reference.pose_at(scenario.reference.end_time());
    for (std::size_t i = log.rows.size(); i-- > 0;) {
      const PlantState & x = log.rows[i].x;
      const bool settled = (x.head<2>() - goal.head<2>()).norm() <= 0.05 && std::abs(wrap_angle(x(kTheta) - goal(2))) <= 0.1
                           && std::abs(x(kVel)) <= 0.01 && std::abs(x(kOmega)) <= 0.02;
      if (!settled) { break; }
      m.time_s = log.rows[i].t;
    }
    m.rmse_m = rmse_tracking(log, scenario.reference);
  }
  const BoreProxy bp = bore_proxy(log, p);
  m.mean_bore_proxy = bp.mean;
  m.max_bore_proxy = bp.max;
  m.constraint_violations = log.constraint_violations;
  m.clamp_events = log.clamp_events;
  m.flagged = log.flagged();
  return m;
}

nlohmann::json to_json(const Metrics & m)
{
  return {{"time_s", m.time_s},
          {"distance_m", m.distance_m},
          {"rmse_m", m.rmse_m},
          {"mean_bore_proxy", m.mean_bore_proxy},
          {"max_bore_proxy", m.max_bore_proxy},
          {"constraint_violations", m.constraint_violations},
          {"clamp_events", m.clamp_events},
          {"flagged", m.flagged}};
}

namespace {

constexpr PlannerKind kTableOrder[3] = {PlannerKind::Agnostic, PlannerKind::PathFilter, PlannerKind::Aware};

MetricSummary summarize(const std::vector<Metrics> & runs, double Metrics::*field)
{
  MetricSummary s;
  for (const auto & r : runs) { s.mean += r.*field; }
  s.mean /= static_cast<double>(runs.size());
  for (const auto & r : runs) { s.max_deviation = std::max(s.max_deviation, std::abs(r.*field - s.mean)); }
  return s;
}

}  // namespace

Comparison compare_planners(
  const Scenario & scenario, const PlannerConfig & cfg, const PlannerWeights & w, const RobotParams & p,
  const NoiseConfig & noise, int repetitions, std::uint64_t base_seed, unsigned threads)
{
  if (repetitions < 1) { throw std::invalid_argument("compare_planners: repetitions must be >= 1"); }
  const std::size_t n_runs = 3 * static_cast<std::size_t>(repetitions);
  std::vector<SimLog> logs(n_runs);

  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    for (std::size_t job = next++; job < n_runs; job = next++) {
      const PlannerKind kind = kTableOrder[job / static_cast<std::size_t>(repetitions)];
      const std::uint64_t seed = base_seed + job % static_cast<std::size_t>(repetitions);
      logs[job] = run_closed_loop(scenario, kind, cfg, w, p, noise, seed);
    }
  };
  if (threads == 0) { threads = std::max(1u, std::thread::hardware_concurrency()); }
  threads = std::min<unsigned>(threads, static_cast<unsigned>(n_runs));
  std::vector<std::future<void>> pool;
  for (unsigned i = 1; i < threads; ++i) { pool.push_back(std::async(std::launch::async, worker)); }
  worker();
  for (auto & f : pool) { f.get(); }

  Comparison c;
  c.scenario = scenario.name;
  c.repetitions = repetitions;
  c.base_seed = base_seed;
  for (std::size_t k = 0; k < 3; ++k) {
    PlannerSummary s;
    s.kind = kTableOrder[k];
    for (int r = 0; r < repetitions; ++r) {
      const SimLog & log = logs[k * static_cast<std::size_t>(repetitions) + static_cast<std::size_t>(r)];
      s.runs.push_back(compute_metrics(log, scenario, p));
      s.constraint_violations += s.runs.back().constraint_violations;
      s.clamp_events += s.runs.back().clamp_events;
      s.flagged_runs += s.runs.back().flagged ? 1 : 0;
    }
    s.time_s = summarize(s.runs, &Metrics::time_s);
    s.distance_m = summarize(s.runs, &Metrics::distance_m);
    s.rmse_m = summarize(s.runs, &Metrics::rmse_m);
    s.mean_bore_proxy = summarize(s.runs, &Metrics::mean_bore_proxy);
    s.max_bore_proxy = summarize(s.runs, &Metrics::max_bore_proxy);
    c.planners.push_back(std::move(s));
  }
  c.logs = std::move(logs);
  return c;
}

nlohmann::json to_json(const Comparison & c)
{
  nlohmann::json j;
  j["scenario"] = c.scenario;
  j["repetitions"] = c.repetitions;
  j["base_seed"] = c.base_seed;
  const auto summary = [](const MetricSummary & m) { return nlohmann::json{{"mean", m.mean}, {"max_deviation", m.max_deviation}}; };
  nlohmann::json planners = nlohmann::json::array();
  for (const auto & s : c.planners) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto & r : s.runs) { runs.push_back(to_json(r)); }
    planners.push_back({{"planner", to_string(s.kind)},
                        {"time_s", summary(s.time_s)},
                        {"distance_m", summary(s.distance_m)},
                        {"rmse_m", summary(s.rmse_m)},
                        {"mean_bore_proxy", summary(s.mean_bore_proxy)},
                        {"max_bore_proxy", summary(s.max_bore_proxy)},
                        {"constraint_violations", s.constraint_violations},
                        {"clamp_events", s.clamp_events},
                        {"flagged_runs", s.flagged_runs},
                        {"runs", runs}});
  }
  j["planners"] = planners;
  return j;
}

void write_comparison_table(std::ostream & os, const Comparison & c)
{
  constexpr int label_width = 22, col_width = 22;
  fmt::print(os, "scenario: {}  repetitions: {}  base seed: {}\n", c.scenario, c.repetitions, c.base_seed);
  fmt::print(os, "{:<{}}", "Planner", label_width);
  for (const auto & s : c.planners) { fmt::print(os, "{:>{}}", to_string(s.kind), col_width); }
  os << '\n';

  const auto row = [&](const char * label, MetricSummary PlannerSummary::*field, int precision) {
    fmt::print(os, "{:<{}}", label, label_width);
    for (const auto & s : c.planners) {
      const MetricSummary & m = s.*field;
      fmt::print(os, "{:>{}}", fmt::format("{:.{}f} ± {:.{}f}", m.mean, precision, m.max_deviation, precision), col_width);
    }
    os << '\n';
  };
  row("Time [s]", &PlannerSummary::time_s, 2);
  row("Distance [m]", &PlannerSummary::distance_m, 3);
  row("RMSE [m]", &PlannerSummary::rmse_m, 4);
  row("Mean bore proxy [-]", &PlannerSummary::mean_bore_proxy, 4);
  row("Max bore proxy [-]", &PlannerSummary::max_bore_proxy, 4);

  const auto count = [&](const char * label, int PlannerSummary::*field) {
    fmt::print(os, "{:<{}}", label, label_width);
    for (const auto & s : c.planners) { fmt::print(os, "{:>{}}", s.*field, col_width); }
    os << '\n';
  };
  count("Clamp events", &PlannerSummary::clamp_events);
  count("Constraint violations", &PlannerSummary::constraint_violations);
  count("Flagged runs", &PlannerSummary::flagged_runs);
}

void write_envelope_csv(std::ostream & os, const std::vector<const SimLog *> & runs)
{
  os << "t,x_min,x_max,y_min,y_max\n";
  if (runs.empty()) { return; }
  std::size_t n = runs.front()->rows.size();
  for (const auto * r : runs) { n = std::min(n, r->rows.size()); }
  for (std::size_t i = 0; i < n; ++i) {
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo, y_lo = x_lo, y_hi = -x_lo;
    for (const auto * r : runs) {
      const PlantState & x = r->rows[i].x;
      x_lo = std::min(x_lo, x(kPosX));
      x_hi = std::max(x_hi, x(kPosX));
      y_lo = std::min(y_lo, x(kPosY));
      y_hi = std::max(y_hi, x(kPosY));
    }
    fmt::print(os, "{},{},{},{},{}\n", runs.front()->rows[i].t, x_lo, x_hi, y_lo, y_hi);
  }
}

}  // namespace caster

#include "caster/estimator.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <charconv>
#include <istream>
#include <ostream>
#include <string>

namespace caster {

namespace {

Eigen::Vector2d observer_rhs(const Eigen::Vector2d & xi, double V, double Omega, const RobotParams & p)
{
  return Eigen::Vector2d(
    caster_yaw_rate(V, Omega, xi(0), WheelSide::Left, p), caster_yaw_rate(V, Omega, xi(1), WheelSide::Right, p));
}

}  // namespace

Eigen::Vector2d estimate_roll_speeds(const Eigen::Vector2d & xi, const VelocityMeasurement & meas, const RobotParams & p)
{
  return Eigen::Vector2d(
    caster_roll_rate(meas.V, meas.Omega, xi(0), WheelSide::Left, p),
    caster_roll_rate(meas.V, meas.Omega, xi(1), WheelSide::Right, p));
}

CasterEstimate init_estimate(const VelocityMeasurement & meas, const RobotParams & p)
{
  CasterEstimate est;
  est.t = meas.t;
  const auto left = caster_steady_yaw(meas.V, meas.Omega, WheelSide::Left, p);
  const auto right = caster_steady_yaw(meas.V, meas.Omega, WheelSide::Right, p);
  if (left && right) { est.xi << *left, *right; }
  est.gamma_dot = estimate_roll_speeds(est.xi, meas, p);
  return est;
}

CasterEstimate estimator_step(const CasterEstimate & est, const VelocityMeasurement & meas, const RobotParams & p)
{
  if (!(meas.t > est.t)) {
    throw std::invalid_argument(fmt::format("estimator_step: timestamp {} does not follow {}", meas.t, est.t));
  }
  const double dt = meas.t - est.t;
  const Eigen::Vector2d & xi = est.xi;

  const Eigen::Vector2d k1 = observer_rhs(xi, meas.V, meas.Omega, p);
  const Eigen::Vector2d k2 = observer_rhs(xi + (0.5 * dt) * k1, meas.V, meas.Omega, p);
  const Eigen::Vector2d k3 = observer_rhs(xi + (0.5 * dt) * k2, meas.V, meas.Omega, p);
  const Eigen::Vector2d k4 = observer_rhs(xi + dt * k3, meas.V, meas.Omega, p);

  CasterEstimate next;
  next.xi = xi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  next.gamma_dot = estimate_roll_speeds(next.xi, meas, p);
  next.t = meas.t;
  return next;
}

std::optional<Eigen::Vector2d> lyapunov_value(
  const Eigen::Vector2d & xi, const VelocityMeasurement & meas, const RobotParams & p)
{
  const auto left = caster_steady_yaw(meas.V, meas.Omega, WheelSide::Left, p);
  const auto right = caster_steady_yaw(meas.V, meas.Omega, WheelSide::Right, p);
  if (!left || !right) { return std::nullopt; }
  const double eL = wrap_angle(xi(0) - *left);
  const double eR = wrap_angle(xi(1) - *right);
  return Eigen::Vector2d(0.5 * eL * eL, 0.5 * eR * eR);
}

StreamParseError::StreamParseError(std::size_t line_no, const std::string & what)
    : std::runtime_error(fmt::format("line {}: {}", line_no, what)), line(line_no)
{}

namespace {

bool parse_double(std::string_view field, double & out)
{
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) { field.remove_prefix(1); }
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
    field.remove_suffix(1);
  }
  if (field.empty()) { return false; }
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size() && std::isfinite(out);
}

}  // namespace

std::vector<VelocityMeasurement> read_velocity_stream(std::istream & is)
{
  std::vector<VelocityMeasurement> stream;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") { continue; }
    if (line_no == 1 && line.rfind("t,", 0) == 0) { continue; }

    double values[3];
    std::string_view rest(line);
    for (int i = 0; i < 3; ++i) {
      const auto comma = rest.find(',');
      const bool last = i == 2;
      if (last != (comma == std::string_view::npos)) { throw StreamParseError(line_no, "expected 3 fields t,V,Omega"); }
      if (!parse_double(rest.substr(0, comma), values[i])) { throw StreamParseError(line_no, "malformed number"); }
      if (!last) { rest.remove_prefix(comma + 1); }
    }
    if (!stream.empty() && !(values[0] > stream.back().t)) {
      throw StreamParseError(line_no, "timestamps must be strictly increasing");
    }
    stream.push_back({values[1], values[2], values[0]});
  }
  return stream;
}

std::vector<CasterEstimate> replay_estimator(const std::vector<VelocityMeasurement> & stream, const RobotParams & p)
{
  std::vector<CasterEstimate> out;
  if (stream.empty()) { return out; }
  out.reserve(stream.size());
  out.push_back(init_estimate(stream.front(), p));
  for (std::size_t i = 1; i < stream.size(); ++i) { out.push_back(estimator_step(out.back(), stream[i], p)); }
  return out;
}

void write_estimate_csv(std::ostream & os, const std::vector<CasterEstimate> & estimates)
{
  os << "t,phi_L_hat,phi_R_hat,gdot_L_hat,gdot_R_hat\n";
  for (const auto & e : estimates) {
    fmt::print(os, "{},{},{},{},{}\n", e.t, e.xi(0), e.xi(1), e.gamma_dot(0), e.gamma_dot(1));
  }
}

}  // namespace caster

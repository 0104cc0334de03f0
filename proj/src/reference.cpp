#include "caster/reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "caster/robot_model.hpp"

namespace caster {

ReferenceTrajectory::ReferenceTrajectory(std::vector<ReferenceSample> samples) : samples_(std::move(samples))
{
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto & s = samples_[i];
    if (!std::isfinite(s.t) || !std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.theta)) {
      throw std::invalid_argument("ReferenceTrajectory: non-finite sample");
    }
    if (i > 0 && !(s.t > samples_[i - 1].t)) {
      throw std::invalid_argument("ReferenceTrajectory: timestamps must be strictly increasing");
    }
  }
}

double ReferenceTrajectory::start_time() const
{
  if (samples_.empty()) { throw std::logic_error("ReferenceTrajectory: empty"); }
  return samples_.front().t;
}

double ReferenceTrajectory::end_time() const
{
  if (samples_.empty()) { throw std::logic_error("ReferenceTrajectory: empty"); }
  return samples_.back().t;
}

Eigen::Vector3d ReferenceTrajectory::pose_at(double t) const
{
  if (samples_.empty()) { throw std::logic_error("ReferenceTrajectory: empty"); }
  if (t <= samples_.front().t) { return {samples_.front().x, samples_.front().y, samples_.front().theta}; }
  if (t >= samples_.back().t) { return {samples_.back().x, samples_.back().y, samples_.back().theta}; }
  const auto hi = std::upper_bound(
    samples_.begin(), samples_.end(), t, [](double value, const ReferenceSample & s) { return value < s.t; });
  const auto & b = *hi;
  const auto & a = *(hi - 1);
  const double s = (t - a.t) / (b.t - a.t);
  return {a.x + s * (b.x - a.x), a.y + s * (b.y - a.y), a.theta + s * wrap_angle(b.theta - a.theta)};
}

ReferenceTrajectory ReferenceTrajectory::extended_by_hold(double extra) const
{
  if (!(extra > 0.0)) { throw std::invalid_argument("extended_by_hold: extra must be positive"); }
  std::vector<ReferenceSample> out = samples_;
  if (out.empty()) { out.push_back({0.0, 0.0, 0.0, 0.0}); }
  ReferenceSample last = out.back();
  last.t += extra;
  out.push_back(last);
  return ReferenceTrajectory(std::move(out));
}

}  // namespace caster

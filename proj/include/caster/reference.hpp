#ifndef CASTER_REFERENCE_HPP_
#define CASTER_REFERENCE_HPP_

#include <Eigen/Core>

#include <vector>

namespace caster {

struct ReferenceSample
{
  double t;
  double x;
  double y;
  double theta;  ///< continuous (unwrapped) along the trajectory
};

/// Time-parameterized pose reference with linear interpolation between samples.
class ReferenceTrajectory
{
public:
  ReferenceTrajectory() = default;
  /// Throws std::invalid_argument unless timestamps strictly increase and entries are finite.
  explicit ReferenceTrajectory(std::vector<ReferenceSample> samples);

  const std::vector<ReferenceSample> & samples() const { return samples_; }
  bool empty() const { return samples_.empty(); }
  double start_time() const;
  double end_time() const;

  /// [x, y, theta] at t; the heading takes the short way round between samples. Clamped to the end samples.
  Eigen::Vector3d pose_at(double t) const;

  /// Appends a sample holding the final pose `extra` seconds after the end.
  ReferenceTrajectory extended_by_hold(double extra) const;

private:
  std::vector<ReferenceSample> samples_;
};

}  // namespace caster

#endif  // CASTER_REFERENCE_HPP_

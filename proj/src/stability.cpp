#include "caster/stability.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <ostream>

namespace caster {

std::vector<EigenvalueGridRow> eigenvalue_grid(
  Range v_range, Range w_range, int resolution, const RobotParams & p, WheelSide side)
{
  if (!(v_range.lo < v_range.hi)) { throw std::invalid_argument("eigenvalue_grid: empty v range"); }
  if (!(w_range.lo < w_range.hi)) { throw std::invalid_argument("eigenvalue_grid: empty w range"); }
  if (resolution < 2) { throw std::invalid_argument("eigenvalue_grid: resolution must be >= 2"); }

  // exact endpoints; a range symmetric about zero yields exactly mirrored samples
  const auto sample = [resolution](Range r, int i) {
    const double n = resolution - 1;
    return ((n - i) * r.lo + i * r.hi) / n;
  };

  std::vector<EigenvalueGridRow> rows;
  rows.reserve(static_cast<std::size_t>(resolution) * resolution);
  for (int i = 0; i < resolution; ++i) {
    const double v = sample(v_range, i);
    for (int j = 0; j < resolution; ++j) {
      const double w = sample(w_range, j);
      const auto phi_ss = caster_steady_yaw(v, w, side, p);
      if (!phi_ss) {
        rows.push_back({v, w, 0.0, 0.0});
        continue;
      }
      rows.push_back({
        v,
        w,
        caster_linearization_eigenvalue(v, w, *phi_ss, p, side),
        caster_linearization_eigenvalue(v, w, *phi_ss + std::numbers::pi, p, side),
      });
    }
  }
  return rows;
}

void write_eigenvalue_grid_csv(std::ostream & os, const std::vector<EigenvalueGridRow> & rows)
{
  os << "v,w,lambda_stable,lambda_unstable\n";
  for (const auto & r : rows) { fmt::print(os, "{},{},{},{}\n", r.v, r.w, r.lambda_stable, r.lambda_unstable); }
}

}  // namespace caster

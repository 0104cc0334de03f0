#ifndef CASTER_STABILITY_HPP_
#define CASTER_STABILITY_HPP_

#include <iosfwd>
#include <vector>

#include "caster/robot_model.hpp"

namespace caster {

struct Range
{
  double lo;
  double hi;
};

struct EigenvalueGridRow
{
  double v;
  double w;
  double lambda_stable;    ///< eigenvalue at the stable equilibrium phi_ss
  double lambda_unstable;  ///< eigenvalue at phi_ss + pi
};

/**
 * @brief Linearized caster yaw eigenvalues over a resolution x resolution velocity grid.
 *
 * Rows are ordered v-major. At (0, 0) both eigenvalues are zero (marginal).
 * Throws std::invalid_argument for an empty range or resolution < 2.
 */
std::vector<EigenvalueGridRow> eigenvalue_grid(
  Range v_range, Range w_range, int resolution, const RobotParams & p, WheelSide side = WheelSide::Left);

/// CSV with header `v,w,lambda_stable,lambda_unstable`.
void write_eigenvalue_grid_csv(std::ostream & os, const std::vector<EigenvalueGridRow> & rows);

}  // namespace caster

#endif  // CASTER_STABILITY_HPP_

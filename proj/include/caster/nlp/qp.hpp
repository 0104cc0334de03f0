#ifndef CASTER_NLP_QP_HPP_
#define CASTER_NLP_QP_HPP_

/**
 * @file
 * @brief Dense strictly convex QP solved by the Goldfarb-Idnani dual active-set method.
 *
 * \f[
 *   \min_x \tfrac12 x^T H x + g^T x \quad \text{s.t.} \quad l \leq A x \leq u
 * \f]
 * Rows with \f$ l_i = u_i \f$ are treated as equalities. Infinite bounds are ignored.
 */

#include <Eigen/Core>

namespace caster::nlp {

enum class QpStatus { Optimal, Infeasible, NotConvex, IterationLimit };

struct QpProblem
{
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd A;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct QpResult
{
  QpStatus status{QpStatus::IterationLimit};
  Eigen::VectorXd x;
  /// One per row of A: positive when the lower side is active, negative for the upper side.
  /// Satisfies H x + g = A^T multipliers at the optimum.
  Eigen::VectorXd multipliers;
  int iterations{0};
};

struct QpOptions
{
  double feasibility_tolerance{1e-10};
  int max_iterations{0};  ///< 0 selects 10 * (n + rows)
};

QpResult solve_qp(const QpProblem & qp, const QpOptions & opts = {});

/**
 * @brief Minimal relaxation of the row bounds that makes the QP feasible.
 *
 * Solves min 1/2 |s|^2 + eps/2 x^T H x s.t. l - s <= A x <= u + s, s >= 0, and returns s.
 */
Eigen::VectorXd minimal_bound_relaxation(const QpProblem & qp, const QpOptions & opts = {});

}  // namespace caster::nlp

#endif  // CASTER_NLP_QP_HPP_

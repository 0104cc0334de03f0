#ifndef CASTER_NLP_GRADIENT_CHECK_HPP_
#define CASTER_NLP_GRADIENT_CHECK_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "caster/nlp/problem.hpp"

namespace caster::nlp {

enum class BlockKind { Residual, Defect, Inequality };

const char * to_string(BlockKind kind);

struct BlockGradientError
{
  std::string name;
  BlockKind kind;
  int stage;
  double max_rel_error;  ///< max |a - f| / max(1, |a|, |f|) over Jacobian entries
};

struct GradientReport
{
  std::vector<BlockGradientError> blocks;
  double max_rel_error{0.0};
  double tolerance{0.0};

  bool passed() const { return max_rel_error < tolerance; }
};

/**
 * @brief Compares every block Jacobian at `point` against central differences.
 *
 * The step for variable i is 1e-6 (1 + |x_i|). For defects the compared map is the
 * block function f, whose Jacobian enters the linearized defect y_T - f(y_D).
 */
GradientReport check_gradients(const NlpProblem & problem, const VectorXd & point, double tol);

/// Writes `block,kind,stage,max_rel_error` rows.
void write_gradient_report_csv(std::ostream & os, const GradientReport & report);

}  // namespace caster::nlp

#endif  // CASTER_NLP_GRADIENT_CHECK_HPP_

#ifndef CASTER_NLP_SQP_HPP_
#define CASTER_NLP_SQP_HPP_

/**
 * @file
 * @brief Gauss-Newton SQP with an l1 merit line search.
 *
 * Every iteration linearizes the residuals and defects, eliminates the defect targets by
 * forward substitution and solves the remaining dense QP over the free variables with the
 * dual active-set method. When the linearized inequalities are inconsistent the QP bounds are
 * relaxed by the smallest amount that restores feasibility (elastic mode), so the iterate
 * moves toward minimum constraint violation.
 */

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "caster/nlp/problem.hpp"

namespace caster::nlp {

enum class SolveStatus { Converged, MaxIterations, Infeasible, NumericalFailure };

const char * to_string(SolveStatus status);

struct IterationRecord
{
  int iter;
  double objective;
  double kkt;
  double violation;
  double step_norm;
  double merit_before;  ///< merit at the iterate, evaluated with `penalty`
  double merit_after;   ///< merit at the accepted point, same penalty
  double step_size;
  double penalty;
};

struct LineSearchOptions
{
  double contraction{0.5};
  double sufficient_decrease{1e-4};
  double min_step{1e-10};
};

struct SolverOptions
{
  int max_iterations{100};
  double kkt_tolerance{1e-6};
  double constraint_tolerance{1e-6};
  LineSearchOptions line_search{};
  double regularization_floor{1e-8};
  /// Called once per iteration when set.
  std::function<void(const IterationRecord &)> trace{};

  void validate() const;
};

struct Solution
{
  VectorXd variables;
  double objective{0.0};
  SolveStatus status{SolveStatus::MaxIterations};
  int iterations{0};
  double kkt_residual{0.0};
  double max_constraint_violation{0.0};
  std::string message;  ///< names the offending block on NumericalFailure
  std::optional<StageLayout> layout;
};

/// Deterministic for fixed inputs: no threading, no randomness.
Solution minimize(const NlpProblem & problem, const VectorXd & initial_guess, const SolverOptions & opts = {});

/**
 * @brief Receding-horizon initial guess: every stage moves forward by `shift`.
 *
 * The tail is filled by repeating the terminal state and input. Requires a stage layout and
 * 1 <= shift < N; throws std::invalid_argument otherwise.
 */
VectorXd warm_start(const Solution & previous, Index shift);

/// Writes a trace as CSV `iter,objective,kkt,violation,step_norm`.
class TraceCsvWriter
{
public:
  explicit TraceCsvWriter(std::ostream & os, bool header = true);
  void operator()(const IterationRecord & rec);

private:
  std::ostream * os_;
};

}  // namespace caster::nlp

#endif  // CASTER_NLP_SQP_HPP_

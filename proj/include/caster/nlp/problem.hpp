#ifndef CASTER_NLP_PROBLEM_HPP_
#define CASTER_NLP_PROBLEM_HPP_

/**
 * @file
 * @brief Dense nonlinear least-squares program with explicit defect constraints.
 *
 * \f[
 *   \begin{aligned}
 *   \min_y \quad & \sum_b \| r_b(y_{[b]}) \|^2_{W_b} \\
 *   \text{s.t.} \quad & y_{T_j} = f_j(y_{D_j}) && \text{(defects)} \\
 *   & l_k \leq A_k\, y_{[k]} \leq u_k && \text{(affine inequalities)} \\
 *   & y_{lo} \leq y \leq y_{hi}
 *   \end{aligned}
 * \f]
 *
 * Each defect j determines its target variables \f$ T_j \f$ from its dependencies \f$ D_j \f$.
 * Dependencies must be free variables (targeted by no defect) or targets of earlier defects,
 * so the linearized defects can be eliminated by forward substitution. Multiple-shooting
 * transcriptions have this form with the initial state pinned by a defect without
 * dependencies.
 */

#include <Eigen/Core>

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace caster::nlp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Evaluates a block at the gathered variables; writes the Jacobian when J is non-null.
using BlockFunction = std::function<void(const VectorXd & x, VectorXd & value, MatrixXd * J)>;

struct ResidualBlock
{
  std::string name;
  std::vector<Index> vars;
  VectorXd weights;  ///< diagonal of W_b, non-negative; its size is the residual dimension
  int stage{-1};
  BlockFunction eval;
};

struct DefectBlock
{
  std::string name;
  std::vector<Index> targets;
  std::vector<Index> deps;
  int stage{-1};
  BlockFunction eval;  ///< value has targets.size() entries
};

struct LinearInequality
{
  std::string name;
  std::vector<Index> vars;
  MatrixXd A;
  VectorXd lower;
  VectorXd upper;
  int stage{-1};
};

/// Variable ordering [x_1 .. x_N, u_1 .. u_{N-1}] of a multiple-shooting transcription.
struct StageLayout
{
  Index state_dim{0};
  Index input_dim{0};
  Index stages{0};

  Index n_vars() const { return state_dim * stages + input_dim * (stages - 1); }
  Index state_offset(Index k) const { return k * state_dim; }
  Index input_offset(Index k) const { return state_dim * stages + k * input_dim; }

  bool operator==(const StageLayout &) const = default;
};

struct NlpProblem
{
  Index n_vars{0};
  std::vector<ResidualBlock> residuals;
  std::vector<DefectBlock> defects;
  std::vector<LinearInequality> inequalities;
  VectorXd lower_bounds;  ///< empty means unbounded
  VectorXd upper_bounds;
  std::optional<StageLayout> layout;

  /// Throws std::invalid_argument on inconsistent sizes or a defect ordering that cannot be eliminated.
  void validate() const;

  VectorXd lower() const;
  VectorXd upper() const;
};

/// Gathers y at the given indices.
VectorXd gather(const VectorXd & y, const std::vector<Index> & idx);

/// Weighted sum of squared residuals at y.
double objective(const NlpProblem & problem, const VectorXd & y);

/**
 * @brief Largest violation of any constraint at y (defects, affine rows, bounds).
 *
 * Independent of the solver; used to audit reported solutions.
 */
double max_constraint_violation(const NlpProblem & problem, const VectorXd & y);

}  // namespace caster::nlp

#endif  // CASTER_NLP_PROBLEM_HPP_

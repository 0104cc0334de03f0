#include "caster/nlp/problem.hpp"

#include <fmt/format.h>

#include <cmath>
#include <stdexcept>

namespace caster::nlp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_indices(const std::vector<Index> & idx, Index n, const std::string & block)
{
  for (const Index i : idx) {
    if (i < 0 || i >= n) { throw std::invalid_argument(fmt::format("block '{}': variable index {} out of range", block, i)); }
  }
}

}  // namespace

void NlpProblem::validate() const
{
  if (n_vars <= 0) { throw std::invalid_argument("NlpProblem: n_vars must be positive"); }
  if (lower_bounds.size() != 0 && lower_bounds.size() != n_vars) {
    throw std::invalid_argument("NlpProblem: lower_bounds size mismatch");
  }
  if (upper_bounds.size() != 0 && upper_bounds.size() != n_vars) {
    throw std::invalid_argument("NlpProblem: upper_bounds size mismatch");
  }
  if (layout && layout->n_vars() != n_vars) { throw std::invalid_argument("NlpProblem: layout does not match n_vars"); }

  for (const auto & b : residuals) {
    check_indices(b.vars, n_vars, b.name);
    if (!b.eval) { throw std::invalid_argument(fmt::format("residual '{}': missing function", b.name)); }
    if (b.weights.size() == 0 || !(b.weights.array() >= 0.0).all() || !b.weights.allFinite()) {
      throw std::invalid_argument(fmt::format("residual '{}': weights must be finite and non-negative", b.name));
    }
  }

  // 0 = free, 1 = target of an already processed defect, 2 = target of a later defect
  std::vector<int> state(static_cast<std::size_t>(n_vars), 0);
  for (const auto & d : defects) {
    check_indices(d.targets, n_vars, d.name);
    check_indices(d.deps, n_vars, d.name);
    if (!d.eval) { throw std::invalid_argument(fmt::format("defect '{}': missing function", d.name)); }
    for (const Index t : d.targets) {
      if (state[t] != 0) { throw std::invalid_argument(fmt::format("defect '{}': variable {} targeted twice", d.name, t)); }
      state[t] = 2;
    }
  }
  std::fill(state.begin(), state.end(), 0);
  for (const auto & d : defects) {
    for (const Index t : d.targets) { state[t] = 2; }
  }
  for (const auto & d : defects) {
    for (const Index dep : d.deps) {
      if (state[dep] == 2) {
        throw std::invalid_argument(
          fmt::format("defect '{}': dependency {} is determined by this or a later defect", d.name, dep));
      }
    }
    for (const Index t : d.targets) { state[t] = 1; }
  }

  for (const auto & c : inequalities) {
    check_indices(c.vars, n_vars, c.name);
    if (c.A.cols() != static_cast<Index>(c.vars.size()) || c.A.rows() != c.lower.size() || c.A.rows() != c.upper.size()) {
      throw std::invalid_argument(fmt::format("inequality '{}': inconsistent dimensions", c.name));
    }
  }
}

VectorXd NlpProblem::lower() const
{
  return lower_bounds.size() == 0 ? VectorXd::Constant(n_vars, -kInf) : lower_bounds;
}

VectorXd NlpProblem::upper() const
{
  return upper_bounds.size() == 0 ? VectorXd::Constant(n_vars, kInf) : upper_bounds;
}

VectorXd gather(const VectorXd & y, const std::vector<Index> & idx)
{
  VectorXd out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) { out(static_cast<Index>(i)) = y(idx[i]); }
  return out;
}

double objective(const NlpProblem & problem, const VectorXd & y)
{
  double f = 0.0;
  VectorXd r;
  for (const auto & b : problem.residuals) {
    b.eval(gather(y, b.vars), r, nullptr);
    f += (b.weights.array() * r.array().square()).sum();
  }
  return f;
}

double max_constraint_violation(const NlpProblem & problem, const VectorXd & y)
{
  double worst = 0.0;
  VectorXd f;
  for (const auto & d : problem.defects) {
    d.eval(gather(y, d.deps), f, nullptr);
    worst = std::max(worst, (gather(y, d.targets) - f).cwiseAbs().maxCoeff());
  }
  for (const auto & c : problem.inequalities) {
    const VectorXd v = c.A * gather(y, c.vars);
    for (Index i = 0; i < v.size(); ++i) { worst = std::max({worst, c.lower(i) - v(i), v(i) - c.upper(i)}); }
  }
  const VectorXd lo = problem.lower(), hi = problem.upper();
  for (Index i = 0; i < problem.n_vars; ++i) { worst = std::max({worst, lo(i) - y(i), y(i) - hi(i)}); }
  return worst;
}

}  // namespace caster::nlp

#include "caster/nlp/sqp.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "caster/nlp/qp.hpp"

namespace caster::nlp {

const char * to_string(SolveStatus status)
{
  switch (status) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::MaxIterations: return "MaxIterations";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

void SolverOptions::validate() const
{
  if (max_iterations < 1) { throw std::invalid_argument("SolverOptions.max_iterations must be >= 1"); }
  if (!(kkt_tolerance > 0.0)) { throw std::invalid_argument("SolverOptions.kkt_tolerance must be > 0"); }
  if (!(constraint_tolerance > 0.0)) { throw std::invalid_argument("SolverOptions.constraint_tolerance must be > 0"); }
  if (!(regularization_floor > 0.0)) { throw std::invalid_argument("SolverOptions.regularization_floor must be > 0"); }
  if (!(line_search.contraction > 0.0 && line_search.contraction < 1.0)) {
    throw std::invalid_argument("SolverOptions.line_search.contraction must lie in (0, 1)");
  }
  if (!(line_search.sufficient_decrease > 0.0 && line_search.sufficient_decrease < 0.5)) {
    throw std::invalid_argument("SolverOptions.line_search.sufficient_decrease must lie in (0, 0.5)");
  }
  if (!(line_search.min_step > 0.0)) { throw std::invalid_argument("SolverOptions.line_search.min_step must be > 0"); }
}

namespace {

/// Residuals and defects at one iterate.
struct Evaluation
{
  double objective{0.0};
  std::vector<VectorXd> r;
  std::vector<MatrixXd> Jr;
  std::vector<VectorXd> c;  ///< y[T] - f(y[D])
  std::vector<MatrixXd> Jf;
  double defect_l1{0.0};
  double defect_inf{0.0};
  std::string failed_block;  ///< non-empty when a block returned non-finite values

  bool ok() const { return failed_block.empty(); }
};

Evaluation evaluate(const NlpProblem & problem, const VectorXd & y, bool jacobians)
{
  Evaluation ev;
  ev.r.resize(problem.residuals.size());
  ev.c.resize(problem.defects.size());
  if (jacobians) {
    ev.Jr.resize(problem.residuals.size());
    ev.Jf.resize(problem.defects.size());
  }

  for (std::size_t b = 0; b < problem.residuals.size(); ++b) {
    const auto & blk = problem.residuals[b];
    blk.eval(gather(y, blk.vars), ev.r[b], jacobians ? &ev.Jr[b] : nullptr);
    if (ev.r[b].size() != blk.weights.size()) {
      throw std::invalid_argument(fmt::format("residual '{}': size does not match weights", blk.name));
    }
    if (!ev.r[b].allFinite() || (jacobians && !ev.Jr[b].allFinite())) {
      ev.failed_block = blk.name;
      return ev;
    }
    ev.objective += (blk.weights.array() * ev.r[b].array().square()).sum();
    if (!std::isfinite(ev.objective)) {
      ev.failed_block = blk.name;
      return ev;
    }
  }
  VectorXd f;
  for (std::size_t j = 0; j < problem.defects.size(); ++j) {
    const auto & blk = problem.defects[j];
    blk.eval(gather(y, blk.deps), f, jacobians ? &ev.Jf[j] : nullptr);
    if (f.size() != static_cast<Index>(blk.targets.size())) {
      throw std::invalid_argument(fmt::format("defect '{}': value size does not match targets", blk.name));
    }
    if (!f.allFinite() || (jacobians && !ev.Jf[j].allFinite())) {
      ev.failed_block = blk.name;
      return ev;
    }
    ev.c[j] = gather(y, blk.targets) - f;
    ev.defect_l1 += ev.c[j].lpNorm<1>();
    ev.defect_inf = std::max(ev.defect_inf, ev.c[j].lpNorm<Eigen::Infinity>());
  }
  return ev;
}

/// l1 and max violation of the affine rows and variable bounds.
struct InequalityViolation
{
  double l1{0.0};
  double inf{0.0};
};

InequalityViolation inequality_violation(const NlpProblem & problem, const VectorXd & y, const VectorXd & lo, const VectorXd & hi)
{
  InequalityViolation v;
  const auto add = [&v](double excess) {
    if (excess > 0.0) {
      v.l1 += excess;
      v.inf = std::max(v.inf, excess);
    }
  };
  for (Index i = 0; i < y.size(); ++i) {
    add(lo(i) - y(i));
    add(y(i) - hi(i));
  }
  for (const auto & c : problem.inequalities) {
    const VectorXd val = c.A * gather(y, c.vars);
    for (Index i = 0; i < val.size(); ++i) {
      add(c.lower(i) - val(i));
      add(val(i) - c.upper(i));
    }
  }
  return v;
}

/// Affine map y + delta(z) = y + S z + s0 encoding the linearized defects.
struct Elimination
{
  MatrixXd S;
  VectorXd s0;
};

/// Index of each variable in z, or -1 when it is a defect target.
std::vector<Index> free_positions(const NlpProblem & problem, Index & nz)
{
  std::vector<Index> pos(static_cast<std::size_t>(problem.n_vars), 0);
  for (const auto & d : problem.defects) {
    for (const Index t : d.targets) { pos[t] = -1; }
  }
  nz = 0;
  for (auto & p : pos) {
    if (p == 0) { p = nz++; }
  }
  return pos;
}

Elimination eliminate(const NlpProblem & problem, const Evaluation & ev, const std::vector<Index> & pos, Index nz)
{
  Elimination e{MatrixXd::Zero(problem.n_vars, nz), VectorXd::Zero(problem.n_vars)};
  for (Index i = 0; i < problem.n_vars; ++i) {
    if (pos[i] >= 0) { e.S(i, pos[i]) = 1.0; }
  }
  for (std::size_t j = 0; j < problem.defects.size(); ++j) {
    const auto & d = problem.defects[j];
    if (d.deps.empty()) {
      e.s0(d.targets) = -ev.c[j];
      continue;
    }
    const MatrixXd Sd = e.S(d.deps, Eigen::all);
    e.S(d.targets, Eigen::all) = ev.Jf[j] * Sd;
    e.s0(d.targets) = ev.Jf[j] * e.s0(d.deps) - ev.c[j];
  }
  return e;
}

QpProblem reduced_qp(
  const NlpProblem & problem, const VectorXd & y, const Evaluation & ev, const Elimination & e, const VectorXd & lo,
  const VectorXd & hi)
{
  const Index nz = e.S.cols();
  QpProblem qp;
  qp.H = MatrixXd::Zero(nz, nz);
  qp.g = VectorXd::Zero(nz);
  for (std::size_t b = 0; b < problem.residuals.size(); ++b) {
    const auto & blk = problem.residuals[b];
    const MatrixXd M = ev.Jr[b] * e.S(blk.vars, Eigen::all);
    const VectorXd r_lin = ev.r[b] + ev.Jr[b] * e.s0(blk.vars);
    const MatrixXd WM = blk.weights.asDiagonal() * M;
    qp.H.noalias() += 2.0 * M.transpose() * WM;
    qp.g.noalias() += 2.0 * WM.transpose() * r_lin;
  }

  // count rows: variable bounds with a finite side, plus every affine row
  std::vector<Index> bounded;
  for (Index i = 0; i < problem.n_vars; ++i) {
    if (!std::isfinite(lo(i)) && !std::isfinite(hi(i))) { continue; }
    const double base = y(i) + e.s0(i);
    if (e.S.row(i).isZero(0.0) && base >= lo(i) && base <= hi(i)) { continue; }
    bounded.push_back(i);
  }
  Index n_rows = static_cast<Index>(bounded.size());
  for (const auto & c : problem.inequalities) { n_rows += c.A.rows(); }

  qp.A.resize(n_rows, nz);
  qp.lower.resize(n_rows);
  qp.upper.resize(n_rows);
  Index row = 0;
  for (const Index i : bounded) {
    const double base = y(i) + e.s0(i);
    qp.A.row(row) = e.S.row(i);
    qp.lower(row) = lo(i) - base;
    qp.upper(row) = hi(i) - base;
    ++row;
  }
  for (const auto & c : problem.inequalities) {
    const Index m = c.A.rows();
    const VectorXd base = c.A * (gather(y, c.vars) + e.s0(c.vars));
    qp.A.middleRows(row, m) = c.A * e.S(c.vars, Eigen::all);
    qp.lower.segment(row, m) = c.lower - base;
    qp.upper.segment(row, m) = c.upper - base;
    row += m;
  }
  return qp;
}

}  // namespace

Solution minimize(const NlpProblem & problem, const VectorXd & initial_guess, const SolverOptions & opts)
{
  problem.validate();
  opts.validate();
  if (initial_guess.size() != problem.n_vars) { throw std::invalid_argument("minimize: initial guess has wrong size"); }

  Solution sol;
  sol.layout = problem.layout;

  const VectorXd lo = problem.lower(), hi = problem.upper();
  Index nz = 0;
  const std::vector<Index> pos = free_positions(problem, nz);

  VectorXd y = initial_guess;
  double penalty = 1.0;
  bool relaxed = false;
  SolveStatus status = SolveStatus::MaxIterations;

  const auto finish = [&](SolveStatus st) {
    sol.status = st;
    sol.variables = y;
    if (st != SolveStatus::NumericalFailure) {
      sol.objective = objective(problem, y);
      sol.max_constraint_violation = max_constraint_violation(problem, y);
    }
    return sol;
  };

  for (int it = 0; it < opts.max_iterations; ++it) {
    sol.iterations = it;
    const Evaluation ev = evaluate(problem, y, true);
    if (!ev.ok()) {
      sol.message = fmt::format("non-finite value in block '{}'", ev.failed_block);
      return finish(SolveStatus::NumericalFailure);
    }
    const InequalityViolation iv = inequality_violation(problem, y, lo, hi);
    const double violation = std::max(ev.defect_inf, iv.inf);

    const Elimination elim = eliminate(problem, ev, pos, nz);
    QpProblem qp = reduced_qp(problem, y, ev, elim, lo, hi);
    const MatrixXd H_gn = qp.H;

    double reg = opts.regularization_floor * std::max(1.0, H_gn.diagonal().cwiseAbs().maxCoeff());
    QpResult qr;
    relaxed = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      qp.H = H_gn;
      qp.H.diagonal().array() += reg;
      qr = solve_qp(qp);
      if (qr.status == QpStatus::Infeasible && !relaxed) {
        const VectorXd s = minimal_bound_relaxation(qp);
        const VectorXd margin = 1e-9 * (VectorXd::Ones(s.size()) + s);
        qp.lower -= s + margin;
        qp.upper += s + margin;
        relaxed = true;
        qr = solve_qp(qp);
      }
      if (qr.status != QpStatus::NotConvex) { break; }
      reg *= 100.0;
    }
    if (qr.status != QpStatus::Optimal) {
      sol.message = fmt::format("QP subproblem failed at iteration {}", it);
      return finish(SolveStatus::NumericalFailure);
    }

    const VectorXd & dz = qr.x;
    const VectorXd dy = elim.S * dz + elim.s0;
    const double kkt = (H_gn * dz).lpNorm<Eigen::Infinity>();
    sol.kkt_residual = kkt;

    if (kkt <= opts.kkt_tolerance && violation <= opts.constraint_tolerance) { return finish(SolveStatus::Converged); }
    if (relaxed && kkt <= opts.kkt_tolerance && dy.lpNorm<Eigen::Infinity>() <= opts.constraint_tolerance) {
      return finish(SolveStatus::Infeasible);
    }

    // directional derivative of the l1 merit along dy
    double grad_dot = 0.0;
    for (std::size_t b = 0; b < problem.residuals.size(); ++b) {
      const auto & blk = problem.residuals[b];
      grad_dot += 2.0 * (blk.weights.array() * ev.r[b].array() * (ev.Jr[b] * dy(blk.vars)).array()).sum();
    }
    const double viol_l1 = ev.defect_l1 + iv.l1;
    const double viol_lin = inequality_violation(problem, y + dy, lo, hi).l1;
    const double reduction = viol_l1 - viol_lin;
    const double curvature = dz.dot(H_gn * dz);
    if (reduction > 1e-14 * std::max(1.0, viol_l1)) {
      const double required = (grad_dot + 0.5 * curvature) / (0.5 * reduction);
      if (penalty < required) { penalty = 1.1 * required; }
    }
    const double slope = grad_dot - penalty * reduction;

    const double merit0 = ev.objective + penalty * viol_l1;
    double alpha = 1.0;
    double merit_trial = merit0;
    bool accepted = false;
    if (slope < 0.0) {
      while (alpha >= opts.line_search.min_step) {
        const VectorXd y_trial = y + alpha * dy;
        const Evaluation et = evaluate(problem, y_trial, false);
        if (et.ok()) {
          merit_trial = et.objective + penalty * (et.defect_l1 + inequality_violation(problem, y_trial, lo, hi).l1);
          if (merit_trial <= merit0 + opts.line_search.sufficient_decrease * alpha * slope) {
            accepted = true;
            break;
          }
        }
        alpha *= opts.line_search.contraction;
      }
    }

    if (opts.trace) {
      opts.trace({it, ev.objective, kkt, violation, accepted ? alpha * dy.lpNorm<Eigen::Infinity>() : 0.0, merit0,
                  accepted ? merit_trial : merit0, accepted ? alpha : 0.0, penalty});
    }

    if (!accepted) {
      // no descent left at working precision
      sol.iterations = it + 1;
      status = violation <= opts.constraint_tolerance ? SolveStatus::MaxIterations : SolveStatus::Infeasible;
      return finish(status);
    }
    y += alpha * dy;
    sol.iterations = it + 1;
  }

  status = relaxed ? SolveStatus::Infeasible : SolveStatus::MaxIterations;
  return finish(status);
}

VectorXd warm_start(const Solution & previous, Index shift)
{
  if (!previous.layout) { throw std::invalid_argument("warm_start: solution carries no stage layout"); }
  const StageLayout & L = *previous.layout;
  if (shift < 1 || shift >= L.stages) {
    throw std::invalid_argument(fmt::format("warm_start: shift {} outside [1, {})", shift, L.stages));
  }
  if (previous.variables.size() != L.n_vars()) { throw std::invalid_argument("warm_start: variables do not match layout"); }

  const VectorXd & y = previous.variables;
  VectorXd out(y.size());
  for (Index k = 0; k < L.stages; ++k) {
    const Index src = std::min(k + shift, L.stages - 1);
    out.segment(L.state_offset(k), L.state_dim) = y.segment(L.state_offset(src), L.state_dim);
  }
  const Index n_inputs = L.stages - 1;
  for (Index k = 0; k < n_inputs; ++k) {
    const Index src = std::min(k + shift, n_inputs - 1);
    out.segment(L.input_offset(k), L.input_dim) = y.segment(L.input_offset(src), L.input_dim);
  }
  return out;
}

TraceCsvWriter::TraceCsvWriter(std::ostream & os, bool header) : os_(&os)
{
  if (header) { *os_ << "iter,objective,kkt,violation,step_norm\n"; }
}

void TraceCsvWriter::operator()(const IterationRecord & rec)
{
  fmt::print(*os_, "{},{},{},{},{}\n", rec.iter, rec.objective, rec.kkt, rec.violation, rec.step_norm);
}

}  // namespace caster::nlp

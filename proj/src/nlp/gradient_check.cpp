#include "caster/nlp/gradient_check.hpp"

#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace caster::nlp {

const char * to_string(BlockKind kind)
{
  switch (kind) {
    case BlockKind::Residual: return "residual";
    case BlockKind::Defect: return "defect";
    case BlockKind::Inequality: return "inequality";
  }
  return "unknown";
}

namespace {

double relative_error(const MatrixXd & analytic, const MatrixXd & numeric)
{
  double worst = 0.0;
  for (Index j = 0; j < analytic.cols(); ++j) {
    for (Index i = 0; i < analytic.rows(); ++i) {
      const double a = analytic(i, j), f = numeric(i, j);
      const double err = std::abs(a - f) / std::max({1.0, std::abs(a), std::abs(f)});
      // NaN must not compare as a pass
      worst = std::isfinite(err) ? std::max(worst, err) : std::numeric_limits<double>::infinity();
    }
  }
  return worst;
}

double check_function(const BlockFunction & fn, const VectorXd & x0)
{
  VectorXd value;
  MatrixXd J;
  fn(x0, value, &J);
  if (J.rows() != value.size() || J.cols() != x0.size()) { return std::numeric_limits<double>::infinity(); }

  MatrixXd numeric(value.size(), x0.size());
  VectorXd plus, minus;
  for (Index i = 0; i < x0.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(x0(i)));
    VectorXd xp = x0, xm = x0;
    xp(i) += h;
    xm(i) -= h;
    fn(xp, plus, nullptr);
    fn(xm, minus, nullptr);
    numeric.col(i) = (plus - minus) / (xp(i) - xm(i));
  }
  return relative_error(J, numeric);
}

}  // namespace

GradientReport check_gradients(const NlpProblem & problem, const VectorXd & point, double tol)
{
  if (point.size() != problem.n_vars) { throw std::invalid_argument("check_gradients: point has wrong size"); }
  GradientReport report;
  report.tolerance = tol;
  const auto record = [&report](BlockGradientError e) {
    report.max_rel_error = std::max(report.max_rel_error, e.max_rel_error);
    report.blocks.push_back(std::move(e));
  };

  for (const auto & b : problem.residuals) {
    record({b.name, BlockKind::Residual, b.stage, check_function(b.eval, gather(point, b.vars))});
  }
  for (const auto & d : problem.defects) {
    if (d.deps.empty()) {
      record({d.name, BlockKind::Defect, d.stage, 0.0});
      continue;
    }
    record({d.name, BlockKind::Defect, d.stage, check_function(d.eval, gather(point, d.deps))});
  }
  for (const auto & c : problem.inequalities) {
    const BlockFunction affine = [&c](const VectorXd & x, VectorXd & value, MatrixXd * J) {
      value = c.A * x;
      if (J) { *J = c.A; }
    };
    record({c.name, BlockKind::Inequality, c.stage, check_function(affine, gather(point, c.vars))});
  }
  return report;
}

void write_gradient_report_csv(std::ostream & os, const GradientReport & report)
{
  os << "block,kind,stage,max_rel_error\n";
  for (const auto & b : report.blocks) { fmt::print(os, "{},{},{},{}\n", b.name, to_string(b.kind), b.stage, b.max_rel_error); }
}

}  // namespace caster::nlp

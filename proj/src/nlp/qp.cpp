#include "caster/nlp/qp.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace caster::nlp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// One-sided constraint sign * A.row(row) x >= bound, or an equality when `equality` is set.
struct SidedConstraint
{
  Eigen::Index row;
  double sign;
  double bound;
  bool equality;
};

/**
 * Working-set factorization of the dual method. With N the matrix of active normals,
 * J^T N = [R; 0] with R upper triangular and J J^T = H^{-1}.
 */
class WorkingSet
{
public:
  WorkingSet(Eigen::MatrixXd J) : J_(std::move(J)), R_(Eigen::MatrixXd::Zero(J_.rows(), J_.cols())) {}

  Eigen::Index size() const { return iq_; }
  const Eigen::MatrixXd & J() const { return J_; }

  /// Primal direction z and dual direction r for the normal whose J^T-image is d.
  void directions(const Eigen::VectorXd & d, Eigen::VectorXd & z, Eigen::VectorXd & r) const
  {
    const Eigen::Index n = J_.rows();
    z.noalias() = J_.rightCols(n - iq_) * d.tail(n - iq_);
    r = R_.topLeftCorner(iq_, iq_).triangularView<Eigen::Upper>().solve(d.head(iq_));
  }

  /// Append a constraint; d = J^T n_p is consumed.
  void add(Eigen::VectorXd d)
  {
    const Eigen::Index n = J_.rows();
    for (Eigen::Index j = n - 1; j > iq_; --j) {
      const double b = d(j);
      if (b == 0.0) { continue; }
      const double a = d(j - 1);
      const double h = std::hypot(a, b);
      const double c = a / h, s = b / h;
      d(j - 1) = h;
      d(j) = 0.0;
      rotate_columns(j - 1, c, s);
    }
    R_.col(iq_).head(iq_ + 1) = d.head(iq_ + 1);
    ++iq_;
  }

  /// Remove the constraint at working-set position pos.
  void remove(Eigen::Index pos)
  {
    for (Eigen::Index k = pos; k + 1 < iq_; ++k) { R_.col(k) = R_.col(k + 1); }
    R_.col(iq_ - 1).setZero();
    --iq_;
    for (Eigen::Index j = pos; j < iq_; ++j) {
      const double b = R_(j + 1, j);
      if (b == 0.0) { continue; }
      const double a = R_(j, j);
      const double h = std::hypot(a, b);
      const double c = a / h, s = b / h;
      for (Eigen::Index k = j; k < iq_; ++k) {
        const double rj = R_(j, k), rj1 = R_(j + 1, k);
        R_(j, k) = c * rj + s * rj1;
        R_(j + 1, k) = -s * rj + c * rj1;
      }
      R_(j + 1, j) = 0.0;
      rotate_columns(j, c, s);
    }
  }

private:
  void rotate_columns(Eigen::Index j, double c, double s)
  {
    for (Eigen::Index k = 0; k < J_.rows(); ++k) {
      const double a = J_(k, j), b = J_(k, j + 1);
      J_(k, j) = c * a + s * b;
      J_(k, j + 1) = -s * a + c * b;
    }
  }

  Eigen::MatrixXd J_;
  Eigen::MatrixXd R_;
  Eigen::Index iq_{0};
};

}  // namespace

QpResult solve_qp(const QpProblem & qp, const QpOptions & opts)
{
  const Eigen::Index n = qp.H.rows();
  const Eigen::Index m = qp.A.rows();
  if (qp.H.cols() != n || qp.g.size() != n || (m > 0 && qp.A.cols() != n) || qp.lower.size() != m
      || qp.upper.size() != m) {
    throw std::invalid_argument("solve_qp: inconsistent dimensions");
  }

  QpResult res;
  res.multipliers = Eigen::VectorXd::Zero(m);

  const Eigen::LLT<Eigen::MatrixXd> llt(qp.H);
  if (llt.info() != Eigen::Success) {
    res.status = QpStatus::NotConvex;
    res.x = Eigen::VectorXd::Zero(n);
    return res;
  }
  const Eigen::MatrixXd Linv_T = llt.matrixU().solve(Eigen::MatrixXd::Identity(n, n));
  res.x = -llt.solve(qp.g);

  std::vector<SidedConstraint> constraints;
  std::size_t n_eq = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::isfinite(qp.lower(i)) && qp.lower(i) == qp.upper(i)) {
      constraints.push_back({i, 1.0, qp.lower(i), true});
    }
  }
  n_eq = constraints.size();
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::isfinite(qp.lower(i)) && qp.lower(i) == qp.upper(i)) { continue; }
    if (qp.lower(i) > qp.upper(i)) {
      res.status = QpStatus::Infeasible;
      return res;
    }
    if (std::isfinite(qp.lower(i))) { constraints.push_back({i, 1.0, qp.lower(i), false}); }
    if (std::isfinite(qp.upper(i))) { constraints.push_back({i, -1.0, -qp.upper(i), false}); }
  }

  const auto normal = [&](const SidedConstraint & c) -> Eigen::VectorXd {
    return c.sign * qp.A.row(c.row).transpose();
  };
  const auto slack = [&](const SidedConstraint & c, const Eigen::VectorXd & x) {
    return c.sign * qp.A.row(c.row).dot(x) - c.bound;
  };
  const auto tolerance = [&](const SidedConstraint & c) {
    return opts.feasibility_tolerance * std::max(1.0, std::abs(c.bound));
  };

  WorkingSet ws(Linv_T);
  std::vector<std::size_t> active;
  std::vector<double> u;
  std::vector<char> is_active(constraints.size(), 0);

  Eigen::VectorXd np(n), d(n), z(n), r;
  Eigen::VectorXd & x = res.x;

  // equalities first; they never leave the working set
  for (std::size_t e = 0; e < n_eq; ++e) {
    const auto & c = constraints[e];
    np = normal(c);
    d.noalias() = ws.J().transpose() * np;
    ws.directions(d, z, r);
    const double zn = d.tail(n - ws.size()).squaredNorm();
    const double s = slack(c, x);
    if (zn <= 1e-24 * std::max(1.0, d.squaredNorm())) {
      // linearly dependent on the current equalities
      if (std::abs(s) > tolerance(c)) {
        res.status = QpStatus::Infeasible;
        return res;
      }
      continue;
    }
    const double t = -s / zn;
    x += t * z;
    for (Eigen::Index k = 0; k < ws.size(); ++k) { u[k] -= t * r(k); }
    u.push_back(t);
    ws.add(d);
    active.push_back(e);
    is_active[e] = 1;
  }
  const std::size_t n_eq_active = active.size();

  const int max_iter = opts.max_iterations > 0 ? opts.max_iterations : static_cast<int>(10 * (n + m) + 10);
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    // most violated inactive constraint
    std::size_t p = constraints.size();
    double worst = 0.0;
    for (std::size_t i = n_eq; i < constraints.size(); ++i) {
      if (is_active[i]) { continue; }
      const double s = slack(constraints[i], x);
      if (s < -tolerance(constraints[i]) && s < worst) {
        worst = s;
        p = i;
      }
    }
    if (p == constraints.size()) {
      res.status = QpStatus::Optimal;
      for (std::size_t k = 0; k < active.size(); ++k) {
        const auto & c = constraints[active[k]];
        res.multipliers(c.row) += c.sign * u[k];
      }
      return res;
    }

    double u_p = 0.0;
    double s_p = worst;
    np = normal(constraints[p]);
    for (;;) {
      d.noalias() = ws.J().transpose() * np;
      ws.directions(d, z, r);

      // partial step: largest dual step keeping inequality multipliers non-negative
      double t1 = kInf;
      std::size_t drop = active.size();
      for (std::size_t k = n_eq_active; k < active.size(); ++k) {
        if (r(static_cast<Eigen::Index>(k)) > 0.0) {
          const double ratio = u[k] / r(static_cast<Eigen::Index>(k));
          if (ratio < t1) {
            t1 = ratio;
            drop = k;
          }
        }
      }
      // full step: primal step making constraint p active
      const double zn = d.tail(n - ws.size()).squaredNorm();
      const double t2 = zn > 1e-24 * std::max(1.0, d.squaredNorm()) ? -s_p / zn : kInf;
      const double t = std::min(t1, t2);

      if (t == kInf) {
        res.status = QpStatus::Infeasible;
        return res;
      }
      if (t2 == kInf) {
        for (std::size_t k = 0; k < active.size(); ++k) { u[k] -= t * r(static_cast<Eigen::Index>(k)); }
        u_p += t;
        is_active[active[drop]] = 0;
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop));
        u.erase(u.begin() + static_cast<std::ptrdiff_t>(drop));
        ws.remove(static_cast<Eigen::Index>(drop));
        continue;
      }

      x += t * z;
      for (std::size_t k = 0; k < active.size(); ++k) { u[k] -= t * r(static_cast<Eigen::Index>(k)); }
      u_p += t;

      if (t == t2) {
        ws.add(d);
        active.push_back(p);
        u.push_back(u_p);
        is_active[p] = 1;
        break;
      }
      is_active[active[drop]] = 0;
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop));
      u.erase(u.begin() + static_cast<std::ptrdiff_t>(drop));
      ws.remove(static_cast<Eigen::Index>(drop));
      s_p = slack(constraints[p], x);
    }
  }
  res.status = QpStatus::IterationLimit;
  return res;
}

Eigen::VectorXd minimal_bound_relaxation(const QpProblem & qp, const QpOptions & opts)
{
  const Eigen::Index n = qp.H.rows();
  const Eigen::Index m = qp.A.rows();
  constexpr double eps = 1e-8;

  QpProblem ext;
  ext.H = Eigen::MatrixXd::Zero(n + m, n + m);
  ext.H.topLeftCorner(n, n) = eps * qp.H;
  ext.H.bottomRightCorner(m, m).setIdentity();
  ext.g = Eigen::VectorXd::Zero(n + m);
  ext.g.head(n) = eps * qp.g;

  std::vector<Eigen::Index> lower_rows, upper_rows;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::isfinite(qp.lower(i))) { lower_rows.push_back(i); }
    if (std::isfinite(qp.upper(i))) { upper_rows.push_back(i); }
  }
  const auto n_rows = static_cast<Eigen::Index>(lower_rows.size() + upper_rows.size()) + m;
  ext.A = Eigen::MatrixXd::Zero(n_rows, n + m);
  ext.lower = Eigen::VectorXd::Constant(n_rows, -kInf);
  ext.upper = Eigen::VectorXd::Constant(n_rows, kInf);

  Eigen::Index row = 0;
  for (const Eigen::Index i : lower_rows) {
    ext.A.row(row).head(n) = qp.A.row(i);
    ext.A(row, n + i) = 1.0;
    ext.lower(row++) = qp.lower(i);
  }
  for (const Eigen::Index i : upper_rows) {
    ext.A.row(row).head(n) = qp.A.row(i);
    ext.A(row, n + i) = -1.0;
    ext.upper(row++) = qp.upper(i);
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    ext.A(row, n + i) = 1.0;
    ext.lower(row++) = 0.0;
  }

  const QpResult sol = solve_qp(ext, opts);
  if (sol.status != QpStatus::Optimal) { throw std::runtime_error("minimal_bound_relaxation: elastic QP failed"); }
  return sol.x.tail(m).cwiseMax(0.0);
}

}  // namespace caster::nlp

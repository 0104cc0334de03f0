#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>

#include "caster/nlp/qp.hpp"

using namespace caster::nlp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Enumerates every assignment row -> {free, at lower, at upper}, solves the equality-constrained
// QP for each and returns the best feasible point. Exponential; small problems only.
std::optional<VectorXd> brute_force(const QpProblem & qp)
{
  const Eigen::Index n = qp.H.rows(), m = qp.A.rows();
  std::optional<VectorXd> best;
  double best_f = kInf;
  std::vector<int> pick(static_cast<std::size_t>(m), 0);
  for (;;) {
    std::vector<std::pair<Eigen::Index, double>> eq;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (pick[i] == 1 && std::isfinite(qp.lower(i))) { eq.push_back({i, qp.lower(i)}); }
      if (pick[i] == 2 && std::isfinite(qp.upper(i))) { eq.push_back({i, qp.upper(i)}); }
    }
    const auto k = static_cast<Eigen::Index>(eq.size());
    if (k <= n) {
      MatrixXd K = MatrixXd::Zero(n + k, n + k);
      VectorXd rhs(n + k);
      K.topLeftCorner(n, n) = qp.H;
      rhs.head(n) = -qp.g;
      for (Eigen::Index j = 0; j < k; ++j) {
        K.block(0, n + j, n, 1) = qp.A.row(eq[j].first).transpose();
        K.block(n + j, 0, 1, n) = qp.A.row(eq[j].first);
        rhs(n + j) = eq[j].second;
      }
      Eigen::FullPivLU<MatrixXd> lu(K);
      if (lu.isInvertible()) {
        const VectorXd x = lu.solve(rhs).head(n);
        const VectorXd ax = qp.A * x;
        bool feasible = true;
        for (Eigen::Index i = 0; i < m; ++i) {
          if (ax(i) < qp.lower(i) - 1e-9 || ax(i) > qp.upper(i) + 1e-9) { feasible = false; }
        }
        const double f = 0.5 * x.dot(qp.H * x) + qp.g.dot(x);
        if (feasible && f < best_f) {
          best_f = f;
          best = x;
        }
      }
    }
    Eigen::Index i = 0;
    while (i < m && ++pick[i] == 3) { pick[i++] = 0; }
    if (i == m) { break; }
  }
  return best;
}

QpProblem random_qp(std::mt19937_64 & rng, int n, int m)
{
  std::normal_distribution<double> d;
  QpProblem qp;
  MatrixXd R(n, n);
  for (auto & v : R.reshaped()) { v = d(rng); }
  qp.H = R.transpose() * R + 0.1 * MatrixXd::Identity(n, n);
  qp.g.resize(n);
  for (auto & v : qp.g) { v = 3.0 * d(rng); }
  qp.A.resize(m, n);
  for (auto & v : qp.A.reshaped()) { v = d(rng); }
  qp.lower.resize(m);
  qp.upper.resize(m);
  std::uniform_int_distribution<int> kind(0, 3);
  for (int i = 0; i < m; ++i) {
    const double c = 0.5 * d(rng);
    switch (kind(rng)) {
      case 0: qp.lower(i) = c; qp.upper(i) = kInf; break;
      case 1: qp.lower(i) = -kInf; qp.upper(i) = c; break;
      case 2: qp.lower(i) = c - 0.3; qp.upper(i) = c + 0.3; break;
      default: qp.lower(i) = c; qp.upper(i) = c; break;
    }
  }
  return qp;
}

}  // namespace

TEST(Qp, Unconstrained)
{
  QpProblem qp;
  qp.H = MatrixXd::Identity(2, 2) * 2.0;
  qp.g = VectorXd::Constant(2, -4.0);
  qp.A.resize(0, 2);
  qp.lower.resize(0);
  qp.upper.resize(0);
  const QpResult r = solve_qp(qp);
  ASSERT_EQ(r.status, QpStatus::Optimal);
  EXPECT_TRUE(r.x.isApprox(VectorXd::Constant(2, 2.0)));
}

TEST(Qp, NotConvex)
{
  QpProblem qp;
  qp.H = MatrixXd::Identity(2, 2);
  qp.H(1, 1) = -1.0;
  qp.g = VectorXd::Zero(2);
  qp.A.resize(0, 2);
  qp.lower.resize(0);
  qp.upper.resize(0);
  EXPECT_EQ(solve_qp(qp).status, QpStatus::NotConvex);
}

TEST(Qp, MatchesBruteForce)
{
  std::mt19937_64 rng(11);
  int feasible = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + trial % 4, m = 1 + trial % 6;
    const QpProblem qp = random_qp(rng, n, m);
    const auto oracle = brute_force(qp);
    const QpResult r = solve_qp(qp);
    if (!oracle) {
      EXPECT_EQ(r.status, QpStatus::Infeasible) << "trial " << trial;
      continue;
    }
    ++feasible;
    ASSERT_EQ(r.status, QpStatus::Optimal) << "trial " << trial;
    EXPECT_LT((r.x - *oracle).lpNorm<Eigen::Infinity>(), 1e-7) << "trial " << trial;
    // stationarity with the reported multipliers
    EXPECT_LT((qp.H * r.x + qp.g - qp.A.transpose() * r.multipliers).lpNorm<Eigen::Infinity>(), 1e-8);
  }
  EXPECT_GT(feasible, 100);
}

TEST(Qp, InfeasibleBox)
{
  QpProblem qp;
  qp.H = MatrixXd::Identity(1, 1);
  qp.g = VectorXd::Zero(1);
  qp.A = MatrixXd::Ones(2, 1);
  qp.lower = VectorXd(2);
  qp.upper = VectorXd(2);
  qp.lower << 1.0, -kInf;
  qp.upper << kInf, 0.0;
  EXPECT_EQ(solve_qp(qp).status, QpStatus::Infeasible);

  // elastic relaxation closes the gap of one with the least total slack
  const VectorXd s = minimal_bound_relaxation(qp);
  EXPECT_NEAR(s.sum(), 1.0, 1e-6);
  QpProblem relaxed = qp;
  relaxed.lower -= s + VectorXd::Constant(2, 1e-9);
  relaxed.upper += s + VectorXd::Constant(2, 1e-9);
  EXPECT_EQ(solve_qp(relaxed).status, QpStatus::Optimal);
}

TEST(Qp, RelaxationIsZeroWhenFeasible)
{
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const QpProblem qp = random_qp(rng, 4, 3);
    if (solve_qp(qp).status != QpStatus::Optimal) { continue; }
    EXPECT_LT(minimal_bound_relaxation(qp).lpNorm<Eigen::Infinity>(), 1e-6);
  }
}

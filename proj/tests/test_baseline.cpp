#include <gtest/gtest.h>

#include <cmath>

#include "unmix/baseline.hpp"
#include "unmix/random.hpp"

using namespace unmix;
using baseline::BaselineOptions;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.reshaped()) v = rng.uniform(0.05, 1.0);
  return m;
}

BaselineOptions tight(double lambda, bool nonneg) {
  BaselineOptions o;
  o.lambda = lambda;
  o.nonneg = nonneg;
  o.tol = 1e-10;
  o.max_iters = 20000;
  return o;
}

// Random search over a box followed by cyclic coordinate descent with the
// exact one-dimensional minimizer.
Vector brute_force_lasso(const Matrix& A, const Vector& y, double lambda, bool nonneg,
                         Rng& rng) {
  const Eigen::Index q = A.cols();
  const double hi = 3.0, lo = nonneg ? 0.0 : -3.0;
  Vector best = Vector::Zero(q);
  double fbest = baseline::l1_objective(A, y, best, lambda);
  for (int s = 0; s < 20000; ++s) {
    Vector x(q);
    for (auto& v : x) v = rng.uniform(lo, hi);
    const double f = baseline::l1_objective(A, y, x, lambda);
    if (f < fbest) {
      fbest = f;
      best = x;
    }
  }
  for (int sweep = 0; sweep < 20000; ++sweep) {
    double moved = 0.0;
    for (Eigen::Index j = 0; j < q; ++j) {
      const Vector r = y - A * best + A.col(j) * best[j];
      const double a = A.col(j).squaredNorm(), b = A.col(j).dot(r);
      double v = std::copysign(std::max(std::abs(b) - lambda, 0.0), b) / a;
      if (nonneg) v = std::max(v, 0.0);
      moved = std::max(moved, std::abs(v - best[j]));
      best[j] = v;
    }
    if (moved < 1e-15) break;
  }
  return best;
}

}  // namespace

TEST(Options, Validation) {
  BaselineOptions o;
  EXPECT_NO_THROW(o.validate());
  o.lambda = -1;
  EXPECT_THROW(o.validate(), InvalidInput);
  o = {};
  o.rho = 0;
  EXPECT_THROW(o.validate(), InvalidInput);
}

TEST(Admm, LeastSquaresLimit) {
  Rng rng(1);
  const Matrix A = random_matrix(5, 5, rng) + 2.0 * Matrix::Identity(5, 5);
  Vector y(5);
  for (auto& v : y) v = rng.normal();
  const auto r = baseline::AdmmProblem(A).solve(y, tight(0.0, false));
  EXPECT_TRUE(r.converged);
  EXPECT_LE((r.raw_estimate - A.fullPivLu().solve(y)).norm(), 1e-8);
}

TEST(Admm, IdentityIsSoftThreshold) {
  Vector y(4);
  y << 0.5, -0.05, -0.8, 0.1;
  const double lambda = 0.1;
  const auto r = baseline::AdmmProblem(Matrix::Identity(4, 4)).solve(y, tight(lambda, false));
  for (Eigen::Index i = 0; i < 4; ++i)
    EXPECT_NEAR(r.raw_estimate[i],
                std::copysign(std::max(std::abs(y[i]) - lambda, 0.0), y[i]), 1e-9);
}

TEST(Admm, ObjectiveNoWorseThanBruteForce) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const Matrix A = random_matrix(6, 4, rng);
    Vector y(6);
    for (auto& v : y) v = rng.uniform(-0.5, 1.5);
    const double lambda = rng.uniform(0.0, 0.3);
    for (bool nonneg : {false, true}) {
      const auto r = baseline::AdmmProblem(A).solve(y, tight(lambda, nonneg));
      const Vector ref = brute_force_lasso(A, y, lambda, nonneg, rng);
      EXPECT_LE(baseline::l1_objective(A, y, r.raw_estimate, lambda),
                baseline::l1_objective(A, y, ref, lambda) + 1e-6)
          << "instance " << t << " nonneg " << nonneg;
    }
  }
}

TEST(Admm, NonnegativeOutput) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const Matrix A = random_matrix(20, 6, rng);
    Vector y(20);
    for (auto& v : y) v = rng.normal();
    const auto r = baseline::AdmmProblem(A).solve(y, BaselineOptions{});
    EXPECT_GE(r.raw_estimate.minCoeff(), -1e-12);
  }
}

TEST(Admm, ResidualsBelowTolWhenConverged) {
  Rng rng(4);
  for (int t = 0; t < 30; ++t) {
    const Matrix A = random_matrix(30, 8, rng);
    Vector x = Vector::Zero(8);
    x[t % 8] = 1.0;
    const Vector y = A * x;
    baseline::AdmmResiduals res;
    BaselineOptions o;
    o.rho = std::exp(rng.uniform(-5, 3));
    const auto r = baseline::AdmmProblem(A).solve(y, o, &res);
    if (r.converged) {
      EXPECT_LE(res.primal, o.tol);
      EXPECT_LE(res.dual, o.tol);
    }
  }
}

TEST(Admm, SumToOneConstraint) {
  Rng rng(5);
  const Matrix A = random_matrix(30, 5, rng);
  Vector x(5);
  x << 0.1, 0.2, 0.3, 0.4, 0.0;
  auto o = tight(1e-4, true);
  o.sum_to_one = true;
  const auto r = baseline::AdmmProblem(A).solve(A * x, o);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.raw_estimate.sum(), 1.0, 1e-6);
  EXPECT_NEAR(r.abundances.sum(), 1.0, 1e-12);
  EXPECT_LE((r.raw_estimate - x).norm(), 1e-3);
}

TEST(Admm, DimensionMismatch) {
  EXPECT_THROW(baseline::AdmmProblem(Matrix::Ones(4, 2)).solve(Vector::Ones(3), {}), InvalidInput);
}

TEST(Nnls, RecoversFeasibleSolution) {
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    const Matrix A = random_matrix(40, 6, rng);
    Vector x(6);
    for (auto& v : x) v = rng.uniform(0.0, 1.0);
    x[t % 6] = 0.0;
    auto o = tight(0.0, true);
    const auto r = baseline::NnlsProblem(A).solve(A * x, o);
    EXPECT_LE((r.raw_estimate - x).norm(), 1e-6) << t;
  }
}

TEST(Nnls, NegativeOrthantGivesZero) {
  Vector y(3);
  y << -0.3, -1.0, -0.01;
  const auto r = baseline::NnlsProblem(Matrix::Identity(3, 3)).solve(y, {});
  EXPECT_EQ(r.raw_estimate, Vector::Zero(3));
}

TEST(Nnls, ObjectiveNonIncreasing) {
  Rng rng(7);
  for (int t = 0; t < 100; ++t) {
    const Matrix A = random_matrix(15, 1 + Eigen::Index(rng.below(10)), rng);
    Vector y(15);
    for (auto& v : y) v = rng.normal();
    std::vector<double> trace;
    BaselineOptions o;
    o.max_iters = 300;
    const auto r = baseline::NnlsProblem(A).solve(y, o, [&](int, double f) { trace.push_back(f); });
    ASSERT_FALSE(trace.empty());
    for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1]) << t;
    const Vector x = r.raw_estimate;
    EXPECT_NEAR(trace.back(), 0.5 * (A * x - y).squaredNorm(), 1e-9 * (1 + trace.back()));
    EXPECT_GE(x.minCoeff(), 0.0);
  }
}

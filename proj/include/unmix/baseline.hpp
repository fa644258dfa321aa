#pragma once

// Comparison solvers sharing the PCSBL input/output shape.
//
//   admm:  min 1/2 |A x - y|^2 + lambda |x|_1   [x >= 0] [1'x = 1]
//   nnls:  min 1/2 |A x - y|^2                  x >= 0

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "unmix/error.hpp"
#include "unmix/solver_result.hpp"
#include "unmix/spectra_model.hpp"

namespace unmix::baseline {

struct BaselineOptions {
  double lambda = 1e-3;
  // Initial augmented-Lagrangian penalty; rebalanced against the residuals.
  double rho = 0.05;
  int max_iters = 2000;
  double tol = 1e-6;
  bool nonneg = true;
  bool sum_to_one = false;

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw InvalidInput("lambda must be finite and >= 0");
    if (!(rho > 0.0) || !std::isfinite(rho))
      throw InvalidInput("rho must be finite and > 0");
    if (max_iters < 1) throw InvalidInput("max_iters must be >= 1");
    if (!(tol > 0.0)) throw InvalidInput("tol must be > 0");
  }
};

struct AdmmResiduals {
  double primal = 0.0;
  double dual = 0.0;
};

inline double l1_objective(const Matrix& A, const Vector& y, const Vector& x,
                           double lambda) {
  return 0.5 * (A * x - y).squaredNorm() + lambda * x.lpNorm<1>();
}

inline void check_dims(const Matrix& A, const Vector& y) {
  if (A.rows() != y.size())
    throw InvalidInput("spectrum has " + std::to_string(y.size()) +
                       " bands, endmember matrix has " +
                       std::to_string(A.rows()));
}

class AdmmProblem {
 public:
  explicit AdmmProblem(const EndmemberMatrix& A) : AdmmProblem(A.values()) {}
  explicit AdmmProblem(Matrix A) : A_(std::move(A)), gram_(A_.transpose() * A_) {}

  SolverResult solve(const Vector& y, const BaselineOptions& opts,
                     AdmmResiduals* residuals = nullptr) const {
    opts.validate();
    check_dims(A_, y);
    const Eigen::Index q = A_.cols();
    const Vector aty = A_.transpose() * y;
    const Vector ones = Vector::Ones(q);

    double rho = opts.rho;
    Eigen::LLT<Matrix> llt;
    Vector b_ones;  // (A'A + rho I)^-1 1
    double ones_b_ones = 0.0;
    auto factor = [&] {
      Matrix m = gram_;
      m.diagonal().array() += rho;
      llt.compute(m);
      if (llt.info() != Eigen::Success)
        throw NumericalError("ADMM system matrix is not positive definite");
      if (opts.sum_to_one) {
        b_ones = llt.solve(ones);
        ones_b_ones = ones.dot(b_ones);
      }
    };
    factor();

    Vector x = Vector::Zero(q), z = Vector::Zero(q), u = Vector::Zero(q);
    Vector z_old(q);
    SolverResult result;
    AdmmResiduals res;

    for (int it = 1; it <= opts.max_iters; ++it) {
      x = llt.solve(aty + rho * (z - u));
      if (opts.sum_to_one) x -= b_ones * ((ones.dot(x) - 1.0) / ones_b_ones);

      z_old = z;
      const double shrink = opts.lambda / rho;
      const Vector v = x + u;
      for (Eigen::Index i = 0; i < q; ++i) {
        const double mag = std::max(std::abs(v[i]) - shrink, 0.0);
        z[i] = opts.nonneg ? std::max(v[i] - shrink, 0.0)
                           : std::copysign(mag, v[i]);
      }
      u += x - z;

      res.primal = (x - z).norm();
      res.dual = rho * (z - z_old).norm();
      result.iterations_used = it;
      result.last_change = std::max(res.primal, res.dual);
      if (res.primal <= opts.tol && res.dual <= opts.tol) {
        result.converged = true;
        break;
      }
      // Residual balancing keeps convergence insensitive to the initial rho.
      if (res.primal > 10.0 * res.dual) {
        rho *= 2.0;
        u /= 2.0;
        factor();
      } else if (res.dual > 10.0 * res.primal) {
        rho /= 2.0;
        u *= 2.0;
        factor();
      }
    }

    if (residuals) *residuals = res;
    result.raw_estimate = z;
    result.abundances = project_to_constraints(z, opts.sum_to_one);
    return result;
  }

 private:
  Matrix A_;
  Matrix gram_;
};

inline SolverResult sparse_regression_admm(const EndmemberMatrix& A,
                                           const PixelSpectrum& y,
                                           const BaselineOptions& opts) {
  return AdmmProblem(A).solve(y, opts);
}

class NnlsProblem {
 public:
  explicit NnlsProblem(const EndmemberMatrix& A) : NnlsProblem(A.values()) {}
  explicit NnlsProblem(Matrix A) : A_(std::move(A)), gram_(A_.transpose() * A_) {
    // Largest eigenvalue of A'A bounds the gradient's Lipschitz constant.
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram_, Eigen::EigenvaluesOnly);
    lipschitz_ = std::max(es.eigenvalues().maxCoeff(), 1e-300);
  }

  // on_iterate(iteration, objective) fires after every accepted step.
  template <class Observer>
  SolverResult solve(const Vector& y, const BaselineOptions& opts,
                     Observer&& on_iterate) const {
    opts.validate();
    check_dims(A_, y);
    const Eigen::Index q = A_.cols();
    const Vector aty = A_.transpose() * y;
    const double yty = y.squaredNorm();
    // 1/2 x'Gx - x'A'y + 1/2 y'y, evaluated without forming A x.
    auto objective = [&](const Vector& x) {
      return 0.5 * x.dot(gram_ * x) - x.dot(aty) + 0.5 * yty;
    };

    Vector x = Vector::Zero(q);
    double f = objective(x);
    double step = 1.0 / lipschitz_;
    SolverResult result;

    for (int it = 1; it <= opts.max_iters; ++it) {
      const Vector grad = gram_ * x - aty;
      Vector next;
      double f_next;
      // Backtracking on the projection arc (sufficient decrease).
      step *= 2.0;
      for (;;) {
        next = (x - step * grad).cwiseMax(0.0);
        const Vector d = next - x;
        f_next = objective(next);
        if (f_next <= f + grad.dot(d) + d.squaredNorm() / (2.0 * step) ||
            step < 1e-30)
          break;
        step *= 0.5;
      }
      if (f_next > f) {
        next = x;
        f_next = f;
      }
      const double change = (next - x).norm();
      x.swap(next);
      f = f_next;
      on_iterate(it, f);
      result.iterations_used = it;
      result.last_change = change;
      if (change <= opts.tol) {
        result.converged = true;
        break;
      }
    }

    result.raw_estimate = x;
    result.abundances = project_to_constraints(x, opts.sum_to_one);
    return result;
  }

  SolverResult solve(const Vector& y, const BaselineOptions& opts) const {
    return solve(y, opts, [](int, double) {});
  }

 private:
  Matrix A_;
  Matrix gram_;
  double lipschitz_ = 1.0;
};

inline SolverResult nnls_projected_gradient(const EndmemberMatrix& A,
                                            const PixelSpectrum& y,
                                            const BaselineOptions& opts) {
  return NnlsProblem(A).solve(y, opts);
}

}  // namespace unmix::baseline

#pragma once

// Pattern-coupled sparse Bayesian learning for one pixel.
//
// Prior: x_i ~ N(0, 1 / D_i) with D_i = alpha_i + beta * (alpha_{i-1} +
// alpha_{i+1}), so each coefficient's sparsity is tied to its neighbours
// along the endmember index. Hyperparameters are learned by EM; the noise
// precision is either given or learned under a Gamma(c, d) hyperprior.
//
// Noise enters in precision form throughout: Phi = (p A'A + diag(D))^-1 and
// mu = p Phi A'y with p = 1 / sigma^2.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <variant>

#include "unmix/error.hpp"
#include "unmix/solver_result.hpp"
#include "unmix/spectra_model.hpp"

namespace unmix::pcsbl {

// Floor in the alpha update denominator; keeps every alpha finite.
inline constexpr double kAlphaFloor = 1e-4;

struct KnownNoise {
  double variance;
};

struct UnknownNoise {
  double c = 1e-4;
  double d = 1e-4;
};

using NoiseMode = std::variant<KnownNoise, UnknownNoise>;

struct SolverOptions {
  double beta = 1.0;
  double k = 1.0;
  double epsilon = 1e-8;
  int max_iters = 500;
  NoiseMode noise = UnknownNoise{};
  bool asc_postprocess = false;

  bool known_noise() const { return std::holds_alternative<KnownNoise>(noise); }

  void validate() const {
    if (!(beta >= 0.0) || !std::isfinite(beta))
      throw InvalidInput("beta must be finite and >= 0");
    if (!(k > 0.0) || !std::isfinite(k))
      throw InvalidInput("k must be finite and > 0");
    if (!(epsilon > 0.0)) throw InvalidInput("epsilon must be > 0");
    if (max_iters < 1) throw InvalidInput("max_iters must be >= 1");
    if (const auto* kn = std::get_if<KnownNoise>(&noise)) {
      if (!(kn->variance > 0.0) || !std::isfinite(kn->variance))
        throw InvalidInput("known noise variance must be finite and > 0");
    } else {
      const auto& un = std::get<UnknownNoise>(noise);
      if (!(un.c > 0.0) || !(un.d > 0.0))
        throw InvalidInput("Gamma hyperprior constants c, d must be > 0");
    }
  }
};

struct SolverState {
  Vector alpha;
  double gamma = 1.0;  // noise precision
  Vector mu;
  Matrix phi;
  int iteration = 0;
  double change = std::numeric_limits<double>::infinity();
};

struct Posterior {
  Vector mu;
  Matrix phi;
};

namespace detail {

inline void coupled_diagonal(const Vector& alpha, double beta, Vector& out) {
  const Eigen::Index q = alpha.size();
  out.resize(q);
  for (Eigen::Index i = 0; i < q; ++i) {
    double neighbours = 0.0;
    if (i > 0) neighbours += alpha[i - 1];
    if (i + 1 < q) neighbours += alpha[i + 1];
    out[i] = alpha[i] + beta * neighbours;
  }
}

// Scratch space reused across iterations of one pixel solve.
struct PosteriorWorkspace {
  Matrix system;
  Eigen::LLT<Matrix> llt;
};

inline void posterior_from_gram(const Matrix& gram, const Vector& aty,
                                const Vector& diag, double precision,
                                PosteriorWorkspace& ws, Vector& mu,
                                Matrix& phi) {
  const Eigen::Index q = gram.rows();
  ws.system.noalias() = precision * gram;
  ws.system.diagonal() += diag;
  ws.llt.compute(ws.system);
  if (ws.llt.info() != Eigen::Success)
    throw NumericalError("posterior precision matrix is not positive definite");
  phi.setIdentity(q, q);
  ws.llt.solveInPlace(phi);
  // Symmetrize away rounding asymmetry from the triangular solves.
  phi = 0.5 * (phi + phi.transpose()).eval();
  mu.noalias() = precision * aty;
  ws.llt.solveInPlace(mu);
  if (!mu.allFinite() || !phi.allFinite())
    throw NumericalError("posterior is not finite");
}

inline void alpha_update(const Vector& mu, const Matrix& phi, double k,
                         double beta, Vector& out) {
  const Eigen::Index q = mu.size();
  out.resize(q);
  for (Eigen::Index i = 0; i < q; ++i) {
    double neighbours = 0.0;
    if (i > 0) neighbours += mu[i - 1] * mu[i - 1] + phi(i - 1, i - 1);
    if (i + 1 < q) neighbours += mu[i + 1] * mu[i + 1] + phi(i + 1, i + 1);
    const double omega = mu[i] * mu[i] + phi(i, i) + beta * neighbours;
    out[i] = k / (0.5 * omega + kAlphaFloor);
  }
}

inline double gamma_update(double residual_sq, const Matrix& phi,
                           const Vector& coupled, double gamma_prev, double c,
                           double d, double m) {
  double rho_sum = 0.0;
  for (Eigen::Index i = 0; i < coupled.size(); ++i)
    rho_sum += 1.0 - phi(i, i) * coupled[i];
  const double variance =
      (residual_sq + rho_sum / gamma_prev + 2.0 * d) / (m + 2.0 * c);
  if (!(variance > 0.0) || !std::isfinite(variance))
    throw NumericalError("noise variance update is not positive (" +
                         std::to_string(variance) + ")");
  return 1.0 / variance;
}

}  // namespace detail

// D_i = alpha_i + beta * (alpha_{i-1} + alpha_{i+1}); missing neighbours are 0.
inline Vector coupled_precision_diagonal(const Vector& alpha, double beta) {
  Vector out;
  detail::coupled_diagonal(alpha, beta, out);
  return out;
}

inline Posterior posterior(const Matrix& A, const PixelSpectrum& y,
                           const Vector& diag, double noise_precision) {
  if (A.rows() != y.size())
    throw InvalidInput("spectrum length " + std::to_string(y.size()) +
                       " does not match " + std::to_string(A.rows()) +
                       " bands");
  if (A.cols() != diag.size())
    throw InvalidInput("prior diagonal length does not match endmember count");
  if (!(noise_precision > 0.0))
    throw InvalidInput("noise precision must be > 0");
  const Matrix gram = A.transpose() * A;
  const Vector aty = A.transpose() * y;
  detail::PosteriorWorkspace ws;
  Posterior post;
  detail::posterior_from_gram(gram, aty, diag, noise_precision, ws, post.mu,
                              post.phi);
  return post;
}

// EM update: alpha_i = k / (omega_i / 2 + 1e-4) with
//   omega_i = (mu_i^2 + Phi_ii) + w * sum over j in {i-1, i+1} of (mu_j^2 + Phi_jj).
// The neighbour weight w is the coupling beta; at the default w = 1 the
// three terms enter equally, and w = 0 gives the uncoupled SBL update.
inline Vector em_update_alpha(const Vector& mu, const Matrix& phi, double k,
                              double neighbour_weight = 1.0) {
  if (phi.rows() != mu.size() || phi.cols() != mu.size())
    throw InvalidInput("covariance shape does not match mean length");
  Vector out;
  detail::alpha_update(mu, phi, k, neighbour_weight, out);
  return out;
}

// Returns the next noise precision gamma from
//   1/gamma' = (|y - A mu|^2 + sum_i rho_i / gamma + 2d) / (m + 2c),
//   rho_i = 1 - Phi_ii * D_i(alpha, beta).
inline double em_update_gamma(const PixelSpectrum& y, const Matrix& A,
                              const Vector& mu, const Matrix& phi,
                              const Vector& alpha, double beta,
                              double gamma_prev, double c, double d,
                              Eigen::Index m) {
  if (A.rows() != y.size() || A.cols() != mu.size() ||
      alpha.size() != mu.size())
    throw InvalidInput("dimension mismatch in noise precision update");
  if (!(gamma_prev > 0.0)) throw InvalidInput("gamma_prev must be > 0");
  const double residual_sq = (y - A * mu).squaredNorm();
  const Vector coupled = coupled_precision_diagonal(alpha, beta);
  return detail::gamma_update(residual_sq, phi, coupled, gamma_prev, c, d,
                              static_cast<double>(m));
}

// |y - A x|^2 / N
inline double estimate_noise_variance_residual(const PixelSpectrum& y,
                                               const Matrix& A,
                                               const Vector& x_hat) {
  if (A.rows() != y.size() || A.cols() != x_hat.size())
    throw InvalidInput("dimension mismatch in residual variance estimate");
  return (y - A * x_hat).squaredNorm() / static_cast<double>(y.size());
}

// Initial noise precision for the unknown-noise mode: 100 / var(y).
inline double initial_gamma(const PixelSpectrum& y) {
  const double n = static_cast<double>(y.size());
  const double mean = y.sum() / n;
  double var = (y.array() - mean).square().sum() / n;
  if (!(var > 0.0)) var = y.squaredNorm() / n;
  if (!(var > 0.0)) var = 1.0;
  return 100.0 / var;
}

// Precomputed per-scene quantities; A'A is shared by every pixel.
class Problem {
 public:
  explicit Problem(const EndmemberMatrix& A)
      : A_(A.values()), gram_(A_.transpose() * A_) {}

  const Matrix& matrix() const { return A_; }
  const Matrix& gram() const { return gram_; }

  // Observer is called once per iteration with the post-update state.
  template <class Observer>
  SolverResult solve(const PixelSpectrum& y, const SolverOptions& opts,
                     Observer&& observe) const {
    opts.validate();
    if (y.size() != A_.rows())
      throw InvalidInput("spectrum has " + std::to_string(y.size()) +
                         " bands, endmember matrix has " +
                         std::to_string(A_.rows()));
    if (!y.allFinite()) throw InvalidInput("spectrum has non-finite entries");

    const Eigen::Index q = A_.cols();
    const Vector aty = A_.transpose() * y;
    const bool known = opts.known_noise();
    const UnknownNoise hyper =
        known ? UnknownNoise{} : std::get<UnknownNoise>(opts.noise);

    SolverState state;
    state.alpha = Vector::Ones(q);
    state.gamma = known ? 1.0 / std::get<KnownNoise>(opts.noise).variance
                        : initial_gamma(y);
    state.mu = Vector::Zero(q);
    state.phi = Matrix::Zero(q, q);

    detail::PosteriorWorkspace ws;
    Vector diag(q), next_alpha(q), mu_prev(q), residual(y.size());
    SolverResult result;

    for (int it = 1; it <= opts.max_iters; ++it) {
      detail::coupled_diagonal(state.alpha, opts.beta, diag);
      mu_prev = state.mu;
      detail::posterior_from_gram(gram_, aty, diag, state.gamma, ws, state.mu,
                                  state.phi);
      detail::alpha_update(state.mu, state.phi, opts.k, opts.beta, next_alpha);
      if (!known) {
        residual.noalias() = y - A_ * state.mu;
        state.gamma = detail::gamma_update(
            residual.squaredNorm(), state.phi, diag, state.gamma, hyper.c,
            hyper.d, static_cast<double>(y.size()));
      }
      state.alpha.swap(next_alpha);
      state.iteration = it;
      state.change = it > 1 ? (state.mu - mu_prev).norm()
                            : std::numeric_limits<double>::infinity();
      observe(static_cast<const SolverState&>(state));

      result.iterations_used = it;
      result.last_change = state.change;
      if (state.change <= opts.epsilon) {
        result.converged = true;
        break;
      }
    }

    result.raw_estimate = state.mu;
    result.abundances = project_to_constraints(state.mu, opts.asc_postprocess);
    result.final_alpha = state.alpha;
    if (!known) result.estimated_noise_variance = 1.0 / state.gamma;
    return result;
  }

  SolverResult solve(const PixelSpectrum& y, const SolverOptions& opts) const {
    return solve(y, opts, [](const SolverState&) {});
  }

 private:
  Matrix A_;
  Matrix gram_;
};

inline SolverResult unmix_pixel(const EndmemberMatrix& A,
                                const PixelSpectrum& y,
                                const SolverOptions& opts) {
  return Problem(A).solve(y, opts);
}

}  // namespace unmix::pcsbl

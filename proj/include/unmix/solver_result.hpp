#pragma once

#include <optional>

#include "unmix/spectra_model.hpp"

namespace unmix {

// Common output shape for every per-pixel solver.
struct SolverResult {
  // Post-processed estimate (ANC always, ASC if requested).
  AbundanceVector abundances;
  // Estimate before any projection.
  Vector raw_estimate;
  int iterations_used = 0;
  bool converged = false;
  // Norm of the last iterate change (or the solver's own residual measure).
  double last_change = 0.0;
  std::optional<double> estimated_noise_variance;
  // Empty for solvers without hyperparameters.
  Vector final_alpha;
};

}  // namespace unmix

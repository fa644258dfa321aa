#pragma once

// Scene-level unmixing: every pixel solved independently. Each worker writes
// only its own pixel slots, so the output does not depend on thread count
// or visitation order.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "unmix/error.hpp"
#include "unmix/pcsbl.hpp"
#include "unmix/solver_result.hpp"
#include "unmix/spectra_model.hpp"

namespace unmix {

struct PixelDiagnostics {
  int iterations = 0;
  bool converged = false;
  double noise_variance = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
};

struct PixelFailure {
  std::size_t pixel;
  std::string reason;
};

struct CubeResult {
  AbundanceMap abundances;  // post-processed; NaN for failed pixels
  AbundanceMap raw;         // pre-projection estimates; NaN for failed pixels
  std::vector<PixelDiagnostics> diagnostics;
  std::vector<PixelFailure> failures;  // ascending pixel order

  std::size_t failed_pixels() const { return failures.size(); }
};

// Endmember rows matching the cube's retained bands. A may already be
// reduced to the retained bands, or span every band of the cube.
inline EndmemberMatrix endmembers_for_cube(const HyperspectralCube& cube,
                                           const EndmemberMatrix& A) {
  const auto L = static_cast<std::size_t>(A.bands());
  if (L == cube.effective_bands()) return A;
  if (L == cube.bands()) return A.select_bands(cube.band_mask());
  throw InvalidInput("endmember matrix has " + std::to_string(L) +
                     " bands; cube has " + std::to_string(cube.bands()) +
                     " bands (" + std::to_string(cube.effective_bands()) +
                     " retained)");
}

inline unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// solve(const PixelSpectrum&) -> SolverResult
template <class Solve>
CubeResult solve_cube(const HyperspectralCube& cube, std::size_t endmembers,
                      Solve&& solve, unsigned threads = 1) {
  const std::size_t n = cube.pixels();
  CubeResult out;
  out.abundances = AbundanceMap(cube.height(), cube.width(), endmembers);
  out.raw = AbundanceMap(cube.height(), cube.width(), endmembers);
  out.diagnostics.resize(n);
  std::vector<std::string> errors(n);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t p = next.fetch_add(1); p < n; p = next.fetch_add(1)) {
      PixelDiagnostics& diag = out.diagnostics[p];
      try {
        const SolverResult r = solve(cube.retained_spectrum(p));
        out.abundances.pixel(p) = r.abundances;
        out.raw.pixel(p) = r.raw_estimate;
        diag.iterations = r.iterations_used;
        diag.converged = r.converged;
        if (r.estimated_noise_variance) diag.noise_variance = *r.estimated_noise_variance;
      } catch (const std::exception& e) {
        diag.failed = true;
        errors[p] = e.what();
        out.abundances.pixel(p).setConstant(std::numeric_limits<double>::quiet_NaN());
        out.raw.pixel(p).setConstant(std::numeric_limits<double>::quiet_NaN());
      }
    }
  };

  const unsigned t = std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(n, 1));
  if (t <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(t);
    for (unsigned i = 0; i < t; ++i) pool.emplace_back(worker);
  }

  for (std::size_t p = 0; p < n; ++p)
    if (out.diagnostics[p].failed)
      out.failures.push_back({p, "pixel " + std::to_string(p) + " (row " +
                                     std::to_string(p / cube.width()) +
                                     ", col " + std::to_string(p % cube.width()) +
                                     "): " + errors[p]});
  return out;
}

inline CubeResult unmix_cube(const HyperspectralCube& cube,
                             const EndmemberMatrix& A,
                             const pcsbl::SolverOptions& opts,
                             unsigned threads = 1) {
  opts.validate();
  const pcsbl::Problem problem(endmembers_for_cube(cube, A));
  return solve_cube(
      cube, static_cast<std::size_t>(A.endmembers()),
      [&](const PixelSpectrum& y) { return problem.solve(y, opts); }, threads);
}

}  // namespace unmix

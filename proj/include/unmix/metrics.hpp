#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "unmix/error.hpp"
#include "unmix/spectra_model.hpp"

namespace unmix::metrics {

// Angle between two abundance vectors in radians. Either vector being zero
// yields pi/2 rather than NaN.
template <class A, class B>
double aad(const Eigen::MatrixBase<A>& truth, const Eigen::MatrixBase<B>& est) {
  if (truth.size() != est.size())
    throw InvalidInput("abundance vectors differ in length");
  const double nt = truth.norm(), ne = est.norm();
  if (nt == 0.0 || ne == 0.0) return std::numbers::pi / 2.0;
  const double c = std::clamp(truth.dot(est) / (nt * ne), -1.0, 1.0);
  return std::acos(c);
}

template <class A, class B>
bool aad_degenerate(const Eigen::MatrixBase<A>& truth,
                    const Eigen::MatrixBase<B>& est) {
  return truth.norm() == 0.0 || est.norm() == 0.0;
}

template <class A, class B>
double mse(const Eigen::MatrixBase<A>& truth, const Eigen::MatrixBase<B>& est) {
  if (truth.size() != est.size())
    throw InvalidInput("mse: lengths " + std::to_string(truth.size()) +
                       " and " + std::to_string(est.size()) + " differ");
  if (truth.size() == 0) throw InvalidInput("mse: empty vectors");
  return (truth - est).squaredNorm() / static_cast<double>(truth.size());
}

inline double to_degrees(double rad) { return rad * 180.0 / std::numbers::pi; }

struct RunMetadata {
  std::string solver;
  std::optional<double> beta;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
};

struct MetricReport {
  std::size_t height = 0, width = 0;
  std::vector<double> per_pixel_aad;  // NaN for failed pixels
  std::vector<double> per_pixel_mse;  // abundance domain, n = q
  double mean_aad = 0.0;
  double mean_mse = 0.0;
  // Spectrum-domain MSE of y against A x_hat; present when a cube is given.
  std::optional<double> mean_mse_reconstruction;
  std::size_t pixels_failed = 0;
  std::size_t degenerate_aad_pixels = 0;
  RunMetadata metadata;
};

// Pixels whose estimate has a non-finite entry count as failed and are
// excluded from the means.
inline MetricReport evaluate_scene(const AbundanceMap& truth,
                                   const AbundanceMap& estimate,
                                   RunMetadata meta = {},
                                   const HyperspectralCube* observed = nullptr,
                                   const EndmemberMatrix* endmembers = nullptr) {
  if (truth.height() != estimate.height() || truth.width() != estimate.width() ||
      truth.endmembers() != estimate.endmembers())
    throw InvalidInput("truth and estimate maps differ in shape");
  MetricReport r;
  r.height = truth.height();
  r.width = truth.width();
  r.metadata = std::move(meta);
  const std::size_t n = truth.pixels();
  r.per_pixel_aad.assign(n, std::numeric_limits<double>::quiet_NaN());
  r.per_pixel_mse.assign(n, std::numeric_limits<double>::quiet_NaN());

  const bool recon = observed && endmembers;
  Matrix A;
  if (recon) {
    if (observed->pixels() != n)
      throw InvalidInput("observed cube and abundance maps differ in size");
    const auto L = static_cast<std::size_t>(endmembers->bands());
    A = L == observed->effective_bands()
            ? endmembers->values()
            : endmembers->select_bands(observed->band_mask()).values();
    if (static_cast<std::size_t>(A.rows()) != observed->effective_bands())
      throw InvalidInput("endmember bands do not match observed cube");
  }

  double sum_aad = 0.0, sum_mse = 0.0, sum_rec = 0.0;
  std::size_t used = 0;
  for (std::size_t p = 0; p < n; ++p) {
    const auto t = truth.pixel(p);
    const auto e = estimate.pixel(p);
    if (!e.allFinite()) {
      ++r.pixels_failed;
      continue;
    }
    if (aad_degenerate(t, e)) ++r.degenerate_aad_pixels;
    r.per_pixel_aad[p] = aad(t, e);
    r.per_pixel_mse[p] = mse(t, e);
    sum_aad += r.per_pixel_aad[p];
    sum_mse += r.per_pixel_mse[p];
    if (recon) {
      const PixelSpectrum y = observed->retained_spectrum(p);
      sum_rec += mse(y, A * e);
    }
    ++used;
  }
  if (used > 0) {
    r.mean_aad = sum_aad / static_cast<double>(used);
    r.mean_mse = sum_mse / static_cast<double>(used);
    if (recon) r.mean_mse_reconstruction = sum_rec / static_cast<double>(used);
  } else {
    r.mean_aad = r.mean_mse = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

inline constexpr const char* kReportCsvHeader =
    "method,snr_db,beta,seed,mean_mse_abundance,mean_mse_reconstruction,"
    "mean_aad_rad,mean_aad_deg,pixels_failed";

inline std::string report_csv_row(const MetricReport& r) {
  auto f = [](double v) {
    if (std::isnan(v)) return std::string("nan");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  return r.metadata.solver + "," + f(r.metadata.snr_db) + "," +
         (r.metadata.beta ? f(*r.metadata.beta) : std::string("na")) + "," +
         std::to_string(r.metadata.seed) + "," + f(r.mean_mse) + "," +
         f(r.mean_mse_reconstruction.value_or(std::numeric_limits<double>::quiet_NaN())) +
         "," + f(r.mean_aad) + "," + f(to_degrees(r.mean_aad)) + "," +
         std::to_string(r.pixels_failed);
}

}  // namespace unmix::metrics

#pragma once

// Linear mixing model: y = A x + n, one pixel at a time.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "unmix/error.hpp"
#include "unmix/random.hpp"

namespace unmix {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Fractions per endmember. Not constrained by construction; see
// validate_abundance / project_to_constraints.
using AbundanceVector = Vector;
// Reflectance per retained band.
using PixelSpectrum = Vector;

inline std::string dims(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

// L x q matrix whose columns are pure spectral signatures.
class EndmemberMatrix {
 public:
  EndmemberMatrix() = default;

  explicit EndmemberMatrix(Matrix values) : values_(std::move(values)) {
    if (values_.rows() < 1 || values_.cols() < 1)
      throw InvalidInput("endmember matrix must be at least 1x1, got " +
                         dims(values_.rows(), values_.cols()));
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
      bool nonzero = false;
      for (Eigen::Index i = 0; i < values_.rows(); ++i) {
        const double v = values_(i, j);
        if (!std::isfinite(v) || v < 0.0)
          throw InvalidInput("endmember matrix entry (" + std::to_string(i) +
                             ", " + std::to_string(j) +
                             ") is negative or not finite");
        nonzero = nonzero || v != 0.0;
      }
      if (!nonzero)
        throw InvalidInput("endmember column " + std::to_string(j) +
                           " is all zero");
    }
  }

  Eigen::Index bands() const { return values_.rows(); }
  Eigen::Index endmembers() const { return values_.cols(); }
  const Matrix& values() const { return values_; }

  // Rows where mask is true, in order.
  EndmemberMatrix select_bands(std::span<const std::uint8_t> mask) const {
    if (static_cast<Eigen::Index>(mask.size()) != bands())
      throw InvalidInput("band mask length " + std::to_string(mask.size()) +
                         " does not match " + std::to_string(bands()) +
                         " bands");
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) keep.push_back(static_cast<Eigen::Index>(i));
    return EndmemberMatrix(values_(keep, Eigen::all));
  }

 private:
  Matrix values_;
};

class NoiseModel {
 public:
  explicit NoiseModel(double variance) : variance_(variance) {
    if (!(variance > 0.0) || !std::isfinite(variance))
      throw InvalidInput("noise variance must be positive and finite");
  }
  double variance() const { return variance_; }
  double stddev() const { return std::sqrt(variance_); }

 private:
  double variance_;
};

// H x W x L reflectance cube stored band-interleaved-by-pixel.
class HyperspectralCube {
 public:
  HyperspectralCube() = default;

  HyperspectralCube(std::size_t height, std::size_t width, std::size_t bands)
      : HyperspectralCube(height, width, bands,
                          std::vector<double>(height * width * bands, 0.0)) {}

  HyperspectralCube(std::size_t height, std::size_t width, std::size_t bands,
                    std::vector<double> data)
      : height_(height),
        width_(width),
        bands_(bands),
        data_(std::move(data)),
        band_mask_(bands, 1) {
    if (bands == 0) throw InvalidInput("cube must have at least one band");
    if (data_.size() != height * width * bands)
      throw InvalidInput("cube payload has " + std::to_string(data_.size()) +
                         " values, expected " +
                         std::to_string(height * width * bands));
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t bands() const { return bands_; }
  std::size_t pixels() const { return height_ * width_; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  std::span<const double> pixel(std::size_t row, std::size_t col) const {
    return {data_.data() + (row * width_ + col) * bands_, bands_};
  }
  std::span<double> pixel(std::size_t row, std::size_t col) {
    return {data_.data() + (row * width_ + col) * bands_, bands_};
  }
  double& at(std::size_t row, std::size_t col, std::size_t band) {
    return data_[(row * width_ + col) * bands_ + band];
  }
  double at(std::size_t row, std::size_t col, std::size_t band) const {
    return data_[(row * width_ + col) * bands_ + band];
  }

  const std::vector<std::uint8_t>& band_mask() const { return band_mask_; }

  void set_band_mask(std::vector<std::uint8_t> mask) {
    if (mask.size() != bands_)
      throw InvalidInput("band mask length " + std::to_string(mask.size()) +
                         " does not match " + std::to_string(bands_) +
                         " bands");
    band_mask_ = std::move(mask);
  }

  std::size_t effective_bands() const {
    std::size_t n = 0;
    for (auto m : band_mask_) n += m ? 1 : 0;
    return n;
  }

  // Retained bands of one pixel, flattened index = row * width + col.
  PixelSpectrum retained_spectrum(std::size_t index) const {
    PixelSpectrum y(static_cast<Eigen::Index>(effective_bands()));
    const double* p = data_.data() + index * bands_;
    Eigen::Index k = 0;
    for (std::size_t b = 0; b < bands_; ++b)
      if (band_mask_[b]) y[k++] = p[b];
    return y;
  }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t bands_ = 0;
  std::vector<double> data_;
  std::vector<std::uint8_t> band_mask_;
};

// H x W stack of q-vectors, pixel-interleaved.
class AbundanceMap {
 public:
  AbundanceMap() = default;
  AbundanceMap(std::size_t height, std::size_t width, std::size_t endmembers)
      : height_(height),
        width_(width),
        endmembers_(endmembers),
        data_(height * width * endmembers, 0.0) {}
  AbundanceMap(std::size_t height, std::size_t width, std::size_t endmembers,
               std::vector<double> data)
      : height_(height),
        width_(width),
        endmembers_(endmembers),
        data_(std::move(data)) {
    if (data_.size() != height * width * endmembers)
      throw InvalidInput("abundance payload has " +
                         std::to_string(data_.size()) + " values, expected " +
                         std::to_string(height * width * endmembers));
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t endmembers() const { return endmembers_; }
  std::size_t pixels() const { return height_ * width_; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  Eigen::Map<const Vector> pixel(std::size_t index) const {
    return Eigen::Map<const Vector>(data_.data() + index * endmembers_,
                                    static_cast<Eigen::Index>(endmembers_));
  }
  Eigen::Map<Vector> pixel(std::size_t index) {
    return Eigen::Map<Vector>(data_.data() + index * endmembers_,
                              static_cast<Eigen::Index>(endmembers_));
  }
  Eigen::Map<const Vector> pixel(std::size_t row, std::size_t col) const {
    return pixel(row * width_ + col);
  }
  Eigen::Map<Vector> pixel(std::size_t row, std::size_t col) {
    return pixel(row * width_ + col);
  }
  double& at(std::size_t row, std::size_t col, std::size_t j) {
    return data_[(row * width_ + col) * endmembers_ + j];
  }
  double at(std::size_t row, std::size_t col, std::size_t j) const {
    return data_[(row * width_ + col) * endmembers_ + j];
  }

  bool operator==(const AbundanceMap&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t endmembers_ = 0;
  std::vector<double> data_;
};

// y = A x (+ n). With no noise model the result is exact and the seed unused.
inline PixelSpectrum forward_mix(const EndmemberMatrix& A,
                                 const AbundanceVector& x,
                                 const std::optional<NoiseModel>& noise,
                                 std::uint64_t seed) {
  if (x.size() != A.endmembers())
    throw InvalidInput("abundance length " + std::to_string(x.size()) +
                       " does not match " + std::to_string(A.endmembers()) +
                       " endmembers");
  PixelSpectrum y = A.values() * x;
  if (noise) {
    Rng rng(seed);
    const double sd = noise->stddev();
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += sd * rng.normal();
  }
  return y;
}

inline PixelSpectrum forward_mix(const EndmemberMatrix& A,
                                 const AbundanceVector& x) {
  return forward_mix(A, x, std::nullopt, 0);
}

struct ConstraintViolation {
  enum class Kind { Nonnegativity, SumToOne };
  Kind kind;
  // Entry index for nonnegativity violations; unused for sum-to-one.
  Eigen::Index index;
  double magnitude;
};

struct ValidationReport {
  std::vector<ConstraintViolation> violations;

  bool ok() const { return violations.empty(); }
  bool has(ConstraintViolation::Kind kind) const {
    for (const auto& v : violations)
      if (v.kind == kind) return true;
    return false;
  }
};

inline ValidationReport validate_abundance(const AbundanceVector& x,
                                           bool enforce_asc,
                                           double tolerance = 1e-9) {
  ValidationReport report;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x[i] < 0.0)
      report.violations.push_back(
          {ConstraintViolation::Kind::Nonnegativity, i, -x[i]});
  if (enforce_asc) {
    const double gap = std::abs(x.sum() - 1.0);
    if (gap > tolerance)
      report.violations.push_back(
          {ConstraintViolation::Kind::SumToOne, -1, gap});
  }
  return report;
}

// Clip to x >= 0, optionally rescale to sum one. An all-zero clipped vector
// becomes the equal mixture 1/q.
inline AbundanceVector project_to_constraints(const Vector& x_raw,
                                              bool enforce_asc) {
  AbundanceVector x = x_raw.cwiseMax(0.0);
  const double sum = x.sum();
  if (sum == 0.0) {
    if (x.size() > 0) x.setConstant(1.0 / static_cast<double>(x.size()));
    return x;
  }
  if (enforce_asc && sum != 1.0) x /= sum;
  return x;
}

}  // namespace unmix

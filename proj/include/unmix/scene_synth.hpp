#pragma once

// Synthetic scene protocol:
//   pick q library signatures -> one pure endmember per block -> k x k box
//   filter -> replace pixels purer than a threshold by the equal mixture ->
//   mix -> white Gaussian noise at a requested SNR.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "unmix/error.hpp"
#include "unmix/io.hpp"
#include "unmix/random.hpp"
#include "unmix/spectra_model.hpp"

namespace unmix::synth {

enum class Boundary { Replicate, Periodic };

inline const char* to_string(Boundary b) {
  return b == Boundary::Periodic ? "periodic" : "replicate";
}

inline Boundary parse_boundary(const std::string& s) {
  if (s == "replicate") return Boundary::Replicate;
  if (s == "periodic") return Boundary::Periodic;
  throw InvalidInput("unknown boundary mode '" + s + "'");
}

// snr_db = +inf means no noise.
inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

struct SceneSpec {
  std::size_t height = 50;
  std::size_t width = 50;
  std::size_t block_size = 5;
  std::size_t num_endmembers = 12;
  std::size_t filter_size = 5;
  double purity_threshold = 0.8;
  double snr_db = 25.0;
  std::uint64_t seed = 1;
  Boundary boundary = Boundary::Replicate;

  void validate() const {
    if (block_size == 0) throw InvalidInput("block_size must be positive");
    if (height == 0 || width == 0)
      throw InvalidInput("scene dimensions must be positive");
    if (height % block_size != 0 || width % block_size != 0)
      throw InvalidInput("height and width must be multiples of block_size");
    if (num_endmembers == 0)
      throw InvalidInput("num_endmembers must be positive");
    if (filter_size % 2 == 0) throw InvalidInput("filter_size must be odd");
    if (filter_size > std::min(height, width))
      throw InvalidInput("filter_size exceeds scene size");
    // 1.0 is accepted as the "no replacement" sentinel.
    if (!(purity_threshold > 0.0 && purity_threshold <= 1.0))
      throw InvalidInput("purity_threshold must lie in (0, 1]");
    if (std::isnan(snr_db)) throw InvalidInput("snr_db is NaN");
  }
};

struct SyntheticScene {
  HyperspectralCube cube;
  HyperspectralCube clean;
  AbundanceMap ground_truth;
  EndmemberMatrix endmembers;
  double applied_sigma2 = 0.0;
};

// ------------------------------------------------------------- library

inline constexpr std::size_t kLibraryBands = 224;
inline constexpr std::size_t kLibrarySignatures = 240;
inline constexpr std::uint64_t kLibrarySeed = 20220317;
inline constexpr double kWavelengthMin = 0.38;  // micrometres
inline constexpr double kWavelengthMax = 2.5;

// Deterministic stand-in for a mineral reflectance library: a sloped
// continuum in [0.4, 0.7] with one to three shallow Gaussian absorption
// features (depth 0.025 to 0.175), clipped to [0.01, 1]. Columns are
// signatures. Random 12-member subsets have condition numbers of a few
// hundred.
inline Matrix bundled_library(std::size_t signatures = kLibrarySignatures,
                              std::size_t bands = kLibraryBands,
                              std::uint64_t seed = kLibrarySeed) {
  Rng rng(seed);
  Matrix lib(static_cast<Eigen::Index>(bands),
             static_cast<Eigen::Index>(signatures));
  const double mid = 0.5 * (kWavelengthMin + kWavelengthMax);
  for (std::size_t s = 0; s < signatures; ++s) {
    const double level = rng.uniform(0.4, 0.7);
    const double slope = rng.uniform(-0.15, 0.15);
    const int features = 1 + static_cast<int>(rng.below(3));
    double centre[3], width[3], depth[3];
    for (int f = 0; f < features; ++f) {
      centre[f] = rng.uniform(0.4, 2.45);
      width[f] = rng.uniform(0.02, 0.25);
      depth[f] = rng.uniform(0.025, 0.175);
    }
    for (std::size_t b = 0; b < bands; ++b) {
      const double w =
          bands == 1 ? kWavelengthMin
                     : kWavelengthMin + (kWavelengthMax - kWavelengthMin) *
                                            static_cast<double>(b) /
                                            static_cast<double>(bands - 1);
      double r = level + slope * (w - mid);
      for (int f = 0; f < features; ++f) {
        const double z = (w - centre[f]) / width[f];
        r -= depth[f] * std::exp(-0.5 * z * z);
      }
      lib(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(s)) =
          std::clamp(r, 0.01, 1.0);
    }
  }
  return lib;
}

// q distinct columns in seeded random order (partial Fisher-Yates).
inline EndmemberMatrix select_endmembers(const Matrix& library, std::size_t q,
                                         std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(library.cols());
  if (q == 0) throw InvalidInput("must select at least one endmember");
  if (n < q)
    throw InvalidInput("library has " + std::to_string(n) +
                       " signatures, need " + std::to_string(q));
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < q; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(order[i], order[j]);
  }
  order.resize(q);
  return EndmemberMatrix(library(Eigen::all, order));
}

inline EndmemberMatrix load_spectral_library(const std::filesystem::path& path,
                                             std::size_t q,
                                             std::uint64_t seed) {
  const Matrix lib = io::read_csv_matrix(path);
  if (static_cast<std::size_t>(lib.cols()) < q)
    throw InvalidInput(path.string() + ": library has " +
                       std::to_string(lib.cols()) + " signatures, need " +
                       std::to_string(q));
  return select_endmembers(lib, q, seed);
}

// ---------------------------------------------------------- abundances

inline AbundanceMap generate_block_abundances(const SceneSpec& spec,
                                              std::uint64_t seed) {
  spec.validate();
  AbundanceMap map(spec.height, spec.width, spec.num_endmembers);
  Rng rng(seed);
  const std::size_t brows = spec.height / spec.block_size;
  const std::size_t bcols = spec.width / spec.block_size;
  for (std::size_t br = 0; br < brows; ++br)
    for (std::size_t bc = 0; bc < bcols; ++bc) {
      const auto label = static_cast<std::size_t>(rng.below(spec.num_endmembers));
      for (std::size_t r = 0; r < spec.block_size; ++r)
        for (std::size_t c = 0; c < spec.block_size; ++c)
          map.at(br * spec.block_size + r, bc * spec.block_size + c, label) = 1.0;
    }
  return map;
}

// k x k box filter per abundance channel.
inline AbundanceMap lowpass_mix(const AbundanceMap& map, std::size_t k,
                                Boundary boundary = Boundary::Replicate) {
  const std::size_t H = map.height(), W = map.width(), q = map.endmembers();
  if (k % 2 == 0) throw InvalidInput("filter size must be odd");
  if (k > std::min(H, W)) throw InvalidInput("filter size exceeds map size");
  const auto half = static_cast<std::ptrdiff_t>(k / 2);
  auto wrap = [boundary](std::ptrdiff_t i, std::size_t n) -> std::size_t {
    const auto sn = static_cast<std::ptrdiff_t>(n);
    if (boundary == Boundary::Periodic) return static_cast<std::size_t>(((i % sn) + sn) % sn);
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, sn - 1));
  };
  const double norm = 1.0 / static_cast<double>(k * k);

  // Separable: horizontal pass, then vertical.
  AbundanceMap horiz(H, W, q), out(H, W, q);
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c)
      for (std::ptrdiff_t dc = -half; dc <= half; ++dc) {
        const std::size_t cc = wrap(static_cast<std::ptrdiff_t>(c) + dc, W);
        for (std::size_t j = 0; j < q; ++j) horiz.at(r, c, j) += map.at(r, cc, j);
      }
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      for (std::ptrdiff_t dr = -half; dr <= half; ++dr) {
        const std::size_t rr = wrap(static_cast<std::ptrdiff_t>(r) + dr, H);
        for (std::size_t j = 0; j < q; ++j) out.at(r, c, j) += horiz.at(rr, c, j);
      }
      for (std::size_t j = 0; j < q; ++j) out.at(r, c, j) *= norm;
    }
  return out;
}

// Pixels whose largest fraction exceeds the threshold become (1/q, ..., 1/q).
inline AbundanceMap remove_pure_pixels(const AbundanceMap& map,
                                       double threshold) {
  AbundanceMap out = map;
  const double uniform = 1.0 / static_cast<double>(map.endmembers());
  for (std::size_t p = 0; p < out.pixels(); ++p) {
    auto v = out.pixel(p);
    if (v.maxCoeff() > threshold) v.setConstant(uniform);
  }
  return out;
}

// ---------------------------------------------------------------- noise

inline double mean_pixel_energy(const HyperspectralCube& cube) {
  double total = 0.0;
  for (double v : cube.data()) total += v * v;
  return total / static_cast<double>(cube.pixels());
}

inline double realized_snr_db(const HyperspectralCube& clean,
                              const HyperspectralCube& noisy) {
  double signal = 0.0, noise = 0.0;
  const auto a = clean.data(), b = noisy.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    signal += a[i] * a[i];
    noise += (b[i] - a[i]) * (b[i] - a[i]);
  }
  return 10.0 * std::log10(signal / noise);
}

// sigma^2 = mean pixel energy / (bands * 10^(snr/10)), computed over the
// whole scene; noise drawn pixel by pixel in storage order.
inline std::pair<HyperspectralCube, double> inject_noise_at_snr(
    const HyperspectralCube& clean, double snr_db, std::uint64_t seed) {
  if (std::isnan(snr_db)) throw InvalidInput("snr_db is NaN");
  const double energy = mean_pixel_energy(clean);
  if (!(energy > 0.0))
    throw InvalidInput("cannot set an SNR on an all-zero cube");
  if (!std::isfinite(energy)) throw InvalidInput("cube has non-finite values");
  if (snr_db == kNoNoise) return {clean, 0.0};

  const double sigma2 = energy / (static_cast<double>(clean.bands()) *
                                  std::pow(10.0, snr_db / 10.0));
  const double sd = std::sqrt(sigma2);
  HyperspectralCube noisy = clean;
  Rng rng(seed);
  for (double& v : noisy.data()) v += sd * rng.normal();
  return {std::move(noisy), sigma2};
}

// ----------------------------------------------------------- pipeline

// Sub-seed tags so each stage draws from its own stream.
enum SeedTag : std::uint64_t { kSelectTag = 1, kBlockTag = 2, kNoiseTag = 3 };

inline HyperspectralCube mix_map(const AbundanceMap& map,
                                 const EndmemberMatrix& A) {
  if (map.endmembers() != static_cast<std::size_t>(A.endmembers()))
    throw InvalidInput("abundance map and endmember matrix disagree on q");
  const auto L = static_cast<std::size_t>(A.bands());
  HyperspectralCube cube(map.height(), map.width(), L);
  for (std::size_t p = 0; p < map.pixels(); ++p) {
    Eigen::Map<Vector> y(cube.data().data() + p * L, static_cast<Eigen::Index>(L));
    y.noalias() = A.values() * map.pixel(p);
  }
  return cube;
}

inline SyntheticScene build_scene(const SceneSpec& spec, const Matrix& library) {
  spec.validate();
  SyntheticScene scene;
  scene.endmembers = select_endmembers(
      library, spec.num_endmembers, derive_seed(spec.seed, {kSelectTag}));
  AbundanceMap map =
      generate_block_abundances(spec, derive_seed(spec.seed, {kBlockTag}));
  map = lowpass_mix(map, spec.filter_size, spec.boundary);
  if (spec.purity_threshold < 1.0)
    map = remove_pure_pixels(map, spec.purity_threshold);
  scene.ground_truth = std::move(map);
  scene.clean = mix_map(scene.ground_truth, scene.endmembers);
  auto [noisy, sigma2] = inject_noise_at_snr(
      scene.clean, spec.snr_db, derive_seed(spec.seed, {kNoiseTag}));
  scene.cube = std::move(noisy);
  scene.applied_sigma2 = sigma2;
  return scene;
}

inline SyntheticScene build_scene(const SceneSpec& spec,
                                  const std::optional<std::filesystem::path>& library_path) {
  if (library_path) return build_scene(spec, io::read_csv_matrix(*library_path));
  return build_scene(spec, bundled_library());
}

// --------------------------------------------------------------- bundle

struct BundleFiles {
  static constexpr const char* kCube = "cube.bin";
  static constexpr const char* kCubeHeader = "cube.hdr";
  static constexpr const char* kTruth = "truth.bin";
  static constexpr const char* kTruthHeader = "truth.hdr";
  static constexpr const char* kEndmembers = "endmembers.csv";
  static constexpr const char* kProvenance = "provenance.txt";
};

inline std::string format_snr(double snr_db) {
  return snr_db == kNoNoise ? std::string("inf") : io::format_double(snr_db);
}

inline std::string provenance_text(const SceneSpec& spec, double sigma2,
                                   const std::string& library) {
  std::string t;
  t += "rng = " + std::string(Rng::kName) + "\n";
  t += "seed = " + std::to_string(spec.seed) + "\n";
  t += "height = " + std::to_string(spec.height) + "\n";
  t += "width = " + std::to_string(spec.width) + "\n";
  t += "block_size = " + std::to_string(spec.block_size) + "\n";
  t += "num_endmembers = " + std::to_string(spec.num_endmembers) + "\n";
  t += "filter_size = " + std::to_string(spec.filter_size) + "\n";
  t += "purity_threshold = " + io::format_double(spec.purity_threshold) + "\n";
  t += "boundary = " + std::string(to_string(spec.boundary)) + "\n";
  t += "snr_db = " + format_snr(spec.snr_db) + "\n";
  t += "sigma2 = " + io::format_double(sigma2) + "\n";
  t += "library = " + library + "\n";
  return t;
}

inline void write_scene_bundle(const std::filesystem::path& dir,
                               const SyntheticScene& scene,
                               const SceneSpec& spec,
                               const std::string& library_name) {
  std::filesystem::create_directories(dir);
  io::write_cube(dir / BundleFiles::kCube, dir / BundleFiles::kCubeHeader,
                 scene.cube);
  io::write_abundances(dir / BundleFiles::kTruth,
                       dir / BundleFiles::kTruthHeader, scene.ground_truth);
  io::write_endmembers(dir / BundleFiles::kEndmembers, scene.endmembers);
  io::write_text(dir / BundleFiles::kProvenance,
                 provenance_text(spec, scene.applied_sigma2, library_name));
}

struct LoadedBundle {
  HyperspectralCube cube;
  AbundanceMap ground_truth;
  EndmemberMatrix endmembers;
  io::Header provenance;
  std::optional<double> sigma2;
};

inline LoadedBundle read_scene_bundle(const std::filesystem::path& dir) {
  LoadedBundle b;
  b.cube = io::read_cube(dir / BundleFiles::kCube, dir / BundleFiles::kCubeHeader);
  b.ground_truth = io::read_abundances(dir / BundleFiles::kTruth,
                                       dir / BundleFiles::kTruthHeader);
  b.endmembers = io::read_endmembers(dir / BundleFiles::kEndmembers);
  if (std::filesystem::exists(dir / BundleFiles::kProvenance)) {
    b.provenance = io::read_header(dir / BundleFiles::kProvenance);
    if (auto it = b.provenance.find("sigma2"); it != b.provenance.end())
      b.sigma2 = io::parse_double(it->second, "provenance sigma2");
  }
  if (b.ground_truth.height() != b.cube.height() ||
      b.ground_truth.width() != b.cube.width())
    throw DataFormatError(dir.string() + ": truth and cube sizes differ");
  return b;
}

}  // namespace unmix::synth

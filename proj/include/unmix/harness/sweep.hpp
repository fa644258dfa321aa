#pragma once

// SNR x beta x seed sweeps over the configured solvers. Computation and
// CSV assembly are separate; rows are emitted in grid order
// (solver, snr, beta, seed) no matter how cells were scheduled.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "unmix/baseline.hpp"
#include "unmix/cube.hpp"
#include "unmix/error.hpp"
#include "unmix/harness/config.hpp"
#include "unmix/io.hpp"
#include "unmix/metrics.hpp"
#include "unmix/pcsbl.hpp"
#include "unmix/scene_synth.hpp"

namespace unmix::harness {

// Known-noise solves on a noiseless scene use this variance.
inline constexpr double kNoiselessVarianceProxy = 1e-8;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct CellResult {
  std::string method;
  double snr_db = 0.0;
  std::optional<double> beta;
  std::uint64_t seed = 0;
  double mse_abundance = kNaN;
  double mse_reconstruction = kNaN;
  double aad_rad = kNaN;
  double raw_mse_abundance = kNaN;
  double raw_aad_rad = kNaN;
  std::size_t pixels_failed = 0;
  std::optional<double> lambda;
  double mean_iterations = kNaN;
  double converged_fraction = kNaN;
  std::string error;

  bool ok() const { return error.empty(); }
};

struct SummaryRow {
  std::string method;
  std::optional<double> beta;
  double snr_db = 0.0;
  std::size_t seeds = 0;  // cells contributing
  double mean_mse_abundance = kNaN;
  double std_mse_abundance = kNaN;
  double mean_mse_reconstruction = kNaN;
  double mean_aad_rad = kNaN;
  double std_aad_rad = kNaN;
  double raw_mse_abundance = kNaN;
  double raw_aad_rad = kNaN;
  std::optional<double> lambda;
};

struct SweepResult {
  std::vector<CellResult> cells;
  std::vector<SummaryRow> summary;
  std::string config_hash;
};

// A scene as seen by the solvers: noisy cube, truth, endmembers, sigma^2.
struct EvalScene {
  HyperspectralCube cube;
  AbundanceMap truth;
  EndmemberMatrix endmembers;
  std::optional<double> sigma2;
};

inline std::vector<std::uint8_t> band_mask_excluding(std::size_t bands,
                                                     const std::vector<std::size_t>& exclude) {
  std::vector<std::uint8_t> mask(bands, 1);
  for (auto b : exclude) {
    if (b >= bands)
      throw InvalidInput("excluded band " + std::to_string(b) + " >= " +
                         std::to_string(bands) + " bands");
    mask[b] = 0;
  }
  return mask;
}

// Loads a cube and marks the listed bands as excluded.
inline HyperspectralCube ingest_real_cube(const fs::path& cube_path,
                                          const fs::path& header_path,
                                          const std::vector<std::size_t>& band_exclude) {
  HyperspectralCube cube = io::read_cube(cube_path, header_path);
  cube.set_band_mask(band_mask_excluding(cube.bands(), band_exclude));
  if (cube.effective_bands() == 0) throw InvalidInput("every band is excluded");
  return cube;
}

namespace detail {

struct CubeRun {
  CubeResult result;
  std::optional<double> lambda;
};

inline CubeRun run_method(const EvalScene& scene, const std::string& method,
                          std::optional<double> beta, std::optional<double> lambda,
                          const ExperimentConfig& cfg) {
  const std::size_t q = static_cast<std::size_t>(scene.endmembers.endmembers());
  const EndmemberMatrix A = endmembers_for_cube(scene.cube, scene.endmembers);
  if (method == "pcsbl-known" || method == "pcsbl-unknown") {
    pcsbl::SolverOptions opts = cfg.pcsbl;
    opts.beta = *beta;
    if (method == "pcsbl-known") {
      if (!scene.sigma2)
        throw InvalidInput("pcsbl-known needs the scene noise variance");
      opts.noise = pcsbl::KnownNoise{*scene.sigma2 > 0.0 ? *scene.sigma2
                                                          : kNoiselessVarianceProxy};
    }
    return {unmix_cube(scene.cube, A, opts, cfg.threads), std::nullopt};
  }
  baseline::BaselineOptions opts = cfg.baseline;
  if (method == "admm-l1") {
    opts.lambda = *lambda;
    const baseline::AdmmProblem problem(A);
    return {solve_cube(scene.cube, q,
                       [&](const PixelSpectrum& y) { return problem.solve(y, opts); },
                       cfg.threads),
            lambda};
  }
  if (method == "nnls") {
    const baseline::NnlsProblem problem(A);
    return {solve_cube(scene.cube, q,
                       [&](const PixelSpectrum& y) { return problem.solve(y, opts); },
                       cfg.threads),
            std::nullopt};
  }
  throw InvalidInput("unknown solver '" + method + "'");
}

inline void fill_metrics(CellResult& cell, const EvalScene& scene, const CubeRun& run) {
  const auto& r = run.result;
  const auto primary = metrics::evaluate_scene(scene.truth, r.abundances, {},
                                               &scene.cube, &scene.endmembers);
  const auto raw = metrics::evaluate_scene(scene.truth, r.raw);
  cell.mse_abundance = primary.mean_mse;
  cell.aad_rad = primary.mean_aad;
  cell.mse_reconstruction = primary.mean_mse_reconstruction.value_or(kNaN);
  cell.raw_mse_abundance = raw.mean_mse;
  cell.raw_aad_rad = raw.mean_aad;
  cell.pixels_failed = r.failed_pixels();
  cell.lambda = run.lambda;
  double iters = 0.0, conv = 0.0;
  for (const auto& d : r.diagnostics) {
    iters += d.iterations;
    conv += d.converged ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(std::max<std::size_t>(r.diagnostics.size(), 1));
  cell.mean_iterations = iters / n;
  cell.converged_fraction = conv / n;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? kNaN : s / static_cast<double>(v.size());
}

inline double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return v.empty() ? kNaN : 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace detail

inline EvalScene make_eval_scene(const ExperimentConfig& cfg, double snr_db,
                                 std::uint64_t seed, const Matrix* library) {
  EvalScene s;
  if (cfg.scene_bundle) {
    auto b = synth::read_scene_bundle(*cfg.scene_bundle);
    s.cube = std::move(b.cube);
    s.truth = std::move(b.ground_truth);
    s.endmembers = std::move(b.endmembers);
    s.sigma2 = b.sigma2;
  } else {
    synth::SceneSpec spec = cfg.scene;
    spec.snr_db = snr_db;
    spec.seed = seed;
    auto scene = synth::build_scene(spec, *library);
    s.cube = std::move(scene.cube);
    s.truth = std::move(scene.ground_truth);
    s.endmembers = std::move(scene.endmembers);
    s.sigma2 = scene.applied_sigma2;
  }
  if (!cfg.band_exclude.empty())
    s.cube.set_band_mask(band_mask_excluding(s.cube.bands(), cfg.band_exclude));
  return s;
}

inline SweepResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  SweepResult out;
  out.config_hash = cfg.hash();

  // A scene bundle fixes the SNR and seed; they come from its provenance.
  std::vector<double> snrs = cfg.snr_grid;
  std::vector<std::uint64_t> seeds = cfg.seeds;
  if (cfg.scene_bundle) {
    const auto prov = synth::read_scene_bundle(*cfg.scene_bundle).provenance;
    auto snr_it = prov.find("snr_db");
    auto seed_it = prov.find("seed");
    snrs = {snr_it == prov.end() ? kNaN : to_double(snr_it->second, "snr_db")};
    seeds = {seed_it == prov.end() ? 0 : to_u64(seed_it->second, "seed")};
  }

  std::optional<Matrix> library;
  if (!cfg.scene_bundle)
    library = cfg.library ? io::read_csv_matrix(*cfg.library) : synth::bundled_library();

  // (method, beta index or -1, lambda index or -1, snr index, seed index)
  using Key = std::tuple<std::string, int, int, std::size_t, std::size_t>;
  std::map<Key, CellResult> cells;

  for (std::size_t si = 0; si < snrs.size(); ++si) {
    for (std::size_t ki = 0; ki < seeds.size(); ++ki) {
      std::optional<EvalScene> scene;
      std::string scene_error;
      try {
        scene = make_eval_scene(cfg, snrs[si], seeds[ki], library ? &*library : nullptr);
      } catch (const std::exception& e) {
        scene_error = std::string("scene: ") + e.what();
      }
      auto run_cell = [&](const std::string& method, int bi, int li) {
        CellResult cell;
        cell.method = method;
        cell.snr_db = snrs[si];
        cell.seed = seeds[ki];
        if (bi >= 0) cell.beta = cfg.beta_grid[static_cast<std::size_t>(bi)];
        if (li >= 0) cell.lambda = cfg.lambda_grid[static_cast<std::size_t>(li)];
        if (!scene) {
          cell.error = scene_error;
        } else {
          try {
            fill_metrics(cell, *scene,
                         detail::run_method(*scene, method, cell.beta, cell.lambda, cfg));
          } catch (const std::exception& e) {
            cell.error = e.what();
          }
        }
        cells[{method, bi, li, si, ki}] = std::move(cell);
      };
      for (const auto& method : cfg.solvers) {
        if (uses_beta(method)) {
          for (std::size_t bi = 0; bi < cfg.beta_grid.size(); ++bi)
            run_cell(method, static_cast<int>(bi), -1);
        } else if (method == "admm-l1") {
          for (std::size_t li = 0; li < cfg.lambda_grid.size(); ++li)
            run_cell(method, -1, static_cast<int>(li));
        } else {
          run_cell(method, -1, -1);
        }
      }
    }
  }

  // Lambda per SNR: lowest seed-averaged mean AAD.
  auto chosen_lambda = [&](std::size_t si) {
    int best = 0;
    double best_aad = std::numeric_limits<double>::infinity();
    for (std::size_t li = 0; li < cfg.lambda_grid.size(); ++li) {
      std::vector<double> a;
      for (std::size_t ki = 0; ki < seeds.size(); ++ki) {
        const auto& c = cells.at({"admm-l1", -1, static_cast<int>(li), si, ki});
        if (c.ok() && std::isfinite(c.aad_rad)) a.push_back(c.aad_rad);
      }
      const double m = detail::mean_of(a);
      if (std::isfinite(m) && m < best_aad) {
        best_aad = m;
        best = static_cast<int>(li);
      }
    }
    return best;
  };

  for (const auto& method : cfg.solvers) {
    const int nb = uses_beta(method) ? static_cast<int>(cfg.beta_grid.size()) : 1;
    for (std::size_t si = 0; si < snrs.size(); ++si) {
      const int li = method == "admm-l1" ? chosen_lambda(si) : -1;
      for (int b = 0; b < nb; ++b) {
        const int bi = uses_beta(method) ? b : -1;
        SummaryRow row;
        row.method = method;
        row.snr_db = snrs[si];
        if (bi >= 0) row.beta = cfg.beta_grid[static_cast<std::size_t>(bi)];
        if (li >= 0) row.lambda = cfg.lambda_grid[static_cast<std::size_t>(li)];
        std::vector<double> mse, rec, aad, rmse, raad;
        for (std::size_t ki = 0; ki < seeds.size(); ++ki) {
          const CellResult& c = cells.at({method, bi, li, si, ki});
          out.cells.push_back(c);
          if (!c.ok()) continue;
          auto push = [](std::vector<double>& v, double x) {
            if (std::isfinite(x)) v.push_back(x);
          };
          push(mse, c.mse_abundance);
          push(rec, c.mse_reconstruction);
          push(aad, c.aad_rad);
          push(rmse, c.raw_mse_abundance);
          push(raad, c.raw_aad_rad);
        }
        row.seeds = mse.size();
        row.mean_mse_abundance = detail::mean_of(mse);
        row.std_mse_abundance = detail::sample_std(mse);
        row.mean_mse_reconstruction = detail::mean_of(rec);
        row.mean_aad_rad = detail::mean_of(aad);
        row.std_aad_rad = detail::sample_std(aad);
        row.raw_mse_abundance = detail::mean_of(rmse);
        row.raw_aad_rad = detail::mean_of(raad);
        out.summary.push_back(row);
      }
    }
  }
  return out;
}

// ------------------------------------------------------------------ CSV

inline std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt_num(*v) : std::string("na");
}

// Commas and newlines would break the row; error text is flattened.
inline std::string csv_text(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  return s;
}

inline constexpr const char* kResultsHeader =
    "method,snr_db,beta,seed,mean_mse_abundance,mean_mse_reconstruction,"
    "mean_aad_rad,mean_aad_deg,pixels_failed,raw_mse_abundance,raw_aad_rad,"
    "lambda,mean_iterations,converged_fraction,config_hash,error";

inline std::string results_csv(const SweepResult& r) {
  std::string t = std::string(kResultsHeader) + "\n";
  for (const auto& c : r.cells) {
    t += c.method + "," + fmt_num(c.snr_db) + "," + fmt_opt(c.beta) + "," +
         std::to_string(c.seed) + "," + fmt_num(c.mse_abundance) + "," +
         fmt_num(c.mse_reconstruction) + "," + fmt_num(c.aad_rad) + "," +
         fmt_num(metrics::to_degrees(c.aad_rad)) + "," +
         std::to_string(c.pixels_failed) + "," + fmt_num(c.raw_mse_abundance) +
         "," + fmt_num(c.raw_aad_rad) + "," + fmt_opt(c.lambda) + "," +
         fmt_num(c.mean_iterations) + "," + fmt_num(c.converged_fraction) + "," +
         r.config_hash + "," + csv_text(c.error) + "\n";
  }
  return t;
}

inline constexpr const char* kSummaryHeader =
    "method,beta,snr_db,seeds,mean_mse_abundance,std_mse_abundance,"
    "mean_mse_reconstruction,mean_aad_rad,std_aad_rad,mean_aad_deg,"
    "raw_mse_abundance,raw_aad_rad,lambda,config_hash";

inline std::string summary_csv(const SweepResult& r) {
  std::string t = std::string(kSummaryHeader) + "\n";
  for (const auto& s : r.summary) {
    t += s.method + "," + fmt_opt(s.beta) + "," + fmt_num(s.snr_db) + "," +
         std::to_string(s.seeds) + "," + fmt_num(s.mean_mse_abundance) + "," +
         fmt_num(s.std_mse_abundance) + "," + fmt_num(s.mean_mse_reconstruction) +
         "," + fmt_num(s.mean_aad_rad) + "," + fmt_num(s.std_aad_rad) + "," +
         fmt_num(metrics::to_degrees(s.mean_aad_rad)) + "," +
         fmt_num(s.raw_mse_abundance) + "," + fmt_num(s.raw_aad_rad) + "," +
         fmt_opt(s.lambda) + "," + r.config_hash + "\n";
  }
  return t;
}

inline std::string method_label(const SummaryRow& s) {
  return s.beta ? s.method + " beta=" + fmt_num(*s.beta) : s.method;
}

// Rows = methods, columns = SNR.
template <class Metric>
std::string table_csv(const SweepResult& r, Metric metric) {
  std::vector<double> snrs;
  std::vector<std::string> labels;
  std::map<std::pair<std::string, std::string>, double> cells;
  for (const auto& s : r.summary) {
    const std::string snr = fmt_num(s.snr_db);
    if (std::find_if(snrs.begin(), snrs.end(), [&](double v) { return fmt_num(v) == snr; }) ==
        snrs.end())
      snrs.push_back(s.snr_db);
    const std::string label = method_label(s);
    if (std::find(labels.begin(), labels.end(), label) == labels.end())
      labels.push_back(label);
    cells[{label, snr}] = metric(s);
  }
  std::string t = "method";
  for (double s : snrs) t += "," + fmt_num(s);
  t += "\n";
  for (const auto& label : labels) {
    t += label;
    for (double s : snrs) {
      auto it = cells.find({label, fmt_num(s)});
      t += "," + (it == cells.end() ? std::string("nan") : fmt_num(it->second));
    }
    t += "\n";
  }
  return t;
}

struct SweepFiles {
  static constexpr const char* kResults = "results.csv";
  static constexpr const char* kSummary = "summary.csv";
  static constexpr const char* kTableMse = "table_mse.csv";
  static constexpr const char* kTableAad = "table_aad.csv";
  static constexpr const char* kTableAadDeg = "table_aad_deg.csv";
  static constexpr const char* kProvenance = "provenance.txt";
};

inline void write_sweep(const SweepResult& r, const ExperimentConfig& cfg,
                        const fs::path& dir) {
  fs::create_directories(dir);
  io::write_text(dir / SweepFiles::kResults, results_csv(r));
  io::write_text(dir / SweepFiles::kSummary, summary_csv(r));
  io::write_text(dir / SweepFiles::kTableMse,
                 table_csv(r, [](const SummaryRow& s) { return s.mean_mse_abundance; }));
  io::write_text(dir / SweepFiles::kTableAad,
                 table_csv(r, [](const SummaryRow& s) { return s.mean_aad_rad; }));
  io::write_text(dir / SweepFiles::kTableAadDeg, table_csv(r, [](const SummaryRow& s) {
                   return metrics::to_degrees(s.mean_aad_rad);
                 }));
  io::write_text(dir / SweepFiles::kProvenance,
                 cfg.canonical() + "config_hash=" + r.config_hash + "\n");
}

}  // namespace unmix::harness

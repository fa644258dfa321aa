// unmix: scene generation, per-pixel unmixing, evaluation, sweeps, maps.
//
// Exit status: 0 ok, 1 usage/config, 2 data format, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "unmix/baseline.hpp"
#include "unmix/cube.hpp"
#include "unmix/error.hpp"
#include "unmix/harness/config.hpp"
#include "unmix/harness/maps.hpp"
#include "unmix/harness/plot.hpp"
#include "unmix/harness/sweep.hpp"
#include "unmix/io.hpp"
#include "unmix/metrics.hpp"
#include "unmix/pcsbl.hpp"
#include "unmix/scene_synth.hpp"

namespace fs = std::filesystem;
using namespace unmix;

namespace {

constexpr int kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3;

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config,--spec", config_path, "key = value config file");
    app->add_option("--set", overrides, "override a config key (key=value), repeatable");
  }

  harness::Config load() const {
    harness::Config c;
    if (!config_path.empty()) c = harness::Config::load(config_path);
    for (const auto& o : overrides) c.override_with(o);
    return c;
  }
};

const char* kEstimateData = "abundances.bin";
const char* kEstimateHeader = "abundances.hdr";
const char* kDiagnostics = "diagnostics.csv";

void write_diagnostics(const fs::path& path, const CubeResult& r, std::size_t width) {
  std::string t = "row,col,iterations,converged,noise_variance,failed\n";
  for (std::size_t p = 0; p < r.diagnostics.size(); ++p) {
    const auto& d = r.diagnostics[p];
    t += std::to_string(p / width) + "," + std::to_string(p % width) + "," +
         std::to_string(d.iterations) + "," + (d.converged ? "1" : "0") + "," +
         harness::fmt_num(d.noise_variance) + "," + (d.failed ? "1" : "0") + "\n";
  }
  io::write_text(path, t);
}

std::vector<std::size_t> parse_indices(const std::string& list, std::size_t q) {
  std::vector<std::size_t> out;
  if (list.empty() || list == "all") {
    for (std::size_t j = 0; j < q; ++j) out.push_back(j);
    return out;
  }
  harness::Config tmp;
  tmp.add("i", list);
  for (const auto& s : tmp.list("i")) out.push_back(io::parse_count(s, "endmember index"));
  return out;
}

int run_generate(const ConfigArgs& args, const std::string& library, const std::string& out) {
  harness::Config c = args.load();
  if (!library.empty()) c.set("library", library);
  const auto cfg = harness::ExperimentConfig::from(c);
  if (cfg.snr_grid.size() > 1 || cfg.seeds.size() > 1)
    throw InvalidInput("generate takes a single snr and seed");
  const auto scene = synth::build_scene(cfg.scene, cfg.library);
  const fs::path dir = out.empty() ? cfg.output_dir : fs::path(out);
  synth::write_scene_bundle(dir, scene, cfg.scene,
                            cfg.library ? cfg.library->string() : "bundled");
  std::cout << "wrote scene bundle to " << dir.string() << " (sigma2 = "
            << harness::fmt_num(scene.applied_sigma2) << ")\n";
  return kExitOk;
}

struct UnmixArgs {
  std::string bundle, cube, header, endmembers, out, solver = "pcsbl-known";
  std::optional<double> beta, noise_variance;
};

int run_unmix(const ConfigArgs& args, const UnmixArgs& u) {
  const auto cfg = harness::ExperimentConfig::from(args.load());
  HyperspectralCube cube;
  std::optional<EndmemberMatrix> A;
  std::optional<double> sigma2 = u.noise_variance;
  if (!u.bundle.empty()) {
    auto b = synth::read_scene_bundle(u.bundle);
    cube = std::move(b.cube);
    A = std::move(b.endmembers);
    if (!sigma2) sigma2 = b.sigma2;
  } else {
    if (u.cube.empty() || u.header.empty())
      throw InvalidInput("unmix needs --bundle or --cube with --header");
    cube = io::read_cube(u.cube, u.header);
  }
  if (!u.endmembers.empty()) A = io::read_endmembers(u.endmembers);
  if (!A) throw InvalidInput("unmix needs --endmembers when no bundle is given");
  cube.set_band_mask(harness::band_mask_excluding(cube.bands(), cfg.band_exclude));

  harness::EvalScene scene{std::move(cube), AbundanceMap{}, std::move(*A), sigma2};
  const double beta = u.beta.value_or(cfg.beta_grid.front());
  const auto run = harness::detail::run_method(scene, u.solver, beta,
                                               cfg.lambda_grid.front(), cfg);
  const fs::path dir = u.out.empty() ? cfg.output_dir : fs::path(u.out);
  fs::create_directories(dir);
  io::write_abundances(dir / kEstimateData, dir / kEstimateHeader, run.result.abundances);
  write_diagnostics(dir / kDiagnostics, run.result, scene.cube.width());
  std::cout << "unmixed " << scene.cube.pixels() << " pixels with " << u.solver
            << "; failed: " << run.result.failed_pixels() << "\n";
  return run.result.failed_pixels() == scene.cube.pixels() && scene.cube.pixels() > 0
             ? kExitNumerical
             : kExitOk;
}

struct EvaluateArgs {
  std::string bundle, estimate, out, solver = "unknown";
  std::optional<double> beta;
};

int run_evaluate(const EvaluateArgs& e) {
  const auto b = synth::read_scene_bundle(e.bundle);
  const fs::path est_dir = e.estimate;
  const auto est = io::read_abundances(est_dir / kEstimateData, est_dir / kEstimateHeader);
  metrics::RunMetadata meta;
  meta.solver = e.solver;
  meta.beta = e.beta;
  if (auto it = b.provenance.find("snr_db"); it != b.provenance.end())
    meta.snr_db = harness::to_double(it->second, "snr_db");
  if (auto it = b.provenance.find("seed"); it != b.provenance.end())
    meta.seed = harness::to_u64(it->second, "seed");
  const auto report = metrics::evaluate_scene(b.ground_truth, est, meta, &b.cube, &b.endmembers);
  const std::string text = std::string(metrics::kReportCsvHeader) + "\n" +
                           metrics::report_csv_row(report) + "\n";
  if (e.out.empty())
    std::cout << text;
  else
    io::write_text(e.out, text);
  return kExitOk;
}

int run_sweep(const ConfigArgs& args, const std::string& out) {
  harness::Config c = args.load();
  if (!out.empty()) c.set("output_dir", out);
  const auto cfg = harness::ExperimentConfig::from(c);
  const auto result = harness::run_sweep(cfg);
  harness::write_sweep(result, cfg, cfg.output_dir);
  std::size_t errors = 0;
  for (const auto& cell : result.cells) errors += cell.ok() ? 0 : 1;
  std::cout << "sweep: " << result.cells.size() << " cells, " << errors << " failed, "
            << "config " << result.config_hash << ", written to "
            << cfg.output_dir.string() << "\n";
  std::cout << harness::table_csv(result, [](const harness::SummaryRow& s) {
    return s.mean_mse_abundance;
  });
  return kExitOk;
}

int run_export(const std::string& bundle, const std::string& estimate,
               const std::string& indices, const std::string& out) {
  AbundanceMap map;
  std::string meta;
  if (!estimate.empty()) {
    const fs::path d = estimate;
    map = io::read_abundances(d / kEstimateData, d / kEstimateHeader);
    meta = "source=estimate";
  } else if (!bundle.empty()) {
    map = synth::read_scene_bundle(bundle).ground_truth;
    meta = "source=ground_truth";
  } else {
    throw InvalidInput("export-maps needs --estimate or --bundle");
  }
  const auto written =
      harness::export_abundance_maps(map, parse_indices(indices, map.endmembers()), out, meta);
  std::cout << "wrote " << written.size() << " map(s) to " << out << "\n";
  return kExitOk;
}

int run_plot(const std::string& summary, const std::string& out) {
  const auto written = harness::plot_sweep(summary, out);
  for (const auto& p : written) std::cout << p.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperspectral unmixing toolkit"};
  app.require_subcommand(1);

  ConfigArgs gen_cfg, unmix_cfg, sweep_cfg;
  std::string gen_library, gen_out;
  auto* gen = app.add_subcommand("generate", "synthesize a scene bundle");
  gen_cfg.attach(gen);
  gen->add_option("--library", gen_library, "spectral library CSV (default: bundled)");
  gen->add_option("--out", gen_out, "bundle directory");

  UnmixArgs ua;
  auto* unm = app.add_subcommand("unmix", "estimate abundances for every pixel");
  unmix_cfg.attach(unm);
  unm->add_option("--bundle", ua.bundle, "scene bundle directory");
  unm->add_option("--cube", ua.cube, "cube payload (f64 LE, BIP)");
  unm->add_option("--header", ua.header, "cube header");
  unm->add_option("--endmembers", ua.endmembers, "endmember CSV (bands x endmembers)");
  unm->add_option("--solver", ua.solver, "pcsbl-known | pcsbl-unknown | admm-l1 | nnls");
  unm->add_option("--beta", ua.beta, "coupling parameter");
  unm->add_option("--noise-variance", ua.noise_variance, "sigma^2 for pcsbl-known");
  unm->add_option("--out", ua.out, "output directory");

  EvaluateArgs ea;
  auto* eva = app.add_subcommand("evaluate", "score an estimate against a bundle");
  eva->add_option("--bundle", ea.bundle, "scene bundle with ground truth")->required();
  eva->add_option("--estimate", ea.estimate, "directory written by unmix")->required();
  eva->add_option("--solver", ea.solver, "label for the report row");
  eva->add_option("--beta", ea.beta, "beta label for the report row");
  eva->add_option("--out", ea.out, "CSV output (default: stdout)");

  std::string sweep_out;
  auto* swp = app.add_subcommand("sweep", "run the SNR x beta x seed grid");
  sweep_cfg.attach(swp);
  swp->add_option("--out", sweep_out, "output directory (overrides output_dir)");

  std::string ex_bundle, ex_estimate, ex_indices, ex_out;
  auto* exp = app.add_subcommand("export-maps", "write abundance maps as PGM");
  exp->add_option("--bundle", ex_bundle, "export the bundle's ground truth");
  exp->add_option("--estimate", ex_estimate, "export an unmix output directory");
  exp->add_option("--endmembers", ex_indices, "comma-separated indices or 'all'");
  exp->add_option("--out", ex_out, "output directory")->required();

  std::string plot_summary, plot_out;
  auto* plt = app.add_subcommand("plot", "SVG charts from a sweep summary");
  plt->add_option("--summary", plot_summary, "summary.csv from sweep")->required();
  plt->add_option("--out", plot_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return run_generate(gen_cfg, gen_library, gen_out);
    if (*unm) return run_unmix(unmix_cfg, ua);
    if (*eva) return run_evaluate(ea);
    if (*swp) return run_sweep(sweep_cfg, sweep_out);
    if (*exp) return run_export(ex_bundle, ex_estimate, ex_indices, ex_out);
    if (*plt) return run_plot(plot_summary, plot_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::DataFormat: return kExitData;
      case ErrorKind::Numerical: return kExitNumerical;
      default: return kExitUsage;
    }
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

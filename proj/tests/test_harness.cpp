#include <gtest/gtest.h>

#include <cmath>
#include <regex>
#include <sstream>

#include "temp_dir.hpp"
#include "unmix/harness/config.hpp"
#include "unmix/harness/maps.hpp"
#include "unmix/harness/plot.hpp"
#include "unmix/harness/sweep.hpp"

using namespace unmix;
using namespace unmix::harness;

namespace {

Config parse(const std::string& text) {
  std::istringstream in(text);
  return Config::parse(in, "test");
}

// Small, fast grid: 10x10 scene, 40 bands.
const char* kSmall =
    "height = 10\nwidth = 10\nnum_endmembers = 4\nfilter_size = 3\n"
    "library = LIB\n";

std::string small_config(const std::filesystem::path& lib, const std::string& extra) {
  std::string t = kSmall;
  t.replace(t.find("LIB"), 3, lib.string());
  return t + extra;
}

std::filesystem::path write_small_library(const std::filesystem::path& dir) {
  io::write_csv_matrix(dir / "lib.csv", synth::bundled_library(16, 40));
  return dir / "lib.csv";
}

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

// ---------------------------------------------------------------- config

TEST(Config, ListsByRepetitionAndCommas) {
  const auto c = parse("snr = 15, 20\nsnr = 25\n# note\nbeta=1\n");
  EXPECT_EQ(c.list("snr"), (std::vector<std::string>{"15", "20", "25"}));
  EXPECT_EQ(c.one("beta"), "1");
  EXPECT_THROW(c.one("snr"), InvalidInput);
}

TEST(Config, OverrideReplacesAllValues) {
  auto c = parse("seed = 1\nseed = 2\n");
  c.override_with("seed=7,8");
  EXPECT_EQ(c.list("seed"), (std::vector<std::string>{"7", "8"}));
  EXPECT_THROW(c.override_with("seed"), InvalidInput);
}

TEST(Config, ExperimentFromKeys) {
  const auto e = ExperimentConfig::from(
      parse("solver = pcsbl-known, admm-l1\nsnr = 15,40\nbeta = 0.1,0.5,1\nseed = 1,2,3\n"
            "admm_lambda = 1e-4, 1e-3\nk = 2\nband_exclude = 0, 3\nthreads = 2\n"));
  EXPECT_EQ(e.solvers.size(), 2u);
  EXPECT_EQ(e.snr_grid, (std::vector<double>{15, 40}));
  EXPECT_EQ(e.beta_grid.size(), 3u);
  EXPECT_EQ(e.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(e.lambda_grid.size(), 2u);
  EXPECT_EQ(e.pcsbl.k, 2.0);
  EXPECT_EQ(e.band_exclude, (std::vector<std::size_t>{0, 3}));
  EXPECT_EQ(e.threads, 2u);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(ExperimentConfig::from(parse("colour = blue\n")), InvalidInput);
  EXPECT_THROW(ExperimentConfig::from(parse("solver = sunsal\n")), InvalidInput);
  EXPECT_THROW(ExperimentConfig::from(parse("seed = 1, 1\n")), InvalidInput);
  EXPECT_THROW(ExperimentConfig::from(parse("snr = loud\n")), InvalidInput);
  EXPECT_THROW(ExperimentConfig::from(parse("rng = pcg32\n")), InvalidInput);
  EXPECT_THROW(ExperimentConfig::from(parse("beta = -1\n")), InvalidInput);
  EXPECT_THROW(parse("just words\n"), InvalidInput);
}

TEST(Config, HashIgnoresThreadsAndOutput) {
  const auto a = ExperimentConfig::from(parse("seed = 1\nthreads = 1\noutput_dir = a\n"));
  const auto b = ExperimentConfig::from(parse("seed = 1\nthreads = 4\noutput_dir = b\n"));
  const auto c = ExperimentConfig::from(parse("seed = 2\n"));
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(a.hash().size(), 16u);
}

// ---------------------------------------------------------------- sweep

TEST(Sweep, SingleCellGrid) {
  const auto dir = fresh_dir();
  const auto cfg = ExperimentConfig::from(parse(small_config(write_small_library(dir), "")));
  const auto r = run_sweep(cfg);
  ASSERT_EQ(r.cells.size(), 1u);
  ASSERT_EQ(r.summary.size(), 1u);
  EXPECT_TRUE(r.cells[0].ok()) << r.cells[0].error;
  write_sweep(r, cfg, dir / "out");
  EXPECT_EQ(count_lines(slurp(dir / "out" / SweepFiles::kResults)), 2u);
  EXPECT_EQ(count_lines(slurp(dir / "out" / SweepFiles::kSummary)), 2u);
  const std::string results = slurp(dir / "out" / SweepFiles::kResults);
  EXPECT_EQ(results.substr(0, results.find('\n')), kResultsHeader);
  EXPECT_NE(results.find(r.config_hash), std::string::npos);
}

TEST(Sweep, GridOrderAndTableShape) {
  const auto dir = fresh_dir();
  const auto cfg = ExperimentConfig::from(parse(small_config(
      write_small_library(dir),
      "solver = pcsbl-known, admm-l1, nnls\nsnr = 20, 30, 40\nbeta = 0.5, 1\nseed = 1, 2\n"
      "admm_lambda = 1e-4, 1e-2\n")));
  const auto r = run_sweep(cfg);
  // pcsbl: 3 snr x 2 beta x 2 seeds; admm: 3 x 2 (chosen lambda only); nnls: 3 x 2.
  EXPECT_EQ(r.cells.size(), 12u + 6u + 6u);
  EXPECT_EQ(r.summary.size(), 6u + 3u + 3u);
  EXPECT_EQ(r.cells[0].method, "pcsbl-known");
  EXPECT_EQ(r.cells[0].snr_db, 20.0);
  EXPECT_EQ(*r.cells[0].beta, 0.5);
  EXPECT_EQ(r.cells[1].seed, 2u);
  EXPECT_EQ(*r.cells[2].beta, 1.0);
  EXPECT_EQ(r.cells[4].snr_db, 30.0);
  for (const auto& c : r.cells) EXPECT_TRUE(c.ok()) << c.method << ": " << c.error;
  for (const auto& s : r.summary)
    if (s.method == "admm-l1") {
      ASSERT_TRUE(s.lambda);
    } else {
      EXPECT_FALSE(s.lambda);
    }
  const std::string table = table_csv(r, [](const SummaryRow& s) { return s.mean_mse_abundance; });
  std::istringstream in(table);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "method,20,30,40");
  std::vector<std::string> labels;
  while (std::getline(in, line)) labels.push_back(line.substr(0, line.find(',')));
  EXPECT_EQ(labels, (std::vector<std::string>{"pcsbl-known beta=0.5", "pcsbl-known beta=1",
                                              "admm-l1", "nnls"}));
}

TEST(Sweep, ByteIdenticalAcrossRunsAndThreads) {
  const auto dir = fresh_dir();
  const std::string base = small_config(
      write_small_library(dir), "solver = pcsbl-known, pcsbl-unknown\nsnr = 25\nseed = 1, 2\n");
  auto run = [&](const std::string& extra, const std::filesystem::path& out) {
    const auto cfg = ExperimentConfig::from(parse(base + extra));
    write_sweep(run_sweep(cfg), cfg, out);
  };
  run("threads = 1\n", dir / "a");
  run("threads = 1\n", dir / "b");
  run("threads = 4\n", dir / "c");
  for (const char* f : {SweepFiles::kResults, SweepFiles::kSummary, SweepFiles::kTableMse,
                        SweepFiles::kTableAad, SweepFiles::kProvenance}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "c" / f)) << f;
  }
}

TEST(Sweep, FailedCellRecordedAndSweepContinues) {
  const auto dir = fresh_dir();
  // Band 45 does not exist in a 40-band scene.
  const auto cfg = ExperimentConfig::from(
      parse(small_config(write_small_library(dir), "band_exclude = 45\nsolver = nnls\n")));
  const auto r = run_sweep(cfg);
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_FALSE(r.cells[0].ok());
  EXPECT_NE(r.cells[0].error.find("45"), std::string::npos);
  EXPECT_EQ(r.summary[0].seeds, 0u);
  EXPECT_TRUE(std::isnan(r.summary[0].mean_mse_abundance));
}

TEST(Sweep, SceneBundleInput) {
  const auto dir = fresh_dir();
  synth::SceneSpec spec;
  spec.height = spec.width = 10;
  spec.num_endmembers = 4;
  spec.filter_size = 3;
  spec.snr_db = 30;
  spec.seed = 9;
  const auto scene = synth::build_scene(spec, synth::bundled_library(16, 40));
  synth::write_scene_bundle(dir / "bundle", scene, spec, "test");
  const auto cfg = ExperimentConfig::from(
      parse("scene_bundle = " + (dir / "bundle").string() + "\nsolver = pcsbl-known\n"));
  const auto r = run_sweep(cfg);
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_TRUE(r.cells[0].ok()) << r.cells[0].error;
  EXPECT_EQ(r.cells[0].snr_db, 30.0);
  EXPECT_EQ(r.cells[0].seed, 9u);
}

TEST(Sweep, BandExclusionReducesBands) {
  const auto dir = fresh_dir();
  const auto lib = write_small_library(dir);
  const auto cfg = ExperimentConfig::from(parse(small_config(lib, "band_exclude = 0,1,2,39\n")));
  const Matrix library = io::read_csv_matrix(lib);
  const auto scene = make_eval_scene(cfg, 25.0, 1, &library);
  EXPECT_EQ(scene.cube.effective_bands(), 36u);
  const auto r = run_sweep(cfg);
  EXPECT_TRUE(r.cells[0].ok()) << r.cells[0].error;
}

// ---------------------------------------------------------------- maps

TEST(Maps, HalfRoundsUp) {
  EXPECT_EQ(quantize(0.5), 128);
  EXPECT_EQ(quantize(0.0), 0);
  EXPECT_EQ(quantize(1.0), 255);
  EXPECT_EQ(quantize(-0.2), 0);
  EXPECT_EQ(quantize(1.7), 255);
  EXPECT_EQ(quantize(std::nan("")), 0);
}

TEST(Maps, ConstantHalfMap) {
  const auto dir = fresh_dir();
  AbundanceMap m(4, 6, 2, std::vector<double>(48, 0.5));
  export_abundance_maps(m, {1}, dir);
  const auto img = read_pgm(dir / "endmember_1.pgm");
  EXPECT_EQ(img.width, 6u);
  EXPECT_EQ(img.height, 4u);
  for (auto v : img.pixels) EXPECT_EQ(v, 128);
  EXPECT_NE(img.comment.find("endmember=1"), std::string::npos);
}

TEST(Maps, OneHotBlocksAreBlackAndWhite) {
  const auto dir = fresh_dir();
  synth::SceneSpec s;
  s.height = s.width = 10;
  s.num_endmembers = 3;
  const auto truth = synth::generate_block_abundances(s, 4);
  export_abundance_maps(truth, {0, 1, 2}, dir);
  for (std::size_t j = 0; j < 3; ++j) {
    const auto img = read_pgm(dir / ("endmember_" + std::to_string(j) + ".pgm"));
    for (std::size_t p = 0; p < 100; ++p)
      EXPECT_EQ(img.pixels[p], truth.pixel(p)[Eigen::Index(j)] == 1.0 ? 255 : 0);
  }
}

TEST(Maps, RoundTripWithinQuantization) {
  const auto dir = fresh_dir();
  Rng rng(3);
  AbundanceMap m(7, 5, 3);
  for (double& v : m.data()) v = rng.uniform();
  export_abundance_maps(m, {0, 2}, dir, "seed=3");
  for (std::size_t j : {0u, 2u}) {
    const auto img = read_pgm(dir / ("endmember_" + std::to_string(j) + ".pgm"));
    EXPECT_NE(img.comment.find("seed=3"), std::string::npos);
    for (std::size_t p = 0; p < 35; ++p)
      EXPECT_LE(std::abs(dequantize(img.pixels[p]) - m.pixel(p)[Eigen::Index(j)]), 1.0 / 255);
  }
}

TEST(Maps, IndexOutOfRange) {
  const auto dir = fresh_dir();
  EXPECT_THROW(export_abundance_maps(AbundanceMap(2, 2, 3), {3}, dir), InvalidInput);
  EXPECT_FALSE(std::filesystem::exists(dir / "endmember_3.pgm"));
}

TEST(Maps, RejectsTruncatedPgm) {
  const auto dir = fresh_dir();
  io::write_text(dir / "t.pgm", "P5\n4 4\n255\nabc");
  EXPECT_THROW(read_pgm(dir / "t.pgm"), DataFormatError);
  io::write_text(dir / "u.pgm", "P2\n1 1\n255\n0");
  EXPECT_THROW(read_pgm(dir / "u.pgm"), DataFormatError);
}

// ---------------------------------------------------------------- plots

namespace {

std::filesystem::path write_summary(const std::filesystem::path& dir, const std::string& rows) {
  io::write_text(dir / "summary.csv", std::string(kSummaryHeader) + "\n" + rows);
  return dir / "summary.csv";
}

std::string row(const std::string& method, const std::string& beta, double snr, double mse) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%s,%.10g,5,%.10g,0,0.001,0.5,0,28.6,0,0.5,na,abc\n",
                method.c_str(), beta.c_str(), snr, mse);
  return buf;
}

struct Marker {
  std::string label;
  double cy, snr, value;
};

std::vector<Marker> markers(const std::string& svg) {
  std::vector<Marker> out;
  const std::regex group("<g class=\"series\" data-label=\"([^\"]*)\">");
  const std::regex circle(
      "<circle cx=\"[^\"]*\" cy=\"([^\"]*)\" r=\"3\" fill=\"[^\"]*\" data-snr=\"([^\"]*)\" "
      "data-value=\"([^\"]*)\"/>");
  std::string label;
  std::istringstream in(svg);
  std::string line;
  std::smatch m;
  while (std::getline(in, line)) {
    if (std::regex_search(line, m, group)) label = m[1];
    if (std::regex_search(line, m, circle))
      out.push_back({label, std::stod(m[1]), std::stod(m[2]), std::stod(m[3])});
  }
  return out;
}

}  // namespace

TEST(Plot, SinglePointSeriesHasNoLine) {
  const auto dir = fresh_dir();
  plot_sweep(write_summary(dir, row("nnls", "na", 25, 0.004)), dir);
  const std::string svg = slurp(dir / PlotFiles::kMse);
  EXPECT_EQ(markers(svg).size(), 1u);
  EXPECT_EQ(svg.find("<polyline"), std::string::npos);
}

TEST(Plot, DecreasingSeriesDescendsOnScreen) {
  const auto dir = fresh_dir();
  const double vals[] = {0.02, 0.01, 0.004, 0.002, 0.0008, 0.0004};
  std::string rows;
  for (int i = 0; i < 6; ++i) rows += row("pcsbl-known", "1", 15 + 5 * i, vals[i]);
  plot_sweep(write_summary(dir, rows), dir);
  const auto ms = markers(slurp(dir / PlotFiles::kMse));
  ASSERT_EQ(ms.size(), 6u);
  // SVG y grows downward: smaller values sit lower, so cy increases.
  for (std::size_t i = 1; i < ms.size(); ++i) EXPECT_GT(ms[i].cy, ms[i - 1].cy);
}

TEST(Plot, EmbeddedValuesMatchCsv) {
  const auto dir = fresh_dir();
  std::string rows;
  std::vector<std::tuple<std::string, std::string, double, double>> expect;
  Rng rng(5);
  for (const char* beta : {"0.1", "1"})
    for (double snr : {15.0, 25.0, 40.0}) {
      const double v = std::exp(rng.uniform(-9, -3));
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.10g", v);
      rows += row("pcsbl-known", beta, snr, v);
      expect.emplace_back(std::string("pcsbl-known beta=") + beta, beta, snr, std::stod(buf));
    }
  plot_sweep(write_summary(dir, rows), dir);
  const auto ms = markers(slurp(dir / PlotFiles::kMse));
  ASSERT_EQ(ms.size(), expect.size());
  for (std::size_t i = 0; i < ms.size(); ++i) {
    EXPECT_EQ(ms[i].label, std::get<0>(expect[i]));
    EXPECT_EQ(ms[i].snr, std::get<2>(expect[i]));
    EXPECT_EQ(ms[i].value, std::get<3>(expect[i]));
  }
  EXPECT_TRUE(std::filesystem::exists(dir / PlotFiles::kAad));
  EXPECT_TRUE(std::filesystem::exists(dir / PlotFiles::kRecon));
}

TEST(Plot, EmptyCsvRejected) {
  const auto dir = fresh_dir();
  io::write_text(dir / "empty.csv", "");
  EXPECT_THROW(plot_sweep(dir / "empty.csv", dir), DataFormatError);
  EXPECT_THROW(plot_sweep(write_summary(dir, ""), dir), DataFormatError);
}

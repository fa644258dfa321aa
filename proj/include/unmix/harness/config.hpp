#pragma once

// Plain-text experiment configuration: `key = value` per line, '#'
// comments, lists by repeating a key or by commas. Command-line overrides
// replace every value of a key.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "unmix/baseline.hpp"
#include "unmix/error.hpp"
#include "unmix/io.hpp"
#include "unmix/pcsbl.hpp"
#include "unmix/scene_synth.hpp"

namespace unmix::harness {

namespace fs = std::filesystem;

class Config {
 public:
  static Config parse(std::istream& in, const std::string& name) {
    Config c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      if (io::trim(line).empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw InvalidInput(name + ":" + std::to_string(lineno) +
                           ": expected 'key = value'");
      c.add(io::trim(line.substr(0, eq)), io::trim(line.substr(eq + 1)));
    }
    return c;
  }

  static Config load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open config " + path.string());
    return parse(in, path.string());
  }

  void add(const std::string& key, const std::string& value) {
    if (key.empty()) throw InvalidInput("empty config key");
    auto& vals = values_[key];
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = io::trim(item);
      if (!item.empty()) vals.push_back(item);
    }
  }

  // "key=value" from the command line; replaces earlier values.
  void override_with(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
      throw InvalidInput("override '" + assignment + "' is not key=value");
    const std::string key = io::trim(assignment.substr(0, eq));
    values_.erase(key);
    add(key, assignment.substr(eq + 1));
  }

  void set(const std::string& key, const std::string& value) {
    values_.erase(key);
    add(key, value);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  const std::vector<std::string>& list(const std::string& key) const {
    static const std::vector<std::string> empty;
    auto it = values_.find(key);
    return it == values_.end() ? empty : it->second;
  }

  std::optional<std::string> one(const std::string& key) const {
    const auto& v = list(key);
    if (v.empty()) return std::nullopt;
    if (v.size() > 1)
      throw InvalidInput("config key '" + key + "' expects one value, got " +
                         std::to_string(v.size()));
    return v.front();
  }

  std::vector<std::string> keys() const {
    std::vector<std::string> k;
    for (const auto& [key, _] : values_) k.push_back(key);
    return k;
  }

 private:
  std::map<std::string, std::vector<std::string>> values_;
};

inline double to_double(const std::string& s, const std::string& key) {
  if (s == "inf" || s == "none") return synth::kNoNoise;
  try {
    return io::parse_double(s, "config key '" + key + "'");
  } catch (const DataFormatError& e) {
    throw InvalidInput(e.what());
  }
}

inline std::uint64_t to_u64(const std::string& s, const std::string& key) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw InvalidInput("config key '" + key + "': '" + s +
                       "' is not a non-negative integer");
  return std::stoull(s);
}

inline bool to_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw InvalidInput("config key '" + key + "': '" + s + "' is not a boolean");
}

inline const std::vector<std::string>& known_solvers() {
  static const std::vector<std::string> s{"pcsbl-known", "pcsbl-unknown",
                                          "admm-l1", "nnls"};
  return s;
}

inline bool uses_beta(const std::string& solver) {
  return solver.rfind("pcsbl", 0) == 0;
}

struct ExperimentConfig {
  synth::SceneSpec scene;
  std::optional<fs::path> scene_bundle;
  std::optional<fs::path> library;
  std::vector<std::string> solvers{"pcsbl-known"};
  std::vector<double> snr_grid{25.0};
  std::vector<double> beta_grid{1.0};
  std::vector<std::uint64_t> seeds{1};
  fs::path output_dir{"out"};
  std::vector<std::size_t> band_exclude;

  pcsbl::SolverOptions pcsbl;
  baseline::BaselineOptions baseline;
  std::vector<double> lambda_grid{1e-3};
  unsigned threads = 1;

  void validate() const {
    if (solvers.empty()) throw InvalidInput("no solvers configured");
    for (const auto& s : solvers)
      if (std::find(known_solvers().begin(), known_solvers().end(), s) ==
          known_solvers().end())
        throw InvalidInput("unknown solver '" + s + "'");
    if (std::set<std::string>(solvers.begin(), solvers.end()).size() !=
        solvers.size())
      throw InvalidInput("solver listed twice");
    if (snr_grid.empty()) throw InvalidInput("empty SNR grid");
    if (beta_grid.empty()) throw InvalidInput("empty beta grid");
    if (seeds.empty()) throw InvalidInput("no seeds configured");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
      throw InvalidInput("seeds must be distinct");
    if (lambda_grid.empty()) throw InvalidInput("empty lambda grid");
    for (double b : beta_grid)
      if (!(b >= 0.0)) throw InvalidInput("beta values must be >= 0");
    if (!scene_bundle) scene.validate();
    pcsbl.validate();
    baseline.validate();
  }

  static ExperimentConfig from(const Config& c) {
    ExperimentConfig e;
    auto num = [&](const char* key, auto& field) {
      if (auto v = c.one(key)) {
        if constexpr (std::is_same_v<std::decay_t<decltype(field)>, double>)
          field = to_double(*v, key);
        else if constexpr (std::is_same_v<std::decay_t<decltype(field)>, int>)
          field = static_cast<int>(to_u64(*v, key));
        else
          field = static_cast<std::decay_t<decltype(field)>>(to_u64(*v, key));
      }
    };
    num("height", e.scene.height);
    num("width", e.scene.width);
    num("block_size", e.scene.block_size);
    num("num_endmembers", e.scene.num_endmembers);
    num("filter_size", e.scene.filter_size);
    num("purity_threshold", e.scene.purity_threshold);
    if (auto v = c.one("boundary")) e.scene.boundary = synth::parse_boundary(*v);
    if (auto v = c.one("rng"); v && *v != Rng::kName)
      throw InvalidInput("unsupported rng '" + *v + "' (only " +
                         std::string(Rng::kName) + ")");

    if (auto v = c.one("scene_bundle")) e.scene_bundle = fs::path(*v);
    if (auto v = c.one("library"); v && *v != "bundled") e.library = fs::path(*v);
    if (c.has("solver")) e.solvers = c.list("solver");
    if (c.has("snr")) {
      e.snr_grid.clear();
      for (const auto& s : c.list("snr")) e.snr_grid.push_back(to_double(s, "snr"));
    }
    if (c.has("beta")) {
      e.beta_grid.clear();
      for (const auto& s : c.list("beta")) e.beta_grid.push_back(to_double(s, "beta"));
    }
    if (c.has("seed")) {
      e.seeds.clear();
      for (const auto& s : c.list("seed")) e.seeds.push_back(to_u64(s, "seed"));
    }
    if (!e.seeds.empty()) e.scene.seed = e.seeds.front();
    if (!e.snr_grid.empty()) e.scene.snr_db = e.snr_grid.front();
    if (auto v = c.one("output_dir")) e.output_dir = *v;
    for (const auto& s : c.list("band_exclude"))
      e.band_exclude.push_back(static_cast<std::size_t>(to_u64(s, "band_exclude")));

    num("k", e.pcsbl.k);
    num("epsilon", e.pcsbl.epsilon);
    num("max_iters", e.pcsbl.max_iters);
    pcsbl::UnknownNoise hyper;
    num("gamma_c", hyper.c);
    num("gamma_d", hyper.d);
    e.pcsbl.noise = hyper;
    if (auto v = c.one("asc_postprocess")) e.pcsbl.asc_postprocess = to_bool(*v, "asc_postprocess");

    if (c.has("admm_lambda")) {
      e.lambda_grid.clear();
      for (const auto& s : c.list("admm_lambda"))
        e.lambda_grid.push_back(to_double(s, "admm_lambda"));
    }
    if (!e.lambda_grid.empty()) e.baseline.lambda = e.lambda_grid.front();
    num("admm_rho", e.baseline.rho);
    num("admm_tol", e.baseline.tol);
    num("admm_max_iters", e.baseline.max_iters);
    if (auto v = c.one("admm_nonneg")) e.baseline.nonneg = to_bool(*v, "admm_nonneg");
    if (auto v = c.one("admm_sum_to_one")) e.baseline.sum_to_one = to_bool(*v, "admm_sum_to_one");
    num("threads", e.threads);

    static const std::set<std::string> accepted{
        "height", "width", "block_size", "num_endmembers", "filter_size",
        "purity_threshold", "boundary", "rng", "scene_bundle", "library",
        "solver", "snr", "beta", "seed", "output_dir", "band_exclude", "k",
        "epsilon", "max_iters", "gamma_c", "gamma_d", "asc_postprocess",
        "admm_lambda", "admm_rho", "admm_tol", "admm_max_iters", "admm_nonneg",
        "admm_sum_to_one", "threads"};
    for (const auto& key : c.keys())
      if (!accepted.count(key)) throw InvalidInput("unknown config key '" + key + "'");
    e.validate();
    return e;
  }

  // Canonical text of every setting that affects results. Thread count
  // and output location are excluded.
  std::string canonical() const {
    std::string t;
    auto kv = [&](const std::string& k, const std::string& v) { t += k + "=" + v + "\n"; };
    auto d = [](double v) { return synth::format_snr(v); };
    kv("rng", Rng::kName);
    if (scene_bundle) {
      kv("scene_bundle", scene_bundle->generic_string());
    } else {
      kv("height", std::to_string(scene.height));
      kv("width", std::to_string(scene.width));
      kv("block_size", std::to_string(scene.block_size));
      kv("num_endmembers", std::to_string(scene.num_endmembers));
      kv("filter_size", std::to_string(scene.filter_size));
      kv("purity_threshold", d(scene.purity_threshold));
      kv("boundary", synth::to_string(scene.boundary));
      kv("library", library ? library->generic_string() : "bundled");
    }
    for (const auto& s : solvers) kv("solver", s);
    for (double s : snr_grid) kv("snr", d(s));
    for (double b : beta_grid) kv("beta", d(b));
    for (auto s : seeds) kv("seed", std::to_string(s));
    for (auto b : band_exclude) kv("band_exclude", std::to_string(b));
    kv("k", d(pcsbl.k));
    kv("epsilon", d(pcsbl.epsilon));
    kv("max_iters", std::to_string(pcsbl.max_iters));
    const auto& hyper = std::get<pcsbl::UnknownNoise>(pcsbl.noise);
    kv("gamma_c", d(hyper.c));
    kv("gamma_d", d(hyper.d));
    kv("asc_postprocess", pcsbl.asc_postprocess ? "true" : "false");
    for (double l : lambda_grid) kv("admm_lambda", d(l));
    kv("admm_rho", d(baseline.rho));
    kv("admm_tol", d(baseline.tol));
    kv("admm_max_iters", std::to_string(baseline.max_iters));
    kv("admm_nonneg", baseline.nonneg ? "true" : "false");
    kv("admm_sum_to_one", baseline.sum_to_one ? "true" : "false");
    return t;
  }

  std::string hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char ch : canonical()) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }
};

}  // namespace unmix::harness

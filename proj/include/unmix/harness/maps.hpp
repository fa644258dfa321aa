#pragma once

// Abundance maps as 8-bit binary PGM (P5): intensity = round-half-up of
// clamp(a, 0, 1) * 255. NaN (failed pixels) maps to 0.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "unmix/error.hpp"
#include "unmix/spectra_model.hpp"

namespace unmix::harness {

struct GrayImage {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> pixels;
  std::string comment;
};

inline std::uint8_t quantize(double a) {
  if (std::isnan(a)) return 0;
  const double c = std::clamp(a, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

inline double dequantize(std::uint8_t v) { return static_cast<double>(v) / 255.0; }

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataFormatError("cannot write " + path.string());
  out << "P5\n";
  if (!img.comment.empty()) out << "# " << img.comment << "\n";
  out << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw DataFormatError("write failed for " + path.string());
}

inline GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("cannot open " + path.string());
  GrayImage img;
  // Header tokens, skipping comment lines.
  auto token = [&]() {
    std::string t;
    for (;;) {
      int ch = in.peek();
      if (ch == EOF) break;
      if (ch == '#') {
        std::string line;
        std::getline(in, line);
        if (img.comment.empty() && line.size() > 1)
          img.comment = line.substr(line[1] == ' ' ? 2 : 1);
        continue;
      }
      if (std::isspace(ch)) {
        in.get();
        if (!t.empty()) break;
        continue;
      }
      t.push_back(static_cast<char>(in.get()));
    }
    return t;
  };
  if (token() != "P5") throw DataFormatError(path.string() + ": not a P5 PGM");
  try {
    img.width = std::stoul(token());
    img.height = std::stoul(token());
    if (std::stoul(token()) != 255)
      throw DataFormatError(path.string() + ": only maxval 255 is supported");
  } catch (const std::logic_error&) {
    throw DataFormatError(path.string() + ": malformed PGM header");
  }
  img.pixels.resize(img.width * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw DataFormatError(path.string() + ": truncated PGM payload");
  return img;
}

inline GrayImage abundance_image(const AbundanceMap& map, std::size_t endmember) {
  if (endmember >= map.endmembers())
    throw InvalidInput("endmember index " + std::to_string(endmember) +
                       " out of range (q = " + std::to_string(map.endmembers()) + ")");
  GrayImage img;
  img.width = map.width();
  img.height = map.height();
  img.pixels.resize(map.pixels());
  for (std::size_t r = 0; r < map.height(); ++r)
    for (std::size_t c = 0; c < map.width(); ++c)
      img.pixels[r * map.width() + c] = quantize(map.at(r, c, endmember));
  return img;
}

// One file per endmember: endmember_<j>.pgm. Returns the written paths.
inline std::vector<std::filesystem::path> export_abundance_maps(
    const AbundanceMap& map, const std::vector<std::size_t>& endmembers,
    const std::filesystem::path& out_dir, const std::string& metadata = {}) {
  for (auto j : endmembers)
    if (j >= map.endmembers())
      throw InvalidInput("endmember index " + std::to_string(j) +
                         " out of range (q = " + std::to_string(map.endmembers()) + ")");
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (auto j : endmembers) {
    GrayImage img = abundance_image(map, j);
    img.comment = "endmember=" + std::to_string(j) + " scale=0..1->0..255";
    if (!metadata.empty()) img.comment += " " + metadata;
    const auto path = out_dir / ("endmember_" + std::to_string(j) + ".pgm");
    write_pgm(path, img);
    written.push_back(path);
  }
  return written;
}

}  // namespace unmix::harness

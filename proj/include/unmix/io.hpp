#pragma once

// On-disk formats:
//   endmember CSV  one row per band, one column per endmember, no header
//   cube           flat little-endian float64, band-interleaved-by-pixel,
//                  plus a text header with `height`, `width`, `bands`
//   abundances     flat little-endian float64, H x W x q, header keys
//                  `height`, `width`, `endmembers`

#include <bit>
#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "unmix/error.hpp"
#include "unmix/spectra_model.hpp"

namespace unmix::io {

namespace fs = std::filesystem;

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  if (t.empty()) throw DataFormatError(where + ": empty numeric field");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE)
    throw DataFormatError(where + ": cannot parse '" + t + "' as a number");
  return v;
}

inline std::size_t parse_count(const std::string& text,
                               const std::string& where) {
  const std::string t = trim(text);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
    throw DataFormatError(where + ": '" + t + "' is not a non-negative integer");
  return static_cast<std::size_t>(std::stoull(t));
}

// `key = value` per line; '#' starts a comment. Later keys win.
using Header = std::map<std::string, std::string>;

inline Header parse_header(std::istream& in, const std::string& name) {
  Header h;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataFormatError(name + ":" + std::to_string(lineno) +
                            ": expected 'key = value'");
    h[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return h;
}

inline Header read_header(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataFormatError("cannot open header " + path.string());
  return parse_header(in, path.string());
}

inline std::size_t header_count(const Header& h, const std::string& key,
                                const std::string& name) {
  auto it = h.find(key);
  if (it == h.end())
    throw DataFormatError(name + ": missing key '" + key + "'");
  return parse_count(it->second, name + ": key '" + key + "'");
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataFormatError("cannot write " + path.string());
  out << text;
  if (!out) throw DataFormatError("write failed for " + path.string());
}

inline std::vector<double> read_f64_le(const fs::path& path,
                                       std::size_t expected_values) {
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  if (ec) throw DataFormatError("cannot stat " + path.string());
  if (size != expected_values * sizeof(double))
    throw DataFormatError(path.string() + ": payload is " +
                          std::to_string(size) + " bytes but header implies " +
                          std::to_string(expected_values) + " x 8 = " +
                          std::to_string(expected_values * sizeof(double)) +
                          " bytes");
  std::vector<double> values(expected_values);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("cannot open " + path.string());
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(size));
  if (!in) throw DataFormatError("short read from " + path.string());
  if constexpr (std::endian::native == std::endian::big) {
    for (double& v : values) {
      std::uint64_t u;
      std::memcpy(&u, &v, sizeof u);
      u = __builtin_bswap64(u);
      std::memcpy(&v, &u, sizeof u);
    }
  }
  return values;
}

inline void write_f64_le(const fs::path& path, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataFormatError("cannot write " + path.string());
  if constexpr (std::endian::native == std::endian::big) {
    for (double v : values) {
      std::uint64_t u;
      std::memcpy(&u, &v, sizeof u);
      u = __builtin_bswap64(u);
      out.write(reinterpret_cast<const char*>(&u), sizeof u);
    }
  } else {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  }
  if (!out) throw DataFormatError("write failed for " + path.string());
}

// ---------------------------------------------------------------- CSV

inline Matrix read_csv_matrix(std::istream& in, const std::string& name) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    int col = 0;
    while (std::getline(ss, field, ',')) {
      ++col;
      row.push_back(parse_double(field, name + ":" + std::to_string(lineno) +
                                            ":" + std::to_string(col)));
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataFormatError(name + ":" + std::to_string(lineno) + ": has " +
                            std::to_string(row.size()) + " columns, expected " +
                            std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataFormatError(name + ": no data rows");
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

inline Matrix read_csv_matrix(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataFormatError("cannot open " + path.string());
  return read_csv_matrix(in, path.string());
}

// %.17g keeps a write/read cycle exact.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv_matrix(const fs::path& path, const Matrix& m) {
  std::string text;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) text += ',';
      text += format_double(m(i, j));
    }
    text += '\n';
  }
  write_text(path, text);
}

inline EndmemberMatrix read_endmembers(const fs::path& path) {
  try {
    return EndmemberMatrix(read_csv_matrix(path));
  } catch (const InvalidInput& e) {
    throw DataFormatError(path.string() + ": " + e.what());
  }
}

inline void write_endmembers(const fs::path& path, const EndmemberMatrix& A) {
  write_csv_matrix(path, A.values());
}

// --------------------------------------------------------------- cubes

inline HyperspectralCube read_cube(const fs::path& data_path,
                                   const fs::path& header_path) {
  const Header h = read_header(header_path);
  const std::string name = header_path.string();
  const auto height = header_count(h, "height", name);
  const auto width = header_count(h, "width", name);
  const auto bands = header_count(h, "bands", name);
  if (bands == 0) throw DataFormatError(name + ": bands must be positive");
  auto data = read_f64_le(data_path, height * width * bands);
  return HyperspectralCube(height, width, bands, std::move(data));
}

inline void write_cube(const fs::path& data_path, const fs::path& header_path,
                       const HyperspectralCube& cube) {
  write_f64_le(data_path, cube.data());
  write_text(header_path, "height = " + std::to_string(cube.height()) +
                              "\nwidth = " + std::to_string(cube.width()) +
                              "\nbands = " + std::to_string(cube.bands()) + "\n");
}

inline AbundanceMap read_abundances(const fs::path& data_path,
                                    const fs::path& header_path) {
  const Header h = read_header(header_path);
  const std::string name = header_path.string();
  const auto height = header_count(h, "height", name);
  const auto width = header_count(h, "width", name);
  const auto q = header_count(h, "endmembers", name);
  auto data = read_f64_le(data_path, height * width * q);
  return AbundanceMap(height, width, q, std::move(data));
}

inline void write_abundances(const fs::path& data_path,
                             const fs::path& header_path,
                             const AbundanceMap& map) {
  write_f64_le(data_path, map.data());
  write_text(header_path, "height = " + std::to_string(map.height()) +
                              "\nwidth = " + std::to_string(map.width()) +
                              "\nendmembers = " + std::to_string(map.endmembers()) +
                              "\n");
}

}  // namespace unmix::io

#include "hsu/io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "hsu/errors.hpp"

namespace hsu::io {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little,
              "HSIB I/O assumes a little-endian host");

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  return os;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return is;
}

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& is, const fs::path& path) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw FormatError(path.string() + ": truncated header");
  }
  return v;
}

std::uint32_t checked_u32(Index v, const char* what) {
  if (v < 0 || v > static_cast<Index>(UINT32_MAX)) {
    throw ArgumentError(std::string("write_cube: ") + what + " does not fit in u32");
  }
  return static_cast<std::uint32_t>(v);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

// PGM header tokens, skipping whitespace and '#' comments.
std::string next_token(std::istream& is) {
  std::string tok;
  int c = 0;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

long parse_long(const std::string& tok, const fs::path& path) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw FormatError(path.string() + ": bad PGM header field '" + tok + "'");
  }
  return v;
}

}  // namespace

void write_cube(const fs::path& path, const SpectralCube& cube) {
  auto os = open_out(path);
  os.write("HSIB", 4);
  put_u32(os, kCubeVersion);
  put_u32(os, checked_u32(cube.bands(), "L"));
  put_u32(os, checked_u32(cube.rows(), "rows"));
  put_u32(os, checked_u32(cube.cols(), "cols"));
  // Column-major L x N storage is exactly pixel-major band order.
  const MatrixXd& d = cube.data();
  os.write(reinterpret_cast<const char*>(d.data()),
           static_cast<std::streamsize>(d.size() * sizeof(double)));
  if (!os) throw FormatError("failed writing " + path.string());
}

SpectralCube read_cube(const fs::path& path) {
  auto is = open_in(path);
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || std::memcmp(magic.data(), "HSIB", 4) != 0) {
    throw FormatError(path.string() + ": not an HSIB cube");
  }
  const auto version = get_u32(is, path);
  if (version != kCubeVersion) {
    throw FormatError(path.string() + ": unsupported HSIB version " + std::to_string(version));
  }
  const auto L = get_u32(is, path);
  const auto rows = get_u32(is, path);
  const auto cols = get_u32(is, path);
  const auto N = static_cast<Index>(rows) * static_cast<Index>(cols);
  if (L < 2 || N < 1) throw FormatError(path.string() + ": degenerate cube dimensions");

  MatrixXd data(static_cast<Index>(L), N);
  const auto bytes = static_cast<std::streamsize>(data.size() * sizeof(double));
  if (!is.read(reinterpret_cast<char*>(data.data()), bytes)) {
    throw FormatError(path.string() + ": payload shorter than header declares");
  }
  if (is.peek() != EOF) throw FormatError(path.string() + ": trailing bytes after payload");
  if (!data.allFinite()) throw FormatError(path.string() + ": non-finite values in payload");
  return SpectralCube(std::move(data), rows, cols);
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                 std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

void write_matrix_csv(const fs::path& path, const MatrixXd& m) {
  auto os = open_out(path);
  std::string line;
  for (Index i = 0; i < m.rows(); ++i) {
    line.clear();
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) line.push_back(',');
      line += format_double(m(i, j));
    }
    line.push_back('\n');
    os << line;
  }
  if (!os) throw FormatError("failed writing " + path.string());
}

MatrixXd read_matrix_csv(const fs::path& path) {
  auto is = open_in(path);
  std::vector<double> values;
  Index cols = -1;
  Index rows = 0;
  std::string line;
  while (std::getline(is, line)) {
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    Index count = 0;
    while (true) {
      const auto comma = sv.find(',');
      const std::string_view field = trim(sv.substr(0, comma));
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
        throw FormatError(path.string() + ": line " + std::to_string(rows + 1) +
                          ": bad number '" + std::string(field) + "'");
      }
      values.push_back(v);
      ++count;
      if (comma == std::string_view::npos) break;
      sv.remove_prefix(comma + 1);
    }
    if (cols >= 0 && count != cols) {
      throw FormatError(path.string() + ": line " + std::to_string(rows + 1) + " has " +
                        std::to_string(count) + " fields, expected " + std::to_string(cols));
    }
    cols = count;
    ++rows;
  }
  if (rows == 0) return MatrixXd(0, 0);
  return Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, cols);
}

void write_pgm(const fs::path& path, const GrayImage& image) {
  if (static_cast<Index>(image.pixels.size()) != image.width * image.height) {
    throw ArgumentError("write_pgm: pixel buffer does not match dimensions");
  }
  auto os = open_out(path);
  os << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(image.pixels.data()),
           static_cast<std::streamsize>(image.pixels.size()));
  if (!os) throw FormatError("failed writing " + path.string());
}

GrayImage read_pgm(const fs::path& path) {
  auto is = open_in(path);
  if (next_token(is) != "P5") throw FormatError(path.string() + ": not a binary PGM");
  GrayImage img;
  img.width = parse_long(next_token(is), path);
  img.height = parse_long(next_token(is), path);
  const long maxval = parse_long(next_token(is), path);
  if (img.width < 1 || img.height < 1 || maxval < 1 || maxval > 255) {
    throw FormatError(path.string() + ": unsupported PGM dimensions or depth");
  }
  img.pixels.resize(static_cast<std::size_t>(img.width * img.height));
  if (!is.read(reinterpret_cast<char*>(img.pixels.data()),
               static_cast<std::streamsize>(img.pixels.size()))) {
    throw FormatError(path.string() + ": truncated PGM raster");
  }
  return img;
}

ScaledImage scale_to_gray(const MatrixXd& map) {
  ScaledImage out;
  out.image.height = map.rows();
  out.image.width = map.cols();
  out.image.pixels.resize(static_cast<std::size_t>(map.size()));
  if (map.size() == 0) return out;
  out.min = map.minCoeff();
  out.max = map.maxCoeff();
  out.degenerate = !(out.max > out.min);
  const double span = out.max - out.min;
  for (Index i = 0; i < map.rows(); ++i) {
    for (Index j = 0; j < map.cols(); ++j) {
      const double t = out.degenerate ? 0.5 : (map(i, j) - out.min) / span;
      out.image.pixels[static_cast<std::size_t>(i * map.cols() + j)] =
          static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
    }
  }
  if (out.degenerate) {
    std::fill(out.image.pixels.begin(), out.image.pixels.end(), std::uint8_t{128});
  }
  return out;
}

GrayImage labels_to_gray(const Eigen::MatrixXi& labels) {
  GrayImage img;
  img.height = labels.rows();
  img.width = labels.cols();
  img.pixels.resize(static_cast<std::size_t>(labels.size()));
  for (Index i = 0; i < labels.rows(); ++i) {
    for (Index j = 0; j < labels.cols(); ++j) {
      const int v = labels(i, j);
      if (v < 0 || v > 255) throw ArgumentError("labels_to_gray: label out of 0..255");
      img.pixels[static_cast<std::size_t>(i * labels.cols() + j)] = static_cast<std::uint8_t>(v);
    }
  }
  return img;
}

Eigen::MatrixXi gray_to_labels(const GrayImage& image) {
  Eigen::MatrixXi labels(image.height, image.width);
  for (Index i = 0; i < image.height; ++i) {
    for (Index j = 0; j < image.width; ++j) {
      labels(i, j) = image.pixels[static_cast<std::size_t>(i * image.width + j)];
    }
  }
  return labels;
}

void Manifest::set(std::string key, std::string value) {
  if (key.find('=') != std::string::npos || key.find('\n') != std::string::npos ||
      value.find('\n') != std::string::npos) {
    throw ArgumentError("Manifest: keys may not contain '=' and entries no newlines");
  }
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

void Manifest::set(std::string key, double value) { set(std::move(key), format_double(value)); }

void Manifest::set(std::string key, std::int64_t value) {
  set(std::move(key), std::to_string(value));
}

void Manifest::set(std::string key, bool value) {
  set(std::move(key), std::string(value ? "true" : "false"));
}

std::optional<std::string> Manifest::get(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

void Manifest::write(const fs::path& path) const {
  auto os = open_out(path);
  for (const auto& [k, v] : entries_) os << k << '=' << v << '\n';
  if (!os) throw FormatError("failed writing " + path.string());
}

Manifest Manifest::read(const fs::path& path) {
  auto is = open_in(path);
  Manifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw FormatError(path.string() + ": line " + std::to_string(lineno) +
                        " is not key=value");
    }
    m.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return m;
}

std::uint64_t hash_files(const std::vector<fs::path>& paths) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : paths) {
    auto is = open_in(p);
    std::array<char, 1 << 16> buf{};
    while (is.read(buf.data(), buf.size()) || is.gcount() > 0) {
      for (std::streamsize i = 0; i < is.gcount(); ++i) {
        h ^= static_cast<unsigned char>(buf[static_cast<std::size_t>(i)]);
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::array<char, 17> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(v));
  return buf.data();
}

}  // namespace hsu::io

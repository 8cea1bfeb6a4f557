#pragma once

// On-disk formats:
//   HSIB cube   "HSIB", u32 version=1, u32 L, u32 rows, u32 cols, then
//               L*rows*cols little-endian float64, pixel-major.
//   CSV matrix  no header, comma-separated, row-major, 17 significant digits.
//   PGM         binary P5, 8-bit.
//   Manifest    one key=value per line, insertion order preserved.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hsu/model.hpp"

namespace hsu::io {

inline constexpr std::uint32_t kCubeVersion = 1;

void write_cube(const std::filesystem::path& path, const SpectralCube& cube);
SpectralCube read_cube(const std::filesystem::path& path);

/// Shortest round-trip-safe text for a double (17 significant digits).
std::string format_double(double v);

void write_matrix_csv(const std::filesystem::path& path, const MatrixXd& m);
MatrixXd read_matrix_csv(const std::filesystem::path& path);

struct GrayImage {
  Index width = 0;
  Index height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);

struct ScaledImage {
  GrayImage image;
  double min = 0.0;
  double max = 0.0;
  /// max == min; the image is uniform mid-gray.
  bool degenerate = false;
};

/// Linear min-max scaling of a rows x cols map to 0..255.
ScaledImage scale_to_gray(const MatrixXd& map);

/// Stores a label map verbatim (values must be in 0..255).
GrayImage labels_to_gray(const Eigen::MatrixXi& labels);
Eigen::MatrixXi gray_to_labels(const GrayImage& image);

class Manifest {
 public:
  void set(std::string key, std::string value);
  void set(std::string key, double value);
  void set(std::string key, std::int64_t value);
  void set(std::string key, int value) { set(std::move(key), static_cast<std::int64_t>(value)); }
  void set(std::string key, bool value);

  std::optional<std::string> get(std::string_view key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept {
    return entries_;
  }

  void write(const std::filesystem::path& path) const;
  static Manifest read(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// 64-bit FNV-1a over the bytes of each file, in order.
std::uint64_t hash_files(const std::vector<std::filesystem::path>& paths);
std::string hex64(std::uint64_t v);

}  // namespace hsu::io

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xraydet/geometry.hpp"

namespace xraydet {

using Rgb = std::array<std::uint8_t, 3>;

/// Row-major 8-bit RGB image.
class RasterImage {
 public:
  RasterImage() = default;
  /// Throws std::invalid_argument for non-positive extents.
  RasterImage(int width, int height, Rgb fill = {0, 0, 0});
  /// Throws std::invalid_argument if pixels.size() != width * height * 3.
  RasterImage(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  ImageDims dims() const { return {width_, height_}; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb value);

  const std::vector<std::uint8_t>& pixels() const { return pixels_; }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Binary portable pixmap (P6, maxval 255).
std::string encode_ppm(const RasterImage& image);
/// Throws DataError on malformed or unsupported input.
RasterImage decode_ppm(const std::string& bytes);

RasterImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RasterImage& image);

}  // namespace xraydet

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace ekfslam {

/// 8-bit grayscale raster, row-major.
struct GrayImage {
  int width{0};
  int height{0};
  std::vector<std::uint8_t> data;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0);

  std::uint8_t& operator()(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t operator()(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  const std::uint8_t* row(int y) const { return data.data() + static_cast<std::size_t>(y) * width; }
  std::uint8_t* row(int y) { return data.data() + static_cast<std::size_t>(y) * width; }
  bool empty() const { return width == 0 || height == 0; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Binary PGM (P5, maxval 255).
void write_pgm(std::ostream& os, const GrayImage& img);
void write_pgm(const std::filesystem::path& path, const GrayImage& img);
GrayImage read_pgm(std::istream& is);
GrayImage read_pgm(const std::filesystem::path& path);

/// Sub-image with top-left corner (x0, y0). Throws std::out_of_range when
/// the window leaves the image.
GrayImage crop(const GrayImage& img, int x0, int y0, int w, int h);

/// Bilinear interpolation with edge clamping.
double sample_bilinear(const GrayImage& img, double x, double y);

}  // namespace ekfslam

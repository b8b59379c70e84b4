#include "ekfslam/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace ekfslam {

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {
  if (w < 0 || h < 0) throw std::invalid_argument("image dimensions must be non-negative");
}

void write_pgm(std::ostream& os, const GrayImage& img) {
  os << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_pgm(os, img);
}

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& is) {
  std::string tok;
  int c;
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

}  // namespace

GrayImage read_pgm(std::istream& is) {
  if (next_token(is) != "P5") throw std::runtime_error("not a binary PGM (P5)");
  const int w = std::stoi(next_token(is));
  const int h = std::stoi(next_token(is));
  const int maxval = std::stoi(next_token(is));
  if (w <= 0 || h <= 0) throw std::runtime_error("PGM: bad dimensions");
  if (maxval != 255) throw std::runtime_error("PGM: only maxval 255 supported");
  GrayImage img(w, h);
  is.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (is.gcount() != static_cast<std::streamsize>(img.data.size())) throw std::runtime_error("PGM: truncated data");
  return img;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return read_pgm(is);
}

GrayImage crop(const GrayImage& img, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > img.width || y0 + h > img.height)
    throw std::out_of_range("crop window outside the image");
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) std::copy_n(img.row(y0 + y) + x0, w, out.row(y));
  return out;
}

double sample_bilinear(const GrayImage& img, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  const int x0 = std::min(static_cast<int>(x), img.width - 2 < 0 ? 0 : img.width - 2);
  const int y0 = std::min(static_cast<int>(y), img.height - 2 < 0 ? 0 : img.height - 2);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double ax = x - x0, ay = y - y0;
  const double top = (1 - ax) * img(x0, y0) + ax * img(x1, y0);
  const double bot = (1 - ax) * img(x0, y1) + ax * img(x1, y1);
  return (1 - ay) * top + ay * bot;
}

}  // namespace ekfslam

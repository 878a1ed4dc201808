#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>

#include "realism/numerics.hpp"

namespace realism {

// Euclidean distance between two trait probability vectors.
double trait_dist(std::span<const double> p_generated, std::span<const double> p_real);

struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;  // 1 or 3, interleaved
  Vector data;               // [0, 1], row-major

  double at(std::size_t x, std::size_t y, std::size_t c = 0) const { return data[(y * width + x) * channels + c]; }
  void validate() const;

  bool operator==(const Image&) const = default;
};

// ITU-R BT.601 luma; single-channel images pass through.
Image to_luma(const Image& image);

enum class SsimWindow { gaussian, uniform, global };

std::string to_string(SsimWindow w);
SsimWindow ssim_window_from_string(const std::string& name);

struct SsimConfig {
  SsimWindow window = SsimWindow::gaussian;
  std::size_t window_size = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

// Mean SSIM over all fully-contained windows of the luma planes. The global
// mode evaluates the formula once over the whole image.
double ssim(const Image& x, const Image& y, const SsimConfig& config = {});

// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
Vector gaussian_taps(std::size_t size, double sigma);

// 8-bit PNG (gray, gray+alpha, RGB, RGBA, palette; alpha dropped) and binary
// PPM (P6) / PGM (P5). Samples are scaled by 1/maxval.
Image load_image(const std::filesystem::path& path);
Image load_png(const std::filesystem::path& path);
Image load_pnm(const std::filesystem::path& path);
Image decode_pnm(const std::string& bytes);
std::string encode_pnm(const Image& image);  // P5/P6, maxval 255
void write_png(const std::filesystem::path& path, const Image& image);  // 8-bit gray or RGB

}  // namespace realism

#pragma once

// 8-bit rasters and PNG input/output.

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace ldanet {

using Rgb = std::array<std::uint8_t, 3>;

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, interleaved RGB

  RgbImage() = default;
  RgbImage(int w, int h, Rgb fill = {0, 0, 0});

  std::uint8_t& at(int x, int y, int ch) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + ch];
  }
  std::uint8_t at(int x, int y, int ch) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + ch];
  }
  Rgb pixel(int x, int y) const { return {at(x, y, 0), at(x, y, 1), at(x, y, 2)}; }
  void set(int x, int y, Rgb c) {
    for (int ch = 0; ch < 3; ++ch) at(x, y, ch) = c[static_cast<std::size_t>(ch)];
  }
  bool operator==(const RgbImage&) const = default;
};

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0);

  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const GrayImage&) const = default;
};

/// Any PNG, converted to 8-bit RGB.
RgbImage read_png_rgb(const std::filesystem::path& path);

/// An 8-bit grayscale PNG, values untouched.  Color PNGs are rejected.
GrayImage read_png_gray(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const RgbImage& image);
void write_png(const std::filesystem::path& path, const GrayImage& image);

}  // namespace ldanet

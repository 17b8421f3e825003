#include "ldanet/image.hpp"

#include <png.h>

#include <cstring>
#include <string>

#include "ldanet/errors.hpp"

namespace ldanet {

RgbImage::RgbImage(int w, int h, Rgb fill) : width(w), height(h) {
  pixels.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
  for (std::size_t i = 0; i < pixels.size(); i += 3) {
    std::memcpy(&pixels[i], fill.data(), 3);
  }
}

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

namespace {

struct PngReader {
  png_image image{};

  explicit PngReader(const std::filesystem::path& path) {
    image.version = PNG_IMAGE_VERSION;
    if (!std::filesystem::exists(path)) throw DataError("missing file " + path.string());
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
      throw DataError(path.string() + ": " + image.message);
    }
  }
  ~PngReader() { png_image_free(&image); }

  void finish(std::vector<std::uint8_t>& buffer, png_uint_32 format, const std::filesystem::path& path) {
    image.format = format;
    buffer.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
      throw DataError(path.string() + ": " + image.message);
    }
  }
};

void write_raw(const std::filesystem::path& path, int width, int height, png_uint_32 format,
               const std::vector<std::uint8_t>& pixels) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    std::string message = image.message;
    png_image_free(&image);
    throw DataError("cannot write " + path.string() + ": " + message);
  }
}

}  // namespace

RgbImage read_png_rgb(const std::filesystem::path& path) {
  PngReader reader(path);
  RgbImage out;
  out.width = static_cast<int>(reader.image.width);
  out.height = static_cast<int>(reader.image.height);
  reader.finish(out.pixels, PNG_FORMAT_RGB, path);
  return out;
}

GrayImage read_png_gray(const std::filesystem::path& path) {
  PngReader reader(path);
  if (reader.image.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_LINEAR)) {
    throw DataError(path.string() + ": label maps must be 8-bit grayscale");
  }
  GrayImage out;
  out.width = static_cast<int>(reader.image.width);
  out.height = static_cast<int>(reader.image.height);
  reader.finish(out.pixels, PNG_FORMAT_GRAY, path);
  return out;
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  write_raw(path, image.width, image.height, PNG_FORMAT_RGB, image.pixels);
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
  write_raw(path, image.width, image.height, PNG_FORMAT_GRAY, image.pixels);
}

}  // namespace ldanet

#include <png.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "wdn/imaging.hpp"

namespace wdn {
namespace {

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

void write_pixels(const std::filesystem::path& path, std::size_t height, std::size_t width, png_uint_32 format,
                  const std::vector<std::uint8_t>& pixels) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, pixels.data(), 0, nullptr))
    throw IoError("cannot write '" + path.string() + "': " + image.message);
}

}  // namespace

ColorImage read_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("missing file '" + path.string() + "'");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw UnsupportedFormatError("cannot read '" + path.string() + "': " + image.message);
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw UnsupportedFormatError("'" + path.string() + "': 16-bit PNG is not supported (8-bit gray/RGB only)");
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr))
    throw IoError("cannot decode '" + path.string() + "': " + image.message);

  const std::size_t h = image.height, w = image.width;
  ColorImage out{ImagePlane(h, w), ImagePlane(h, w), ImagePlane(h, w)};
  for (std::size_t i = 0; i < h * w; ++i) {
    out.r.values[i] = to_working_precision(pixels[3 * i] / 255.0);
    out.g.values[i] = to_working_precision(pixels[3 * i + 1] / 255.0);
    out.b.values[i] = to_working_precision(pixels[3 * i + 2] / 255.0);
  }
  return out;
}

void write_png(const ColorImage& image, const std::filesystem::path& path) {
  const std::size_t h = image.height(), w = image.width();
  if (!image.r.same_dims(image.g) || !image.r.same_dims(image.b))
    throw ContractError("write_png: color planes differ in size");
  std::vector<std::uint8_t> pixels(h * w * 3);
  for (std::size_t i = 0; i < h * w; ++i) {
    pixels[3 * i] = quantize(image.r.values[i]);
    pixels[3 * i + 1] = quantize(image.g.values[i]);
    pixels[3 * i + 2] = quantize(image.b.values[i]);
  }
  write_pixels(path, h, w, PNG_FORMAT_RGB, pixels);
}

void write_png(const ImagePlane& gray, const std::filesystem::path& path) {
  std::vector<std::uint8_t> pixels(gray.size());
  std::transform(gray.values.begin(), gray.values.end(), pixels.begin(), quantize);
  write_pixels(path, gray.height, gray.width, PNG_FORMAT_GRAY, pixels);
}

}  // namespace wdn

#include "latentcolor/png_io.hpp"

#include <png.h>

#include <cstring>
#include <vector>

#include "latentcolor/color_space.hpp"
#include "latentcolor/errors.hpp"

namespace latentcolor {
namespace {

struct PngImage {
  png_image header;
  PngImage() {
    std::memset(&header, 0, sizeof(header));
    header.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&header); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

// Decodes to [1, H, W] for gray files and [3, H, W] for color files, so that
// libpng never performs its own (gamma-aware) color-to-gray conversion.
torch::Tensor decode(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("no such PNG file: " + path.string());
  PngImage img;
  if (!png_image_begin_read_from_file(&img.header, path.c_str())) {
    throw IoError("cannot decode PNG " + path.string() + ": " + img.header.message);
  }
  const bool color = (img.header.format & PNG_FORMAT_FLAG_COLOR) != 0;
  const int channels = color ? 3 : 1;
  img.header.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(img.header));
  if (!png_image_finish_read(&img.header, nullptr, buffer.data(), 0, nullptr)) {
    throw IoError("cannot decode PNG " + path.string() + ": " + img.header.message);
  }
  const auto h = static_cast<int64_t>(img.header.height);
  const auto w = static_cast<int64_t>(img.header.width);
  auto hwc = torch::from_blob(buffer.data(), {h, w, channels}, torch::kUInt8).clone();
  return hwc.permute({2, 0, 1}).to(torch::kFloat32).div_(255.0f).contiguous();
}

void encode(const std::filesystem::path& path, const torch::Tensor& chw, png_uint_32 format) {
  auto bytes = chw.mul(255.0f).round_().clamp_(0, 255).to(torch::kUInt8).permute({1, 2, 0}).contiguous();
  PngImage img;
  img.header.width = static_cast<png_uint_32>(chw.size(2));
  img.header.height = static_cast<png_uint_32>(chw.size(1));
  img.header.format = format;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!png_image_write_to_file(&img.header, path.c_str(), 0, bytes.data_ptr<uint8_t>(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + img.header.message);
  }
}

}  // namespace

RgbImage read_png_rgb(const std::filesystem::path& path) {
  auto t = decode(path);
  if (t.size(0) == 1) t = t.expand({3, t.size(1), t.size(2)}).clone();
  return RgbImage(t);
}

GrayImage read_png_gray(const std::filesystem::path& path) {
  auto t = decode(path);
  if (t.size(0) == 1) return GrayImage(t[0]);
  return rgb_to_gray(RgbImage(t));
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  encode(path, img.tensor(), PNG_FORMAT_RGB);
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
  encode(path, img.tensor().unsqueeze(0), PNG_FORMAT_GRAY);
}

}  // namespace latentcolor

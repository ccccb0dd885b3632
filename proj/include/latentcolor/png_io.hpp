#pragma once

#include <filesystem>

#include "latentcolor/image.hpp"

namespace latentcolor {

// 8-bit PNG boundary. Any PNG color type is accepted on read; gray inputs are
// replicated into three channels and alpha is dropped.
RgbImage read_png_rgb(const std::filesystem::path& path);
GrayImage read_png_gray(const std::filesystem::path& path);

// Values are rounded to the nearest of 256 levels.
void write_png(const std::filesystem::path& path, const RgbImage& img);
void write_png(const std::filesystem::path& path, const GrayImage& img);

}  // namespace latentcolor

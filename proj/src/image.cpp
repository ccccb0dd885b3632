#include "latentcolor/image.hpp"

#include <string>

#include "latentcolor/errors.hpp"

namespace latentcolor {
namespace {

void check_unit_range(const torch::Tensor& t, const char* what) {
  if (t.numel() == 0) throw ShapeError(std::string(what) + ": empty image");
  if (!torch::isfinite(t).all().item<bool>()) {
    throw ValidationError(std::string(what) + ": non-finite pixel values");
  }
  const auto lo = t.min().item<float>();
  const auto hi = t.max().item<float>();
  if (lo < 0.0f || hi > 1.0f) {
    throw ValidationError(std::string(what) + ": pixel values outside [0, 1] (min " +
                          std::to_string(lo) + ", max " + std::to_string(hi) + ")");
  }
}

}  // namespace

RgbImage::RgbImage(torch::Tensor pixels) {
  if (pixels.dim() != 3 || pixels.size(0) != 3) {
    throw ShapeError("RgbImage expects a [3, H, W] tensor");
  }
  pixels_ = pixels.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  check_unit_range(pixels_, "RgbImage");
}

RgbImage RgbImage::filled(int64_t height, int64_t width, float r, float g, float b) {
  auto t = torch::empty({3, height, width}, torch::kFloat32);
  t[0].fill_(r);
  t[1].fill_(g);
  t[2].fill_(b);
  return RgbImage(t);
}

float RgbImage::at(int64_t channel, int64_t y, int64_t x) const {
  return pixels_.accessor<float, 3>()[channel][y][x];
}

GrayImage::GrayImage(torch::Tensor pixels) {
  if (pixels.dim() != 2) throw ShapeError("GrayImage expects an [H, W] tensor");
  pixels_ = pixels.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  check_unit_range(pixels_, "GrayImage");
}

GrayImage GrayImage::filled(int64_t height, int64_t width, float value) {
  return GrayImage(torch::full({height, width}, value, torch::kFloat32));
}

float GrayImage::at(int64_t y, int64_t x) const {
  return pixels_.accessor<float, 2>()[y][x];
}

bool same_size(const RgbImage& a, const RgbImage& b) {
  return a.height() == b.height() && a.width() == b.width();
}

bool same_size(const RgbImage& a, const GrayImage& b) {
  return a.height() == b.height() && a.width() == b.width();
}

bool same_size(const GrayImage& a, const GrayImage& b) {
  return a.height() == b.height() && a.width() == b.width();
}

torch::Tensor stack(std::span<const RgbImage> images) {
  if (images.empty()) throw ShapeError("cannot stack an empty image list");
  std::vector<torch::Tensor> parts;
  parts.reserve(images.size());
  for (const auto& img : images) {
    if (!same_size(img, images.front())) throw ShapeError("stack: image sizes differ");
    parts.push_back(img.tensor());
  }
  return torch::stack(parts);
}

std::vector<RgbImage> unstack(const torch::Tensor& batch) {
  if (batch.dim() != 4 || batch.size(1) != 3) {
    throw ShapeError("unstack expects a [B, 3, H, W] tensor");
  }
  std::vector<RgbImage> out;
  out.reserve(batch.size(0));
  auto clamped = batch.detach().to(torch::kCPU, torch::kFloat32).clamp(0.0, 1.0);
  for (int64_t i = 0; i < clamped.size(0); ++i) out.emplace_back(clamped[i].clone());
  return out;
}

}  // namespace latentcolor

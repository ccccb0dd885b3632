#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <torch/torch.h>

namespace latentcolor {

// A color frame stored as a contiguous float32 tensor shaped [3, H, W] with
// every value in [0, 1].
class RgbImage {
 public:
  RgbImage() = default;
  explicit RgbImage(torch::Tensor pixels);

  static RgbImage filled(int64_t height, int64_t width, float r, float g, float b);

  int64_t height() const { return pixels_.size(1); }
  int64_t width() const { return pixels_.size(2); }
  bool empty() const { return !pixels_.defined(); }
  const torch::Tensor& tensor() const { return pixels_; }
  float at(int64_t channel, int64_t y, int64_t x) const;

 private:
  torch::Tensor pixels_;
};

// A single-channel frame stored as a contiguous float32 tensor shaped [H, W]
// with every value in [0, 1].
class GrayImage {
 public:
  GrayImage() = default;
  explicit GrayImage(torch::Tensor pixels);

  static GrayImage filled(int64_t height, int64_t width, float value);

  int64_t height() const { return pixels_.size(0); }
  int64_t width() const { return pixels_.size(1); }
  bool empty() const { return !pixels_.defined(); }
  const torch::Tensor& tensor() const { return pixels_; }
  float at(int64_t y, int64_t x) const;

 private:
  torch::Tensor pixels_;
};

bool same_size(const RgbImage& a, const RgbImage& b);
bool same_size(const RgbImage& a, const GrayImage& b);
bool same_size(const GrayImage& a, const GrayImage& b);

// Stacks equally sized images into a [B, 3, H, W] batch.
torch::Tensor stack(std::span<const RgbImage> images);
// Splits a [B, 3, H, W] batch, clamping each image into [0, 1].
std::vector<RgbImage> unstack(const torch::Tensor& batch);

}  // namespace latentcolor

#pragma once

#include <torch/torch.h>

#include "latentcolor/image.hpp"

namespace latentcolor {

// ITU-R BT.601 luma weights.
inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

// Weighted BT.601 luma. Computed in double so that a neutral input
// (r == g == b) maps back to exactly the same float value.
GrayImage rgb_to_gray(const RgbImage& img);

// Replicates the gray plane into three identical channels.
RgbImage gray_to_rgb3(const GrayImage& img);

// Full-range BT.601 YCbCr on a [..., 3, H, W] double or float tensor.
// Cb and Cr are centred on zero and lie in [-0.5, 0.5] for in-gamut input.
torch::Tensor rgb_to_ycbcr(const torch::Tensor& rgb);
torch::Tensor ycbcr_to_rgb(const torch::Tensor& ycbcr);

// The (Cb, Cr) planes of an image as a [2, H, W] double tensor.
torch::Tensor chroma(const RgbImage& img);

// Replaces the luma of `predicted` with `source` while keeping its chroma.
// Where the recombined pixel would leave the RGB cube, its chroma is scaled
// toward neutral until it fits, so the output luma equals `source` up to
// float rounding.
RgbImage luminance_overlay(const RgbImage& predicted, const GrayImage& source);

}  // namespace latentcolor

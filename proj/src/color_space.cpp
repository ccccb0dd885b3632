#include "latentcolor/color_space.hpp"

#include "latentcolor/errors.hpp"

namespace latentcolor {
namespace {

constexpr double kCbScale = 2.0 * (1.0 - kLumaB);
constexpr double kCrScale = 2.0 * (1.0 - kLumaR);

torch::Tensor luma_of(const torch::Tensor& rgb) {
  auto r = rgb.select(-3, 0);
  auto g = rgb.select(-3, 1);
  auto b = rgb.select(-3, 2);
  return kLumaR * r + kLumaG * g + kLumaB * b;
}

}  // namespace

GrayImage rgb_to_gray(const RgbImage& img) {
  auto y = luma_of(img.tensor().to(torch::kFloat64));
  return GrayImage(y.clamp(0.0, 1.0).to(torch::kFloat32));
}

RgbImage gray_to_rgb3(const GrayImage& img) {
  return RgbImage(img.tensor().unsqueeze(0).expand({3, img.height(), img.width()}).clone());
}

torch::Tensor rgb_to_ycbcr(const torch::Tensor& rgb) {
  if (rgb.dim() < 3 || rgb.size(-3) != 3) throw ShapeError("rgb_to_ycbcr expects [..., 3, H, W]");
  auto y = luma_of(rgb);
  auto cb = (rgb.select(-3, 2) - y) / kCbScale;
  auto cr = (rgb.select(-3, 0) - y) / kCrScale;
  return torch::stack({y, cb, cr}, -3);
}

torch::Tensor ycbcr_to_rgb(const torch::Tensor& ycbcr) {
  if (ycbcr.dim() < 3 || ycbcr.size(-3) != 3) throw ShapeError("ycbcr_to_rgb expects [..., 3, H, W]");
  auto y = ycbcr.select(-3, 0);
  auto cb = ycbcr.select(-3, 1);
  auto cr = ycbcr.select(-3, 2);
  auto r = y + kCrScale * cr;
  auto b = y + kCbScale * cb;
  auto g = (y - kLumaR * r - kLumaB * b) / kLumaG;
  return torch::stack({r, g, b}, -3);
}

torch::Tensor chroma(const RgbImage& img) {
  return rgb_to_ycbcr(img.tensor().to(torch::kFloat64)).narrow(0, 1, 2);
}

RgbImage luminance_overlay(const RgbImage& predicted, const GrayImage& source) {
  if (!same_size(predicted, source)) {
    throw ShapeError("luminance_overlay: predicted and source sizes differ");
  }
  auto ycc = rgb_to_ycbcr(predicted.tensor().to(torch::kFloat64));
  auto target_y = source.tensor().to(torch::kFloat64);
  ycc[0] = target_y;
  auto rgb = ycbcr_to_rgb(ycc);

  // Offsets from neutral gray; their luma-weighted sum is zero, so scaling
  // them by any factor leaves the luma untouched.
  auto offset = rgb - target_y.unsqueeze(0);
  auto room_up = (1.0 - target_y).unsqueeze(0) / offset;
  auto room_down = (-target_y).unsqueeze(0) / offset;
  auto limit = torch::where(offset > 0, room_up,
                            torch::where(offset < 0, room_down, torch::ones_like(offset)));
  auto scale = std::get<0>(limit.min(0)).clamp(0.0, 1.0);
  auto fitted = target_y.unsqueeze(0) + scale.unsqueeze(0) * offset;
  return RgbImage(fitted.clamp(0.0, 1.0).to(torch::kFloat32));
}

}  // namespace latentcolor

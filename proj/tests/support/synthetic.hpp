#pragma once

// Synthetic frame generators shared by the test suites.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <torch/torch.h>

#include "latentcolor/color_space.hpp"
#include "latentcolor/dataset.hpp"
#include "latentcolor/image.hpp"
#include "latentcolor/png_io.hpp"

namespace latentcolor::testing {

inline constexpr double kPi = 3.14159265358979323846;

// Smooth, multi-coloured frame `k` of a short corpus: two drifting sinusoidal
// colour fields and a moving soft blob.
inline RgbImage varied_frame(int64_t k, int64_t size) {
  auto coords = torch::linspace(0.0, 1.0, size, torch::kFloat64);
  auto y = coords.view({size, 1}).expand({size, size});
  auto x = coords.view({1, size}).expand({size, size});
  const double phase = 0.7 * static_cast<double>(k);
  auto cx = 0.3 + 0.05 * static_cast<double>(k);
  auto blob = torch::exp(-((x - cx).pow(2) + (y - 0.5).pow(2)) / 0.02);
  auto r = 0.5 + 0.35 * torch::sin(2.0 * kPi * x + phase);
  auto g = 0.5 + 0.35 * torch::cos(2.0 * kPi * y - 0.5 * phase);
  auto b = 0.25 + 0.6 * blob;
  return RgbImage(torch::stack({r, g, b}).clamp(0.0, 1.0).to(torch::kFloat32));
}

// Orange chroma shared by every frame of the constant-chroma clip.
inline constexpr float kOrange[3] = {0.9f, 0.6f, 0.3f};

// Frame `k` of a clip whose chroma is constant orange while its luma carries
// a slowly drifting pattern in [0.45, 0.70].
inline RgbImage orange_frame(int64_t k, int64_t size) {
  auto coords = torch::linspace(0.0, 1.0, size, torch::kFloat64);
  auto y = coords.view({size, 1}).expand({size, size});
  auto x = coords.view({1, size}).expand({size, size});
  const double shift = 0.04 * static_cast<double>(k);
  auto luma = 0.575 + 0.125 * torch::sin(2.0 * kPi * (x + shift)) * torch::cos(kPi * y);
  const double base_y = kLumaR * kOrange[0] + kLumaG * kOrange[1] + kLumaB * kOrange[2];
  std::vector<torch::Tensor> ch;
  for (float c : kOrange) ch.push_back(luma + (static_cast<double>(c) - base_y));
  return RgbImage(torch::stack(ch).clamp(0.0, 1.0).to(torch::kFloat32));
}

inline std::vector<RgbImage> orange_clip(int64_t frames, int64_t size) {
  std::vector<RgbImage> out;
  for (int64_t k = 0; k < frames; ++k) out.push_back(orange_frame(k, size));
  return out;
}

// Teacher-forced samples of one clip; frame 0 gets the neutral replica, as in load_sample.
inline std::vector<TrainingSample> clip_samples(const std::vector<RgbImage>& clip) {
  std::vector<TrainingSample> out;
  for (std::size_t i = 0; i < clip.size(); ++i) {
    out.push_back({clip[i], rgb_to_gray(clip[i]), i == 0 ? gray_to_rgb3(rgb_to_gray(clip[0])) : clip[i - 1], i == 0});
  }
  return out;
}

// Writes root/<subject>/<clip>/<index>.png for each (subject, clip) pair.
inline void write_tree(const std::filesystem::path& root, int subjects, int clips_per_subject, int frames,
                       int64_t size = 16) {
  for (int s = 0; s < subjects; ++s) {
    for (int c = 0; c < clips_per_subject; ++c) {
      const auto dir = root / ("s" + std::to_string(s)) / ("clip" + std::to_string(c));
      for (int f = 0; f < frames; ++f) {
        write_png(dir / (std::to_string(f) + ".png"), varied_frame(f + s + c, size));
      }
    }
  }
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("latentcolor_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace latentcolor::testing

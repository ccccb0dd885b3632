#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <torch/torch.h>

#include "latentcolor/denoiser.hpp"
#include "latentcolor/diffusion.hpp"
#include "latentcolor/image.hpp"
#include "latentcolor/vqvae.hpp"

namespace latentcolor {

struct ColorizeRequest {
  std::vector<GrayImage> gray_frames;
  std::optional<RgbImage> exemplar;  // condition for frame 0 (interactive mode)
  uint64_t seed = 0;
  int64_t steps_infer = 50;
  bool overlay = false;
  // Ablation: feed an all-zero previous-frame latent instead of the
  // autoregressive condition.
  bool zero_previous_condition = false;
};

struct ColorizeResult {
  std::vector<RgbImage> color_frames;
  std::vector<double> per_frame_runtime;  // seconds
};

// Reported once per frame, before sampling, with the exact condition used.
struct FrameEvent {
  std::size_t index;
  const GrayImage& gray;
  const RgbImage& condition;
  bool from_exemplar;
};

// Seed of frame `frame_index`'s Gaussian stream; independent of clip length.
uint64_t frame_seed(uint64_t seed, uint64_t frame_index);

// Autoregressive conditioned sampler over a trained VQ-VAE and denoiser.
class Colorizer {
 public:
  // Both models are switched to eval mode. `train_schedule` is the schedule
  // the denoiser was trained with; sampling uses its strided form.
  Colorizer(VqVae vae, Denoiser denoiser, NoiseSchedule train_schedule);

  // Reverse diffusion from pure noise conditioned on the gray frame and a
  // previous colour frame; the final latent is quantized and decoded.
  RgbImage colorize_frame(const GrayImage& gray, const RgbImage& prev_color,
                          const NoiseSchedule& infer_schedule, torch::Generator& gen);

  // Frame-0 colorization conditioned on the neutral replica of its own gray.
  RgbImage bootstrap_first_frame(const GrayImage& gray, const NoiseSchedule& infer_schedule,
                                 torch::Generator& gen);

  ColorizeResult colorize_video(const ColorizeRequest& req);

  void set_frame_hook(std::function<void(const FrameEvent&)> hook) { hook_ = std::move(hook); }

  const NoiseSchedule& train_schedule() const { return train_schedule_; }
  VqVae& vae() { return vae_; }
  Denoiser& denoiser() { return denoiser_; }

 private:
  RgbImage sample(const GrayImage& gray, const RgbImage* prev_color, const NoiseSchedule& infer_schedule,
                  torch::Generator& gen);

  VqVae vae_;
  Denoiser denoiser_;
  NoiseSchedule train_schedule_;
  std::function<void(const FrameEvent&)> hook_;
};

}  // namespace latentcolor

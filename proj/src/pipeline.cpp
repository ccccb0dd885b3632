#include "latentcolor/pipeline.hpp"

#include <chrono>

#include "latentcolor/color_space.hpp"
#include "latentcolor/errors.hpp"
#include "latentcolor/trainer.hpp"

namespace latentcolor {
namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

uint64_t frame_seed(uint64_t seed, uint64_t frame_index) {
  return splitmix64(splitmix64(seed) ^ frame_index);
}

Colorizer::Colorizer(VqVae vae, Denoiser denoiser, NoiseSchedule train_schedule)
    : vae_(std::move(vae)), denoiser_(std::move(denoiser)), train_schedule_(std::move(train_schedule)) {
  if (!vae_ || !denoiser_) throw ConfigError("colorizer needs both a VQ-VAE and a denoiser");
  const auto& dc = denoiser_->config();
  if (dc.latent_size != vae_->config().latent_size() || dc.latent_channels != vae_->config().latent_channels) {
    throw ConfigError("denoiser latent shape does not match the VQ-VAE");
  }
  vae_->eval();
  denoiser_->eval();
}

RgbImage Colorizer::sample(const GrayImage& gray, const RgbImage* prev_color,
                           const NoiseSchedule& infer_schedule, torch::Generator& gen) {
  const auto size = vae_->config().image_size;
  if (gray.height() != size || gray.width() != size) {
    throw ShapeError("colorizer expects " + std::to_string(size) + "x" + std::to_string(size) + " frames");
  }
  if (prev_color && !same_size(*prev_color, gray)) {
    throw ShapeError("previous frame size does not match the gray frame");
  }
  torch::NoGradGuard guard;
  auto z_bw = vae_->encode_batch(gray_to_rgb3(gray).tensor().unsqueeze(0));
  auto z_prev = prev_color ? vae_->encode_batch(prev_color->tensor().unsqueeze(0)) : torch::zeros_like(z_bw);

  auto z = torch::randn(z_bw.sizes(), gen, z_bw.scalar_type());
  for (int64_t i = infer_schedule.steps() - 1; i >= 0; --i) {
    auto t = torch::full({1}, infer_schedule.model_timestep(i), torch::kLong);
    auto eps_hat = denoiser_->predict_noise(z, z_bw, z_prev, t);
    auto noise = i > 0 ? torch::randn(z.sizes(), gen, z.scalar_type()) : torch::zeros_like(z);
    z = p_step(z, eps_hat, i, infer_schedule, noise);
  }
  auto zq = vae_->quantize_batch(z).zq_codebook;
  return RgbImage(vae_->decode_batch(zq)[0]);
}

RgbImage Colorizer::colorize_frame(const GrayImage& gray, const RgbImage& prev_color,
                                   const NoiseSchedule& infer_schedule, torch::Generator& gen) {
  return sample(gray, &prev_color, infer_schedule, gen);
}

RgbImage Colorizer::bootstrap_first_frame(const GrayImage& gray, const NoiseSchedule& infer_schedule,
                                          torch::Generator& gen) {
  const auto neutral = gray_to_rgb3(gray);
  return sample(gray, &neutral, infer_schedule, gen);
}

ColorizeResult Colorizer::colorize_video(const ColorizeRequest& req) {
  if (req.gray_frames.empty()) throw ValidationError("colorize request has no frames");
  for (const auto& g : req.gray_frames) {
    if (!same_size(g, req.gray_frames.front())) throw ShapeError("request frames differ in size");
  }
  if (req.exemplar && !same_size(*req.exemplar, req.gray_frames.front())) {
    throw ShapeError("exemplar size does not match the frames");
  }
  const auto infer = strided_schedule(train_schedule_, req.steps_infer);

  ColorizeResult result;
  for (std::size_t i = 0; i < req.gray_frames.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    const auto& gray = req.gray_frames[i];
    auto gen = make_generator(frame_seed(req.seed, i));

    RgbImage condition;
    bool from_exemplar = false;
    if (i > 0) {
      condition = result.color_frames.back();
    } else if (req.exemplar) {
      condition = *req.exemplar;
      from_exemplar = true;
    } else {
      condition = gray_to_rgb3(gray);
    }
    if (hook_) hook_(FrameEvent{i, gray, condition, from_exemplar});

    auto frame = sample(gray, req.zero_previous_condition ? nullptr : &condition, infer, gen);
    if (req.overlay) frame = luminance_overlay(frame, gray);
    result.color_frames.push_back(std::move(frame));
    result.per_frame_runtime.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  return result;
}

}  // namespace latentcolor

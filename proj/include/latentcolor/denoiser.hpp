#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "latentcolor/nn_blocks.hpp"

namespace latentcolor {

// Input channel layout of the denoiser. Stored in checkpoints so a model is
// never fed its conditions in a different order than it was trained with.
inline const std::array<std::string, 3> kConcatOrder = {"noisy", "grayscale", "previous"};

struct DenoiserConfig {
  int64_t in_channels = 9;
  int64_t latent_channels = 3;
  int64_t num_conditions = 2;
  int64_t inner_channels = 64;
  std::vector<int64_t> channel_multiples = {1, 2, 3, 4};
  int64_t res_blocks = 2;
  int64_t head_channels = 32;
  double dropout = 0.0;
  int64_t latent_size = 32;

  void validate() const;
};

void to_json(nlohmann::json& j, const DenoiserConfig& c);
void from_json(const nlohmann::json& j, DenoiserConfig& c);

// Sinusoidal features of integer timesteps: [B] -> [B, dim].
torch::Tensor timestep_features(const torch::Tensor& t, int64_t dim);

// Conditioned UNet predicting the noise in a latent. Conditions enter by
// channel concatenation at the input; the timestep enters every residual
// block as an additive embedding; self-attention runs at the two coarsest
// resolutions and in the middle block.
class DenoiserImpl : public torch::nn::Module {
 public:
  explicit DenoiserImpl(const DenoiserConfig& cfg);

  const DenoiserConfig& config() const { return cfg_; }

  // x: [B, in_channels, S, S]; t: [B] int64 training-resolution timesteps.
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& t);

  // Concatenates [z_t | z_bw | z_prev] and returns a noise estimate shaped
  // like z_t. All three must be [B, latent_channels, S, S].
  torch::Tensor predict_noise(const torch::Tensor& z_t, const torch::Tensor& z_bw,
                              const torch::Tensor& z_prev, const torch::Tensor& t);

  int64_t parameter_count() const;

 private:
  struct Level {
    std::vector<nn::ResnetBlock> res;
    std::vector<nn::AttentionBlock> attn;  // empty or one per res block
    nn::Downsample down{nullptr};
    nn::Upsample up{nullptr};
  };

  DenoiserConfig cfg_;
  int64_t time_features_;
  torch::nn::Linear time_fc1_{nullptr}, time_fc2_{nullptr};
  torch::nn::Conv2d conv_in_{nullptr};
  std::vector<Level> down_levels_;
  nn::ResnetBlock mid_res1_{nullptr}, mid_res2_{nullptr};
  nn::AttentionBlock mid_attn_{nullptr};
  std::vector<Level> up_levels_;  // coarsest first
  torch::nn::GroupNorm norm_out_{nullptr};
  torch::nn::Conv2d conv_out_{nullptr};
};
TORCH_MODULE(Denoiser);

// Deterministic initialization under `seed`.
Denoiser build_denoiser(const DenoiserConfig& cfg, uint64_t seed);

}  // namespace latentcolor

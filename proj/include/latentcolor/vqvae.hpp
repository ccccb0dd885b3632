#pragma once

#include <cstdint>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "latentcolor/image.hpp"
#include "latentcolor/nn_blocks.hpp"

namespace latentcolor {

struct VqVaeConfig {
  int64_t image_size = 128;
  int64_t codebook_size = 512;
  int64_t latent_channels = 3;
  int64_t hidden_channels = 64;
  double commitment_weight = 0.25;

  static constexpr int64_t kDownsampleFactor = 4;
  int64_t latent_size() const { return image_size / kDownsampleFactor; }
  void validate() const;
};

void to_json(nlohmann::json& j, const VqVaeConfig& c);
void from_json(const nlohmann::json& j, VqVaeConfig& c);

// A single latent grid shaped [d, h, w].
struct LatentGrid {
  torch::Tensor values;
  bool quantized = false;
};

// Snapshot of the quantizer state: entries [K, d] and usage counts [K].
struct Codebook {
  torch::Tensor entries;
  torch::Tensor usage_counts;
};

// Nearest-codebook replacement of a [B, d, h, w] latent batch.
//   zq          straight-through output: forward value is the codebook entry,
//               gradient flows to the encoder unchanged.
//   zq_codebook the raw entries, carrying gradient to the codebook only.
//   indices     [B, h, w] int64.
//   quant_error mean over spatial vectors of the squared replacement distance.
struct Quantized {
  torch::Tensor zq;
  torch::Tensor zq_codebook;
  torch::Tensor indices;
  torch::Tensor quant_error;
};

Quantized quantize(const torch::Tensor& z, const torch::Tensor& codebook_entries);

struct QuantizeResult {
  LatentGrid zq;
  torch::Tensor indices;
  double quant_error = 0.0;
};

QuantizeResult quantize(const LatentGrid& z, const Codebook& codebook);

struct VqVaeLoss {
  torch::Tensor total;
  torch::Tensor recon;
  torch::Tensor codebook;
  torch::Tensor commit;
};

// total = recon + codebook + commitment_weight * commit, where
//   recon    = MSE(x, x_hat)
//   codebook = MSE(sg(z), zq)
//   commit   = MSE(z, sg(zq))
VqVaeLoss vqvae_loss(const torch::Tensor& x, const torch::Tensor& x_hat, const torch::Tensor& z,
                     const torch::Tensor& zq, double commitment_weight);

class VqEncoderImpl : public torch::nn::Module {
 public:
  explicit VqEncoderImpl(const VqVaeConfig& cfg);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv_in_{nullptr};
  nn::ResnetBlock res0_{nullptr}, res1_{nullptr}, res2_{nullptr};
  nn::Downsample down0_{nullptr}, down1_{nullptr};
  torch::nn::GroupNorm norm_out_{nullptr};
  torch::nn::Conv2d conv_out_{nullptr};
};
TORCH_MODULE(VqEncoder);

class VqDecoderImpl : public torch::nn::Module {
 public:
  explicit VqDecoderImpl(const VqVaeConfig& cfg);
  torch::Tensor forward(const torch::Tensor& z);

 private:
  torch::nn::Conv2d conv_in_{nullptr};
  nn::ResnetBlock res0_{nullptr}, res1_{nullptr}, res2_{nullptr};
  nn::Upsample up0_{nullptr}, up1_{nullptr};
  torch::nn::GroupNorm norm_out_{nullptr};
  torch::nn::Conv2d conv_out_{nullptr};
};
TORCH_MODULE(VqDecoder);

struct VqForward {
  torch::Tensor x_hat;  // unclamped reconstruction in [0, 1] units
  torch::Tensor z;
  Quantized quantized;
};

// Image autoencoder with a vector-quantized bottleneck. Batched methods take
// and return [B, 3, H, W] tensors with pixel values in [0, 1].
class VqVaeImpl : public torch::nn::Module {
 public:
  explicit VqVaeImpl(const VqVaeConfig& cfg);

  const VqVaeConfig& config() const { return cfg_; }

  torch::Tensor encode_batch(const torch::Tensor& images);
  Quantized quantize_batch(const torch::Tensor& z);
  // Clamped to [0, 1].
  torch::Tensor decode_batch(const torch::Tensor& z);
  // Training pass; records codebook usage when the module is in train mode.
  VqForward forward(const torch::Tensor& images);

  LatentGrid encode(const RgbImage& img);
  LatentGrid quantize(const LatentGrid& z);
  RgbImage decode(const LatentGrid& z);

  Codebook codebook() const;
  const torch::Tensor& codebook_entries() const { return codebook_; }

 private:
  void check_images(const torch::Tensor& images) const;
  void check_latents(const torch::Tensor& z) const;

  VqVaeConfig cfg_;
  VqEncoder encoder_{nullptr};
  VqDecoder decoder_{nullptr};
  torch::Tensor codebook_;
  torch::Tensor usage_counts_;
};
TORCH_MODULE(VqVae);

VqVae build_vqvae(const VqVaeConfig& cfg, uint64_t seed);

}  // namespace latentcolor

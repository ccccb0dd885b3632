#include "latentcolor/vqvae.hpp"

#include <string>

#include "latentcolor/errors.hpp"

namespace latentcolor {

namespace F = torch::nn::functional;

void VqVaeConfig::validate() const {
  if (image_size <= 0 || image_size % kDownsampleFactor != 0) {
    throw ConfigError("image_size must be a positive multiple of " + std::to_string(kDownsampleFactor));
  }
  if (codebook_size < 1) throw ConfigError("codebook_size must be >= 1");
  if (latent_channels < 1) throw ConfigError("latent_channels must be >= 1");
  if (hidden_channels < 1) throw ConfigError("hidden_channels must be >= 1");
  if (!(commitment_weight >= 0.0)) throw ConfigError("commitment_weight must be >= 0");
}

void to_json(nlohmann::json& j, const VqVaeConfig& c) {
  j = {{"image_size", c.image_size},
       {"codebook_size", c.codebook_size},
       {"latent_channels", c.latent_channels},
       {"hidden_channels", c.hidden_channels},
       {"commitment_weight", c.commitment_weight},
       {"downsample_factor", VqVaeConfig::kDownsampleFactor}};
}

void from_json(const nlohmann::json& j, VqVaeConfig& c) {
  c.image_size = j.value("image_size", c.image_size);
  c.codebook_size = j.value("codebook_size", c.codebook_size);
  c.latent_channels = j.value("latent_channels", c.latent_channels);
  c.hidden_channels = j.value("hidden_channels", c.hidden_channels);
  c.commitment_weight = j.value("commitment_weight", c.commitment_weight);
  if (j.contains("downsample_factor") &&
      j.at("downsample_factor").get<int64_t>() != VqVaeConfig::kDownsampleFactor) {
    throw ConfigError("unsupported downsample_factor");
  }
}

Quantized quantize(const torch::Tensor& z, const torch::Tensor& codebook_entries) {
  if (codebook_entries.dim() != 2 || codebook_entries.size(0) == 0) {
    throw ConfigError("quantize: codebook is empty");
  }
  if (z.dim() != 4 || z.size(1) != codebook_entries.size(1)) {
    throw ShapeError("quantize: latent channels do not match codebook dimension");
  }
  const auto b = z.size(0), d = z.size(1), h = z.size(2), w = z.size(3);
  auto flat = z.detach().permute({0, 2, 3, 1}).reshape({-1, d});
  auto entries = codebook_entries.detach();

  // Exact squared differences (no |a|^2 - 2ab + |b|^2 expansion) in row
  // chunks to bound the [rows, K, d] temporary.
  constexpr int64_t kChunk = 2048;
  std::vector<torch::Tensor> parts;
  for (int64_t start = 0; start < flat.size(0); start += kChunk) {
    auto rows = flat.narrow(0, start, std::min(kChunk, flat.size(0) - start));
    auto dist = (rows.unsqueeze(1) - entries.unsqueeze(0)).pow(2).sum(-1);
    parts.push_back(dist.argmin(1));
  }
  auto idx = torch::cat(parts);

  Quantized out;
  out.indices = idx.view({b, h, w});
  out.zq_codebook = codebook_entries.index_select(0, idx).view({b, h, w, d}).permute({0, 3, 1, 2});
  // Forward value is exactly the codebook entry; the gradient reaches z unchanged.
  out.zq = out.zq_codebook.detach() + (z - z.detach());
  out.quant_error = (z.detach() - out.zq_codebook.detach()).pow(2).sum(1).mean();
  return out;
}

QuantizeResult quantize(const LatentGrid& z, const Codebook& codebook) {
  if (!z.values.defined() || z.values.dim() != 3) throw ShapeError("quantize: latent must be [d, h, w]");
  auto q = quantize(z.values.unsqueeze(0), codebook.entries);
  return {LatentGrid{q.zq_codebook.detach()[0], true}, q.indices[0], q.quant_error.item<double>()};
}

VqVaeLoss vqvae_loss(const torch::Tensor& x, const torch::Tensor& x_hat, const torch::Tensor& z,
                     const torch::Tensor& zq, double commitment_weight) {
  if (!x.sizes().equals(x_hat.sizes())) throw ShapeError("vqvae_loss: x and x_hat shapes differ");
  if (!z.sizes().equals(zq.sizes())) throw ShapeError("vqvae_loss: z and zq shapes differ");
  VqVaeLoss loss;
  loss.recon = F::mse_loss(x_hat, x);
  loss.codebook = F::mse_loss(zq, z.detach());
  loss.commit = F::mse_loss(z, zq.detach());
  loss.total = loss.recon + loss.codebook + commitment_weight * loss.commit;
  return loss;
}

VqEncoderImpl::VqEncoderImpl(const VqVaeConfig& cfg) {
  const auto c = cfg.hidden_channels;
  conv_in_ = register_module("conv_in", nn::conv3x3(3, c));
  res0_ = register_module("res0", nn::ResnetBlock(c, c));
  down0_ = register_module("down0", nn::Downsample(c));
  res1_ = register_module("res1", nn::ResnetBlock(c, 2 * c));
  down1_ = register_module("down1", nn::Downsample(2 * c));
  res2_ = register_module("res2", nn::ResnetBlock(2 * c, 2 * c));
  norm_out_ = register_module("norm_out", nn::group_norm(2 * c));
  conv_out_ = register_module("conv_out", nn::conv1x1(2 * c, cfg.latent_channels));
}

torch::Tensor VqEncoderImpl::forward(const torch::Tensor& x) {
  auto h = conv_in_(x * 2.0 - 1.0);
  h = down0_(res0_(h));
  h = down1_(res1_(h));
  h = res2_(h);
  return conv_out_(F::silu(norm_out_(h)));
}

VqDecoderImpl::VqDecoderImpl(const VqVaeConfig& cfg) {
  const auto c = cfg.hidden_channels;
  conv_in_ = register_module("conv_in", nn::conv3x3(cfg.latent_channels, 2 * c));
  res0_ = register_module("res0", nn::ResnetBlock(2 * c, 2 * c));
  up0_ = register_module("up0", nn::Upsample(2 * c));
  res1_ = register_module("res1", nn::ResnetBlock(2 * c, c));
  up1_ = register_module("up1", nn::Upsample(c));
  res2_ = register_module("res2", nn::ResnetBlock(c, c));
  norm_out_ = register_module("norm_out", nn::group_norm(c));
  conv_out_ = register_module("conv_out", nn::conv3x3(c, 3));
}

torch::Tensor VqDecoderImpl::forward(const torch::Tensor& z) {
  auto h = res0_(conv_in_(z));
  h = res1_(up0_(h));
  h = res2_(up1_(h));
  return (conv_out_(F::silu(norm_out_(h))) + 1.0) * 0.5;
}

VqVaeImpl::VqVaeImpl(const VqVaeConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  encoder_ = register_module("encoder", VqEncoder(cfg_));
  decoder_ = register_module("decoder", VqDecoder(cfg_));
  codebook_ = register_parameter(
      "codebook", torch::rand({cfg_.codebook_size, cfg_.latent_channels}) * 2.0 - 1.0);
  usage_counts_ = register_buffer("usage_counts", torch::zeros({cfg_.codebook_size}, torch::kLong));
}

void VqVaeImpl::check_images(const torch::Tensor& images) const {
  if (images.dim() != 4 || images.size(1) != 3 || images.size(2) != cfg_.image_size ||
      images.size(3) != cfg_.image_size) {
    throw ShapeError("VQ-VAE expects [B, 3, " + std::to_string(cfg_.image_size) + ", " +
                     std::to_string(cfg_.image_size) + "] images");
  }
}

void VqVaeImpl::check_latents(const torch::Tensor& z) const {
  const auto s = cfg_.latent_size();
  if (z.dim() != 4 || z.size(1) != cfg_.latent_channels || z.size(2) != s || z.size(3) != s) {
    throw ShapeError("VQ-VAE expects [B, " + std::to_string(cfg_.latent_channels) + ", " +
                     std::to_string(s) + ", " + std::to_string(s) + "] latents");
  }
}

torch::Tensor VqVaeImpl::encode_batch(const torch::Tensor& images) {
  check_images(images);
  return encoder_(images);
}

Quantized VqVaeImpl::quantize_batch(const torch::Tensor& z) {
  check_latents(z);
  return latentcolor::quantize(z, codebook_);
}

torch::Tensor VqVaeImpl::decode_batch(const torch::Tensor& z) {
  check_latents(z);
  return decoder_(z).clamp(0.0, 1.0);
}

VqForward VqVaeImpl::forward(const torch::Tensor& images) {
  check_images(images);
  VqForward out;
  out.z = encoder_(images);
  out.quantized = latentcolor::quantize(out.z, codebook_);
  if (is_training()) {
    torch::NoGradGuard guard;
    usage_counts_ += torch::bincount(out.quantized.indices.flatten(), {}, cfg_.codebook_size);
  }
  out.x_hat = decoder_(out.quantized.zq);
  return out;
}

LatentGrid VqVaeImpl::encode(const RgbImage& img) {
  torch::NoGradGuard guard;
  return {encode_batch(img.tensor().unsqueeze(0).to(codebook_.scalar_type()))[0], false};
}

LatentGrid VqVaeImpl::quantize(const LatentGrid& z) {
  torch::NoGradGuard guard;
  return latentcolor::quantize(z, codebook()).zq;
}

RgbImage VqVaeImpl::decode(const LatentGrid& z) {
  torch::NoGradGuard guard;
  if (!z.values.defined() || z.values.dim() != 3) throw ShapeError("decode: latent must be [d, h, w]");
  return RgbImage(decode_batch(z.values.unsqueeze(0).to(codebook_.scalar_type()))[0]);
}

Codebook VqVaeImpl::codebook() const {
  return {codebook_.detach().clone(), usage_counts_.clone()};
}

VqVae build_vqvae(const VqVaeConfig& cfg, uint64_t seed) {
  cfg.validate();
  torch::manual_seed(seed);
  VqVae model(cfg);
  return model;
}

}  // namespace latentcolor

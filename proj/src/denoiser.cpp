#include "latentcolor/denoiser.hpp"

#include <cmath>

#include "latentcolor/errors.hpp"

namespace latentcolor {

namespace F = torch::nn::functional;

void DenoiserConfig::validate() const {
  if (latent_channels < 1) throw ConfigError("latent_channels must be >= 1");
  if (num_conditions < 0) throw ConfigError("num_conditions must be >= 0");
  if (in_channels != latent_channels * (num_conditions + 1)) {
    throw ConfigError("in_channels must be " + std::to_string(latent_channels * (num_conditions + 1)) +
                      " for " + std::to_string(num_conditions) + " conditioning latents of " +
                      std::to_string(latent_channels) + " channels, got " +
                      std::to_string(in_channels));
  }
  if (inner_channels < 1) throw ConfigError("inner_channels must be >= 1");
  if (inner_channels % 2 != 0) throw ConfigError("inner_channels must be even");
  if (channel_multiples.empty()) throw ConfigError("channel_multiples must not be empty");
  for (std::size_t i = 0; i < channel_multiples.size(); ++i) {
    if (channel_multiples[i] < 1) throw ConfigError("channel multiples must be >= 1");
    if (i > 0 && channel_multiples[i] < channel_multiples[i - 1]) {
      throw ConfigError("channel multiples must be non-decreasing");
    }
  }
  if (res_blocks < 1) throw ConfigError("res_blocks must be >= 1");
  if (head_channels < 1) throw ConfigError("head_channels must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  const int64_t reduction = int64_t{1} << (channel_multiples.size() - 1);
  if (latent_size < 1 || latent_size % reduction != 0) {
    throw ConfigError("latent_size must be a positive multiple of " + std::to_string(reduction));
  }
}

void to_json(nlohmann::json& j, const DenoiserConfig& c) {
  j = {{"in_channels", c.in_channels},
       {"latent_channels", c.latent_channels},
       {"num_conditions", c.num_conditions},
       {"inner_channels", c.inner_channels},
       {"channel_multiples", c.channel_multiples},
       {"res_blocks", c.res_blocks},
       {"head_channels", c.head_channels},
       {"dropout", c.dropout},
       {"latent_size", c.latent_size}};
}

void from_json(const nlohmann::json& j, DenoiserConfig& c) {
  c.in_channels = j.value("in_channels", c.in_channels);
  c.latent_channels = j.value("latent_channels", c.latent_channels);
  c.num_conditions = j.value("num_conditions", c.num_conditions);
  c.inner_channels = j.value("inner_channels", c.inner_channels);
  c.channel_multiples = j.value("channel_multiples", c.channel_multiples);
  c.res_blocks = j.value("res_blocks", c.res_blocks);
  c.head_channels = j.value("head_channels", c.head_channels);
  c.dropout = j.value("dropout", c.dropout);
  c.latent_size = j.value("latent_size", c.latent_size);
}

torch::Tensor timestep_features(const torch::Tensor& t, int64_t dim) {
  const int64_t half = dim / 2;
  auto freqs = torch::exp(-std::log(10000.0) *
                          torch::arange(half, torch::kFloat64) / static_cast<double>(half));
  auto args = t.to(torch::kFloat64).unsqueeze(1) * freqs.unsqueeze(0);
  return torch::cat({torch::sin(args), torch::cos(args)}, 1);
}

DenoiserImpl::DenoiserImpl(const DenoiserConfig& cfg) : cfg_(cfg), time_features_(cfg.inner_channels) {
  cfg_.validate();
  const auto inner = cfg_.inner_channels;
  const auto emb = 4 * inner;
  const auto levels = static_cast<int64_t>(cfg_.channel_multiples.size());
  const auto attends = [&](int64_t level) { return level >= levels - 2; };

  time_fc1_ = register_module("time_fc1", torch::nn::Linear(time_features_, emb));
  time_fc2_ = register_module("time_fc2", torch::nn::Linear(emb, emb));
  conv_in_ = register_module("conv_in", nn::conv3x3(cfg_.in_channels, inner));

  std::vector<int64_t> skip_channels{inner};
  int64_t ch = inner;
  for (int64_t l = 0; l < levels; ++l) {
    Level level;
    const auto out = inner * cfg_.channel_multiples[static_cast<std::size_t>(l)];
    const auto prefix = "down" + std::to_string(l) + "_";
    for (int64_t r = 0; r < cfg_.res_blocks; ++r) {
      level.res.push_back(register_module(prefix + "res" + std::to_string(r),
                                          nn::ResnetBlock(ch, out, emb, cfg_.dropout)));
      ch = out;
      if (attends(l)) {
        level.attn.push_back(register_module(prefix + "attn" + std::to_string(r),
                                             nn::AttentionBlock(ch, cfg_.head_channels)));
      }
      skip_channels.push_back(ch);
    }
    if (l + 1 < levels) {
      level.down = register_module(prefix + "down", nn::Downsample(ch));
      skip_channels.push_back(ch);
    }
    down_levels_.push_back(std::move(level));
  }

  mid_res1_ = register_module("mid_res1", nn::ResnetBlock(ch, ch, emb, cfg_.dropout));
  mid_attn_ = register_module("mid_attn", nn::AttentionBlock(ch, cfg_.head_channels));
  mid_res2_ = register_module("mid_res2", nn::ResnetBlock(ch, ch, emb, cfg_.dropout));

  for (int64_t l = levels - 1; l >= 0; --l) {
    Level level;
    const auto out = inner * cfg_.channel_multiples[static_cast<std::size_t>(l)];
    const auto prefix = "up" + std::to_string(l) + "_";
    for (int64_t r = 0; r <= cfg_.res_blocks; ++r) {
      const auto skip = skip_channels.back();
      skip_channels.pop_back();
      level.res.push_back(register_module(prefix + "res" + std::to_string(r),
                                          nn::ResnetBlock(ch + skip, out, emb, cfg_.dropout)));
      ch = out;
      if (attends(l)) {
        level.attn.push_back(register_module(prefix + "attn" + std::to_string(r),
                                             nn::AttentionBlock(ch, cfg_.head_channels)));
      }
    }
    if (l > 0) level.up = register_module(prefix + "up", nn::Upsample(ch));
    up_levels_.push_back(std::move(level));
  }

  norm_out_ = register_module("norm_out", nn::group_norm(ch));
  conv_out_ = register_module("conv_out", nn::conv3x3(ch, cfg_.latent_channels));
}

torch::Tensor DenoiserImpl::forward(const torch::Tensor& x, const torch::Tensor& t) {
  if (x.dim() != 4 || x.size(1) != cfg_.in_channels || x.size(2) != cfg_.latent_size ||
      x.size(3) != cfg_.latent_size) {
    throw ShapeError("denoiser expects [B, " + std::to_string(cfg_.in_channels) + ", " +
                     std::to_string(cfg_.latent_size) + ", " + std::to_string(cfg_.latent_size) +
                     "] input");
  }
  if (t.dim() != 1 || t.size(0) != x.size(0)) throw ShapeError("denoiser expects one timestep per sample");

  auto emb = timestep_features(t, time_features_).to(x.scalar_type());
  emb = time_fc2_(F::silu(time_fc1_(emb)));

  std::vector<torch::Tensor> skips;
  auto h = conv_in_(x);
  skips.push_back(h);
  for (auto& level : down_levels_) {
    for (std::size_t r = 0; r < level.res.size(); ++r) {
      h = level.res[r](h, emb);
      if (!level.attn.empty()) h = level.attn[r](h);
      skips.push_back(h);
    }
    if (level.down) {
      h = level.down(h);
      skips.push_back(h);
    }
  }

  h = mid_res2_(mid_attn_(mid_res1_(h, emb)), emb);

  for (auto& level : up_levels_) {
    for (std::size_t r = 0; r < level.res.size(); ++r) {
      h = level.res[r](torch::cat({h, skips.back()}, 1), emb);
      skips.pop_back();
      if (!level.attn.empty()) h = level.attn[r](h);
    }
    if (level.up) h = level.up(h);
  }
  return conv_out_(F::silu(norm_out_(h)));
}

torch::Tensor DenoiserImpl::predict_noise(const torch::Tensor& z_t, const torch::Tensor& z_bw,
                                          const torch::Tensor& z_prev, const torch::Tensor& t) {
  if (cfg_.num_conditions != 2) {
    throw ConfigError("predict_noise needs a denoiser built for two conditioning latents");
  }
  for (const auto* z : {&z_t, &z_bw, &z_prev}) {
    if (z->dim() != 4 || z->size(1) != cfg_.latent_channels) {
      throw ShapeError("predict_noise expects [B, " + std::to_string(cfg_.latent_channels) +
                       ", S, S] latents");
    }
    if (!z->sizes().equals(z_t.sizes())) throw ShapeError("predict_noise: latent shapes differ");
  }
  return forward(torch::cat({z_t, z_bw, z_prev}, 1), t);
}

int64_t DenoiserImpl::parameter_count() const {
  int64_t n = 0;
  for (const auto& p : parameters()) n += p.numel();
  return n;
}

Denoiser build_denoiser(const DenoiserConfig& cfg, uint64_t seed) {
  cfg.validate();
  torch::manual_seed(seed);
  return Denoiser(cfg);
}

}  // namespace latentcolor

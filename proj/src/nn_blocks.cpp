#include "latentcolor/nn_blocks.hpp"

#include <algorithm>
#include <cmath>

#include "latentcolor/errors.hpp"

namespace latentcolor::nn {

namespace F = torch::nn::functional;

int64_t norm_groups(int64_t channels) {
  for (int64_t g = std::min<int64_t>(32, channels); g > 1; --g) {
    if (channels % g == 0) return g;
  }
  return 1;
}

torch::nn::GroupNorm group_norm(int64_t channels) {
  return torch::nn::GroupNorm(torch::nn::GroupNormOptions(norm_groups(channels), channels).eps(1e-6));
}

torch::nn::Conv2d conv3x3(int64_t in, int64_t out, int64_t stride) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
}

torch::nn::Conv2d conv1x1(int64_t in, int64_t out) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 1));
}

ResnetBlockImpl::ResnetBlockImpl(int64_t in_channels, int64_t out_channels, int64_t embedding_dim,
                                 double dropout) {
  norm1_ = register_module("norm1", group_norm(in_channels));
  conv1_ = register_module("conv1", conv3x3(in_channels, out_channels));
  norm2_ = register_module("norm2", group_norm(out_channels));
  dropout_ = register_module("dropout", torch::nn::Dropout(dropout));
  conv2_ = register_module("conv2", conv3x3(out_channels, out_channels));
  if (in_channels != out_channels) {
    skip_ = register_module("skip", conv1x1(in_channels, out_channels));
  }
  if (embedding_dim > 0) {
    embed_proj_ = register_module("embed_proj", torch::nn::Linear(embedding_dim, out_channels));
  }
}

torch::Tensor ResnetBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& embedding) {
  auto h = conv1_(F::silu(norm1_(x)));
  if (embed_proj_) {
    if (!embedding.defined()) throw ShapeError("ResnetBlock: missing timestep embedding");
    h = h + embed_proj_(F::silu(embedding)).unsqueeze(-1).unsqueeze(-1);
  }
  h = conv2_(dropout_(F::silu(norm2_(h))));
  return (skip_ ? skip_(x) : x) + h;
}

AttentionBlockImpl::AttentionBlockImpl(int64_t channels, int64_t head_channels)
    : heads_(std::max<int64_t>(1, channels / std::max<int64_t>(1, head_channels))) {
  if (channels % heads_ != 0) {
    throw ConfigError("attention channels must divide evenly into heads");
  }
  norm_ = register_module("norm", group_norm(channels));
  qkv_ = register_module("qkv", conv1x1(channels, 3 * channels));
  proj_ = register_module("proj", conv1x1(channels, channels));
}

torch::Tensor AttentionBlockImpl::forward(const torch::Tensor& x) {
  const auto b = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  const auto head_dim = c / heads_;
  auto qkv = qkv_(norm_(x)).reshape({b, 3, heads_, head_dim, h * w});
  auto q = qkv.select(1, 0);
  auto k = qkv.select(1, 1);
  auto v = qkv.select(1, 2);
  // [B, heads, N, N] attention over positions.
  auto weights = torch::softmax(
      torch::matmul(q.transpose(-1, -2), k) / std::sqrt(static_cast<double>(head_dim)), -1);
  auto out = torch::matmul(v, weights.transpose(-1, -2)).reshape({b, c, h, w});
  return x + proj_(out);
}

DownsampleImpl::DownsampleImpl(int64_t channels) {
  conv_ = register_module("conv", conv3x3(channels, channels, 2));
}

torch::Tensor DownsampleImpl::forward(const torch::Tensor& x) { return conv_(x); }

UpsampleImpl::UpsampleImpl(int64_t channels) {
  conv_ = register_module("conv", conv3x3(channels, channels));
}

torch::Tensor UpsampleImpl::forward(const torch::Tensor& x) {
  return conv_(F::interpolate(x, F::InterpolateFuncOptions()
                                     .scale_factor(std::vector<double>{2.0, 2.0})
                                     .mode(torch::kNearest)));
}

}  // namespace latentcolor::nn

#pragma once

#include <cstdint>

#include <torch/torch.h>

namespace latentcolor::nn {

// Largest group count <= 32 that divides `channels`.
int64_t norm_groups(int64_t channels);

torch::nn::GroupNorm group_norm(int64_t channels);
torch::nn::Conv2d conv3x3(int64_t in, int64_t out, int64_t stride = 1);
torch::nn::Conv2d conv1x1(int64_t in, int64_t out);

// GroupNorm-SiLU-Conv twice with an identity (or 1x1) skip. When
// `embedding_dim` > 0, a projected embedding is added between the two convs.
class ResnetBlockImpl : public torch::nn::Module {
 public:
  ResnetBlockImpl(int64_t in_channels, int64_t out_channels, int64_t embedding_dim = 0,
                  double dropout = 0.0);

  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& embedding = {});

 private:
  torch::nn::GroupNorm norm1_{nullptr}, norm2_{nullptr};
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, skip_{nullptr};
  torch::nn::Linear embed_proj_{nullptr};
  torch::nn::Dropout dropout_{nullptr};
};
TORCH_MODULE(ResnetBlock);

// Multi-head self-attention over spatial positions with a residual path.
class AttentionBlockImpl : public torch::nn::Module {
 public:
  AttentionBlockImpl(int64_t channels, int64_t head_channels);

  torch::Tensor forward(const torch::Tensor& x);
  int64_t heads() const { return heads_; }

 private:
  int64_t heads_;
  torch::nn::GroupNorm norm_{nullptr};
  torch::nn::Conv2d qkv_{nullptr}, proj_{nullptr};
};
TORCH_MODULE(AttentionBlock);

// Stride-2 3x3 convolution.
class DownsampleImpl : public torch::nn::Module {
 public:
  explicit DownsampleImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv_{nullptr};
};
TORCH_MODULE(Downsample);

// Nearest-neighbour x2 followed by a 3x3 convolution.
class UpsampleImpl : public torch::nn::Module {
 public:
  explicit UpsampleImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv_{nullptr};
};
TORCH_MODULE(Upsample);

}  // namespace latentcolor::nn

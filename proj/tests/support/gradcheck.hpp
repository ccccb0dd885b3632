#pragma once

// Central finite-difference check of the denoiser's training-loss gradient.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <torch/torch.h>

#include "latentcolor/denoiser.hpp"

namespace latentcolor::testing {

struct GradCheckResult {
  int64_t checked = 0;
  double worst_relative_error = 0.0;
  int64_t nonzero_gradients = 0;
};

inline DenoiserConfig micro_denoiser_config() {
  DenoiserConfig c;
  c.inner_channels = 8;
  c.latent_size = 8;
  return c;
}

// Compares autograd against (L(p + h) - L(p - h)) / 2h on `samples` scalar
// parameters drawn uniformly over every parameter element. Runs in double.
inline GradCheckResult gradient_check(const DenoiserConfig& cfg, int64_t samples, uint64_t seed,
                                      double h = 1e-5, double floor = 1e-8) {
  torch::manual_seed(seed);
  Denoiser model(cfg);
  model->to(torch::kFloat64);
  model->eval();
  const auto s = cfg.latent_size;
  const auto d = cfg.latent_channels;
  auto z_t = torch::randn({2, d, s, s}, torch::kFloat64);
  auto z_bw = torch::randn({2, d, s, s}, torch::kFloat64);
  auto z_prev = torch::randn({2, d, s, s}, torch::kFloat64);
  auto noise = torch::randn({2, d, s, s}, torch::kFloat64);
  auto t = torch::tensor({3, 150}, torch::kInt64);

  auto loss_fn = [&] { return torch::mse_loss(model->predict_noise(z_t, z_bw, z_prev, t), noise); };

  model->zero_grad();
  loss_fn().backward();

  auto params = model->parameters();
  std::vector<int64_t> offsets{0};
  for (const auto& p : params) offsets.push_back(offsets.back() + p.numel());

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int64_t> pick(0, offsets.back() - 1);
  GradCheckResult result;
  torch::NoGradGuard no_grad;
  for (int64_t n = 0; n < samples; ++n) {
    const int64_t flat = pick(rng);
    const auto which = static_cast<std::size_t>(
        std::upper_bound(offsets.begin(), offsets.end(), flat) - offsets.begin() - 1);
    auto& p = params[which];
    const int64_t local = flat - offsets[which];
    auto view = p.view({-1});
    const double analytic = p.grad().view({-1})[local].item<double>();
    const double original = view[local].item<double>();
    view[local] = original + h;
    const double up = loss_fn().item<double>();
    view[local] = original - h;
    const double down = loss_fn().item<double>();
    view[local] = original;
    const double numeric = (up - down) / (2.0 * h);
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
    result.worst_relative_error = std::max(result.worst_relative_error, rel);
    if (std::abs(analytic) > floor) ++result.nonzero_gradients;
    ++result.checked;
  }
  return result;
}

}  // namespace latentcolor::testing

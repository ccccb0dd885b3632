#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace latentcolor {

// Beta/alpha/alpha-bar arrays of a (possibly strided) DDPM schedule, in
// double precision. `timesteps[i]` is the training-resolution step that row i
// stands for; it is 0..T-1 for a base schedule and is what the denoiser's
// timestep embedding consumes.
class NoiseSchedule {
 public:
  // Validates betas in (0, 1) and derives the cumulative arrays.
  NoiseSchedule(std::vector<double> betas, std::vector<int64_t> timesteps);

  int64_t steps() const { return static_cast<int64_t>(betas_.size()); }
  double beta(int64_t i) const { return betas_.at(static_cast<std::size_t>(i)); }
  double alpha(int64_t i) const { return alphas_.at(static_cast<std::size_t>(i)); }
  double alpha_bar(int64_t i) const { return alpha_bars_.at(static_cast<std::size_t>(i)); }
  int64_t model_timestep(int64_t i) const { return timesteps_.at(static_cast<std::size_t>(i)); }

  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alphas() const { return alphas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }
  const std::vector<int64_t>& timesteps() const { return timesteps_; }

  // Gathers per-sample coefficients for a batch of step indices; the result
  // is shaped [B, 1, 1, 1] so it broadcasts over latent grids.
  torch::Tensor sqrt_alpha_bar_at(const torch::Tensor& t, torch::ScalarType dtype) const;
  torch::Tensor sqrt_one_minus_alpha_bar_at(const torch::Tensor& t, torch::ScalarType dtype) const;

 private:
  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
  std::vector<int64_t> timesteps_;
};

struct ScheduleConfig {
  int64_t steps_train = 200;
  int64_t steps_infer = 50;
  double linear_start = 1.5e-3;
  double linear_end = 0.0195;

  void validate() const;
};

void to_json(nlohmann::json& j, const ScheduleConfig& c);
void from_json(const nlohmann::json& j, ScheduleConfig& c);

// Betas spaced linearly and inclusively from start to end. steps == 1 yields
// {start}.
NoiseSchedule linear_schedule(int64_t steps, double start, double end);

// Keeps `steps` evenly spaced training timesteps (always including 0 and
// T-1) and re-derives betas so alpha-bar is preserved at every kept step.
NoiseSchedule strided_schedule(const NoiseSchedule& train, int64_t steps);

// One forward noising step: sqrt(1 - beta_t) * x_prev + sqrt(beta_t) * noise.
torch::Tensor q_step(const torch::Tensor& x_prev, int64_t t, const NoiseSchedule& sched,
                     const torch::Tensor& noise);

// Closed-form jump to step t: sqrt(abar_t) * x0 + sqrt(1 - abar_t) * noise.
torch::Tensor q_closed(const torch::Tensor& x0, int64_t t, const NoiseSchedule& sched,
                       const torch::Tensor& noise);

// Batched variant with one step index per leading-dimension sample.
torch::Tensor q_closed(const torch::Tensor& x0, const torch::Tensor& t, const NoiseSchedule& sched,
                       const torch::Tensor& noise);

// One reverse step with fixed variance sigma_t^2 = beta_t; at t == 0 the
// noise term is dropped.
torch::Tensor p_step(const torch::Tensor& x_t, const torch::Tensor& eps_hat, int64_t t,
                     const NoiseSchedule& sched, const torch::Tensor& noise);

}  // namespace latentcolor

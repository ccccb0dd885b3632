#include "latentcolor/diffusion.hpp"

#include <cmath>
#include <string>

#include "latentcolor/errors.hpp"

namespace latentcolor {
namespace {

void check_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* op) {
  if (!a.sizes().equals(b.sizes())) {
    throw ShapeError(std::string(op) + ": tensor shapes differ");
  }
}

void check_step(int64_t t, const NoiseSchedule& sched) {
  if (t < 0 || t >= sched.steps()) {
    throw ShapeError("diffusion step " + std::to_string(t) + " outside [0, " +
                     std::to_string(sched.steps()) + ")");
  }
}

torch::Tensor gather(const std::vector<double>& table, const torch::Tensor& t,
                     torch::ScalarType dtype) {
  auto values = torch::tensor(table, torch::kFloat64);
  auto idx = t.to(torch::kCPU, torch::kLong);
  if (idx.numel() > 0 && (idx.min().item<int64_t>() < 0 ||
                          idx.max().item<int64_t>() >= static_cast<int64_t>(table.size()))) {
    throw ShapeError("diffusion step index out of range");
  }
  return values.index_select(0, idx).to(dtype).view({-1, 1, 1, 1});
}

}  // namespace

NoiseSchedule::NoiseSchedule(std::vector<double> betas, std::vector<int64_t> timesteps)
    : betas_(std::move(betas)), timesteps_(std::move(timesteps)) {
  if (betas_.empty()) throw ConfigError("noise schedule needs at least one step");
  if (timesteps_.size() != betas_.size()) {
    throw ConfigError("noise schedule timestep table does not match beta count");
  }
  alphas_.reserve(betas_.size());
  alpha_bars_.reserve(betas_.size());
  double running = 1.0;
  for (std::size_t i = 0; i < betas_.size(); ++i) {
    const double b = betas_[i];
    if (!(b > 0.0 && b < 1.0)) {
      throw ConfigError("beta[" + std::to_string(i) + "] = " + std::to_string(b) +
                        " is outside (0, 1)");
    }
    alphas_.push_back(1.0 - b);
    running *= 1.0 - b;
    alpha_bars_.push_back(running);
  }
}

torch::Tensor NoiseSchedule::sqrt_alpha_bar_at(const torch::Tensor& t, torch::ScalarType dtype) const {
  return gather(alpha_bars_, t, torch::kFloat64).sqrt().to(dtype);
}

torch::Tensor NoiseSchedule::sqrt_one_minus_alpha_bar_at(const torch::Tensor& t,
                                                         torch::ScalarType dtype) const {
  return (1.0 - gather(alpha_bars_, t, torch::kFloat64)).sqrt().to(dtype);
}

void ScheduleConfig::validate() const {
  if (steps_train < 1) throw ConfigError("steps_train must be >= 1");
  if (steps_infer < 1 || steps_infer > steps_train) {
    throw ConfigError("steps_infer must lie in [1, steps_train]");
  }
  if (!(linear_start > 0.0 && linear_start <= linear_end && linear_end < 1.0)) {
    throw ConfigError("linear schedule needs 0 < linear_start <= linear_end < 1");
  }
}

void to_json(nlohmann::json& j, const ScheduleConfig& c) {
  j = {{"steps_train", c.steps_train},
       {"steps_infer", c.steps_infer},
       {"linear_start", c.linear_start},
       {"linear_end", c.linear_end}};
}

void from_json(const nlohmann::json& j, ScheduleConfig& c) {
  c.steps_train = j.value("steps_train", c.steps_train);
  c.steps_infer = j.value("steps_infer", c.steps_infer);
  c.linear_start = j.value("linear_start", c.linear_start);
  c.linear_end = j.value("linear_end", c.linear_end);
}

NoiseSchedule linear_schedule(int64_t steps, double start, double end) {
  if (steps < 1) throw ConfigError("linear_schedule: steps must be >= 1");
  if (!(start > 0.0 && start <= end && end < 1.0)) {
    throw ConfigError("linear_schedule: need 0 < start <= end < 1");
  }
  std::vector<double> betas(static_cast<std::size_t>(steps));
  std::vector<int64_t> timesteps(static_cast<std::size_t>(steps));
  for (int64_t i = 0; i < steps; ++i) {
    // Endpoints are assigned directly so they carry no interpolation error.
    if (i == 0) {
      betas[0] = start;
    } else if (i == steps - 1) {
      betas[static_cast<std::size_t>(i)] = end;
    } else {
      betas[static_cast<std::size_t>(i)] =
          start + (end - start) * static_cast<double>(i) / static_cast<double>(steps - 1);
    }
    timesteps[static_cast<std::size_t>(i)] = i;
  }
  return NoiseSchedule(std::move(betas), std::move(timesteps));
}

NoiseSchedule strided_schedule(const NoiseSchedule& train, int64_t steps) {
  if (steps < 1) throw ConfigError("strided_schedule: steps must be >= 1");
  const int64_t total = train.steps();
  if (steps > total) {
    throw ConfigError("strided_schedule: cannot take " + std::to_string(steps) + " of " +
                      std::to_string(total) + " steps");
  }
  if (steps == total) return train;

  std::vector<int64_t> picked;
  picked.reserve(static_cast<std::size_t>(steps));
  if (steps == 1) {
    picked.push_back(total - 1);
  } else {
    for (int64_t i = 0; i < steps; ++i) {
      // Rounded linspace over [0, T-1]; strictly increasing since steps <= T.
      picked.push_back(static_cast<int64_t>(
          std::llround(static_cast<double>(i) * static_cast<double>(total - 1) /
                       static_cast<double>(steps - 1))));
    }
  }

  std::vector<double> betas;
  std::vector<int64_t> timesteps;
  double prev_bar = 1.0;
  for (const auto tau : picked) {
    const double bar = train.alpha_bar(tau);
    betas.push_back(1.0 - bar / prev_bar);
    timesteps.push_back(train.model_timestep(tau));
    prev_bar = bar;
  }
  return NoiseSchedule(std::move(betas), std::move(timesteps));
}

torch::Tensor q_step(const torch::Tensor& x_prev, int64_t t, const NoiseSchedule& sched,
                     const torch::Tensor& noise) {
  check_step(t, sched);
  check_same_shape(x_prev, noise, "q_step");
  const double beta = sched.beta(t);
  return std::sqrt(1.0 - beta) * x_prev + std::sqrt(beta) * noise;
}

torch::Tensor q_closed(const torch::Tensor& x0, int64_t t, const NoiseSchedule& sched,
                       const torch::Tensor& noise) {
  check_step(t, sched);
  check_same_shape(x0, noise, "q_closed");
  const double bar = sched.alpha_bar(t);
  return std::sqrt(bar) * x0 + std::sqrt(1.0 - bar) * noise;
}

torch::Tensor q_closed(const torch::Tensor& x0, const torch::Tensor& t, const NoiseSchedule& sched,
                       const torch::Tensor& noise) {
  check_same_shape(x0, noise, "q_closed");
  if (x0.dim() != 4 || t.dim() != 1 || t.size(0) != x0.size(0)) {
    throw ShapeError("batched q_closed expects x0 [B, C, H, W] and t [B]");
  }
  return sched.sqrt_alpha_bar_at(t, x0.scalar_type()) * x0 +
         sched.sqrt_one_minus_alpha_bar_at(t, x0.scalar_type()) * noise;
}

torch::Tensor p_step(const torch::Tensor& x_t, const torch::Tensor& eps_hat, int64_t t,
                     const NoiseSchedule& sched, const torch::Tensor& noise) {
  check_step(t, sched);
  check_same_shape(x_t, eps_hat, "p_step");
  check_same_shape(x_t, noise, "p_step");
  const double beta = sched.beta(t);
  const double eps_coef = beta / std::sqrt(1.0 - sched.alpha_bar(t));
  auto mean = (x_t - eps_coef * eps_hat) / std::sqrt(sched.alpha(t));
  if (t == 0) return mean;
  return mean + std::sqrt(beta) * noise;
}

}  // namespace latentcolor

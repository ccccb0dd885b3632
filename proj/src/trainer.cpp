#include "latentcolor/trainer.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <chrono>
#include <cmath>
#include <sstream>

#include "latentcolor/checkpoint.hpp"
#include "latentcolor/color_space.hpp"
#include "latentcolor/errors.hpp"

namespace fs = std::filesystem;

namespace latentcolor {

namespace F = torch::nn::functional;

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1 && max_steps < 1) throw ConfigError("epochs or max_steps must be >= 1");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be a positive finite number");
  }
  if (image_size < 1) throw ConfigError("image_size must be >= 1");
  if (steps_train < 1) throw ConfigError("steps_train must be >= 1");
  if (log_every < 1) throw ConfigError("log_every must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
}

int64_t TrainConfig::total_steps(int64_t num_samples) const {
  if (max_steps > 0) return max_steps;
  const auto per_epoch = (num_samples + batch_size - 1) / batch_size;
  return epochs * std::max<int64_t>(1, per_epoch);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"batch_size", c.batch_size},       {"epochs", c.epochs},
       {"max_steps", c.max_steps},         {"learning_rate", c.learning_rate},
       {"seed", c.seed},                   {"image_size", c.image_size},
       {"steps_train", c.steps_train},     {"log_every", c.log_every},
       {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.seed = j.value("seed", c.seed);
  c.image_size = j.value("image_size", c.image_size);
  c.steps_train = j.value("steps_train", c.steps_train);
  c.log_every = j.value("log_every", c.log_every);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
}

torch::Generator make_generator(uint64_t seed) { return at::make_generator<at::CPUGeneratorImpl>(seed); }

SampleBank SampleBank::from_samples(std::span<const TrainingSample> samples) {
  if (samples.empty()) throw ValidationError("sample bank needs at least one sample");
  std::vector<torch::Tensor> color, gray, prev;
  for (const auto& s : samples) {
    if (!same_size(s.current_color, samples.front().current_color) ||
        !same_size(s.current_color, s.previous_color) || !same_size(s.current_color, s.current_gray)) {
      throw ShapeError("sample bank images must all share one size");
    }
    color.push_back(s.current_color.tensor());
    gray.push_back(gray_to_rgb3(s.current_gray).tensor());
    prev.push_back(s.previous_color.tensor());
  }
  return {torch::stack(color), torch::stack(gray), torch::stack(prev)};
}

SampleBank SampleBank::load(const ClipManifest& manifest, int64_t size) {
  std::vector<TrainingSample> samples;
  samples.reserve(manifest.records.size());
  for (std::size_t i = 0; i < manifest.records.size(); ++i) samples.push_back(load_sample(manifest, i, size));
  return from_samples(samples);
}

TrainBatch draw_batch(const SampleBank& bank, int64_t batch_size, torch::Generator& gen) {
  if (bank.size() == 0) throw ValidationError("cannot draw from an empty sample bank");
  auto idx = torch::randint(bank.size(), {batch_size}, gen, torch::kLong);
  return {bank.color.index_select(0, idx), bank.gray3.index_select(0, idx),
          bank.previous.index_select(0, idx)};
}

LatentBatch encode_batch(VqVae& vae, const TrainBatch& batch) {
  torch::NoGradGuard guard;
  LatentBatch out;
  out.z_gt = vae->quantize_batch(vae->encode_batch(batch.color)).zq_codebook.detach();
  out.z_bw = vae->encode_batch(batch.gray3);
  out.z_prev = vae->encode_batch(batch.previous);
  return out;
}

torch::Tensor diffusion_loss(const NoisePredictor& predictor, const LatentBatch& latents,
                             const torch::Tensor& t, const torch::Tensor& noise,
                             const NoiseSchedule& sched) {
  auto z_t = q_closed(latents.z_gt, t, sched, noise);
  auto model_t = torch::tensor(sched.timesteps(), torch::kLong).index_select(0, t);
  return F::mse_loss(predictor(z_t, latents.z_bw, latents.z_prev, model_t), noise);
}

double diffusion_train_step(const LatentBatch& latents, Denoiser& model, const NoiseSchedule& sched,
                            torch::optim::Optimizer& optimizer, torch::Generator& gen) {
  model->train();
  const auto b = latents.z_gt.size(0);
  auto t = torch::randint(sched.steps(), {b}, gen, torch::kLong);
  auto noise = torch::randn(latents.z_gt.sizes(), gen, latents.z_gt.scalar_type());
  NoisePredictor predictor = [&](const torch::Tensor& z_t, const torch::Tensor& z_bw,
                                 const torch::Tensor& z_prev, const torch::Tensor& tt) {
    return model->predict_noise(z_t, z_bw, z_prev, tt);
  };
  optimizer.zero_grad();
  auto loss = diffusion_loss(predictor, latents, t, noise, sched);
  const double value = loss.item<double>();
  if (!std::isfinite(value)) {
    std::ostringstream msg;
    msg << "non-finite diffusion loss; timesteps " << t << " z_gt mean "
        << latents.z_gt.mean().item<double>() << " std " << latents.z_gt.std().item<double>();
    throw NumericalError(msg.str());
  }
  loss.backward();
  optimizer.step();
  return value;
}

double diffusion_train_step(const TrainBatch& batch, Denoiser& model, VqVae& vae,
                            const NoiseSchedule& sched, torch::optim::Optimizer& optimizer,
                            torch::Generator& gen) {
  return diffusion_train_step(encode_batch(vae, batch), model, sched, optimizer, gen);
}

VaeStepResult vae_train_step(const torch::Tensor& images, VqVae& vae, torch::optim::Optimizer& optimizer) {
  vae->train();
  optimizer.zero_grad();
  auto out = vae->forward(images);
  auto loss = vqvae_loss(images, out.x_hat, out.z, out.quantized.zq_codebook,
                         vae->config().commitment_weight);
  VaeStepResult r{loss.total.item<double>(), loss.recon.item<double>(), loss.codebook.item<double>(),
                  loss.commit.item<double>()};
  if (!std::isfinite(r.total)) {
    std::ostringstream msg;
    msg << "non-finite VQ-VAE loss (recon " << r.recon << ", codebook " << r.codebook << ", commit "
        << r.commit << "); batch mean " << images.mean().item<double>();
    throw NumericalError(msg.str());
  }
  loss.total.backward();
  optimizer.step();
  return r;
}

void freeze(torch::nn::Module& module) {
  module.eval();
  for (auto& p : module.parameters()) p.set_requires_grad(false);
}

double parameter_checksum(const torch::nn::Module& module) {
  torch::NoGradGuard guard;
  double sum = 0.0;
  for (const auto& p : module.parameters()) sum += p.to(torch::kFloat64).sum().item<double>();
  return sum;
}

nlohmann::json to_json(const LogRecord& r) {
  return {{"step", r.step}, {"loss", r.loss}, {"lr", r.lr}, {"wallclock", r.wallclock}};
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Validates before the optimizer sees the learning rate.
const TrainConfig& checked(const TrainConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

VaeTrainer::VaeTrainer(VqVae model, TrainConfig cfg, torch::Tensor images)
    : model_(std::move(model)),
      cfg_(checked(cfg)),
      images_(std::move(images)),
      optimizer_(model_->parameters(), torch::optim::AdamOptions(cfg.learning_rate)),
      gen_(make_generator(cfg.seed)) {
  if (!images_.defined() || images_.dim() != 4 || images_.size(0) == 0) {
    throw ValidationError("VQ-VAE training needs a non-empty [N, 3, H, W] image pool");
  }
}

VaeStepResult VaeTrainer::step() {
  auto idx = torch::randint(images_.size(0), {cfg_.batch_size}, gen_, torch::kLong);
  auto r = vae_train_step(images_.index_select(0, idx), model_, optimizer_);
  ++step_;
  return r;
}

VaeStepResult VaeTrainer::run(std::ostream* log, const fs::path& checkpoint_dir) {
  const auto start = Clock::now();
  const auto total = cfg_.total_steps(images_.size(0));
  VaeStepResult last;
  while (step_ < total) {
    last = step();
    if (log && (step_ % cfg_.log_every == 0 || step_ == total)) {
      *log << to_json(LogRecord{step_, last.total, cfg_.learning_rate, seconds_since(start)}).dump() << '\n';
    }
    if (!checkpoint_dir.empty() && cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0) {
      save(checkpoint_dir);
    }
  }
  if (!checkpoint_dir.empty()) save(checkpoint_dir);
  return last;
}

void VaeTrainer::save(const fs::path& dir) const {
  save_vqvae(dir, model_);
  save_train_state(dir, optimizer_, gen_, step_);
}

void VaeTrainer::resume(const fs::path& dir) {
  auto loaded = load_vqvae(dir);
  if (loaded->config().image_size != model_->config().image_size ||
      loaded->config().codebook_size != model_->config().codebook_size) {
    throw CheckpointError("resume checkpoint does not match the configured VQ-VAE");
  }
  torch::NoGradGuard guard;
  auto src = loaded->named_parameters();
  for (auto& p : model_->named_parameters()) p.value().copy_(src[p.key()]);
  auto src_buffers = loaded->named_buffers();
  for (auto& b : model_->named_buffers()) b.value().copy_(src_buffers[b.key()]);
  step_ = load_train_state(dir, optimizer_, gen_);
}

torch::Tensor vae_training_images(const SampleBank& bank) {
  return torch::cat({bank.color, bank.gray3});
}

DiffusionTrainer::DiffusionTrainer(Denoiser model, VqVae vae, NoiseSchedule sched, TrainConfig cfg,
                                   const SampleBank& bank, ScheduleConfig schedule_config)
    : model_(std::move(model)),
      vae_(std::move(vae)),
      sched_(std::move(sched)),
      schedule_config_(schedule_config),
      cfg_(checked(cfg)),
      optimizer_(model_->parameters(), torch::optim::AdamOptions(cfg.learning_rate)),
      gen_(make_generator(cfg.seed)) {
  if (cfg_.steps_train != sched_.steps()) {
    throw ConfigError("steps_train does not match the noise schedule length");
  }
  if (model_->config().latent_size != vae_->config().latent_size() ||
      model_->config().latent_channels != vae_->config().latent_channels) {
    throw ConfigError("denoiser latent shape does not match the VQ-VAE");
  }
  freeze(*vae_);
  // The frozen, eval-mode encoder is deterministic, so encoding each sample
  // once is equivalent to encoding it at every step.
  latents_ = encode_batch(vae_, TrainBatch{bank.color, bank.gray3, bank.previous});
}

double DiffusionTrainer::step() {
  auto idx = torch::randint(latents_.z_gt.size(0), {cfg_.batch_size}, gen_, torch::kLong);
  LatentBatch batch{latents_.z_gt.index_select(0, idx), latents_.z_bw.index_select(0, idx),
                    latents_.z_prev.index_select(0, idx)};
  const double loss = diffusion_train_step(batch, model_, sched_, optimizer_, gen_);
  ++step_;
  return loss;
}

double DiffusionTrainer::run(std::ostream* log, const fs::path& checkpoint_dir) {
  const auto start = Clock::now();
  const auto total = cfg_.total_steps(latents_.z_gt.size(0));
  double last = 0.0;
  while (step_ < total) {
    last = step();
    if (log && (step_ % cfg_.log_every == 0 || step_ == total)) {
      *log << to_json(LogRecord{step_, last, cfg_.learning_rate, seconds_since(start)}).dump() << '\n';
    }
    if (!checkpoint_dir.empty() && cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0) {
      save(checkpoint_dir);
    }
  }
  if (!checkpoint_dir.empty()) save(checkpoint_dir);
  return last;
}

void DiffusionTrainer::save(const fs::path& dir) const {
  save_denoiser(dir, model_, schedule_config_);
  save_train_state(dir, optimizer_, gen_, step_);
}

void DiffusionTrainer::resume(const fs::path& dir) {
  auto loaded = load_denoiser(dir);
  torch::NoGradGuard guard;
  auto src = loaded.model->named_parameters();
  for (auto& p : model_->named_parameters()) {
    if (!src.contains(p.key()) || !src[p.key()].sizes().equals(p.value().sizes())) {
      throw CheckpointError("resume checkpoint does not match the configured denoiser");
    }
    p.value().copy_(src[p.key()]);
  }
  step_ = load_train_state(dir, optimizer_, gen_);
}

}  // namespace latentcolor

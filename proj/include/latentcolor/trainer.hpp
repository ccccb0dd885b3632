#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <span>

#include <ATen/core/Generator.h>
#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "latentcolor/dataset.hpp"
#include "latentcolor/denoiser.hpp"
#include "latentcolor/diffusion.hpp"
#include "latentcolor/vqvae.hpp"

namespace latentcolor {

struct TrainConfig {
  int64_t batch_size = 16;
  int64_t epochs = 1;
  int64_t max_steps = 0;  // > 0 overrides epochs
  double learning_rate = 1e-4;
  uint64_t seed = 0;
  int64_t image_size = 128;
  int64_t steps_train = 200;
  int64_t log_every = 10;
  int64_t checkpoint_every = 0;  // 0 disables periodic checkpoints

  void validate() const;
  int64_t total_steps(int64_t num_samples) const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

torch::Generator make_generator(uint64_t seed);

// Teacher-forced samples stacked as [N, 3, H, W] tensors in [0, 1].
struct SampleBank {
  torch::Tensor color;
  torch::Tensor gray3;
  torch::Tensor previous;

  static SampleBank from_samples(std::span<const TrainingSample> samples);
  static SampleBank load(const ClipManifest& manifest, int64_t size);
  int64_t size() const { return color.defined() ? color.size(0) : 0; }
};

struct TrainBatch {
  torch::Tensor color;
  torch::Tensor gray3;
  torch::Tensor previous;
};

// Uniform draw with replacement.
TrainBatch draw_batch(const SampleBank& bank, int64_t batch_size, torch::Generator& gen);

// Conditioning latents for a batch: quantized ground truth, grayscale and
// previous-frame encodings, each [B, d, h, w].
struct LatentBatch {
  torch::Tensor z_gt;
  torch::Tensor z_bw;
  torch::Tensor z_prev;
};

LatentBatch encode_batch(VqVae& vae, const TrainBatch& batch);

using NoisePredictor = std::function<torch::Tensor(const torch::Tensor& z_t, const torch::Tensor& z_bw,
                                                   const torch::Tensor& z_prev, const torch::Tensor& t)>;

// Noise-prediction MSE for given timesteps [B] and injected noise.
torch::Tensor diffusion_loss(const NoisePredictor& predictor, const LatentBatch& latents,
                             const torch::Tensor& t, const torch::Tensor& noise,
                             const NoiseSchedule& sched);

// One ADAM step of the conditioned denoiser: per-sample uniform t, noise from
// `gen`, loss = MSE(predicted noise, noise). Throws NumericalError on a
// non-finite loss.
double diffusion_train_step(const LatentBatch& latents, Denoiser& model, const NoiseSchedule& sched,
                            torch::optim::Optimizer& optimizer, torch::Generator& gen);
// Same, encoding the batch with the frozen autoencoder first.
double diffusion_train_step(const TrainBatch& batch, Denoiser& model, VqVae& vae,
                            const NoiseSchedule& sched, torch::optim::Optimizer& optimizer,
                            torch::Generator& gen);

struct VaeStepResult {
  double total = 0.0;
  double recon = 0.0;
  double codebook = 0.0;
  double commit = 0.0;
};

// One ADAM step on the VQ-VAE loss with straight-through quantization.
VaeStepResult vae_train_step(const torch::Tensor& images, VqVae& vae, torch::optim::Optimizer& optimizer);

// Sets eval mode and disables gradients on every parameter.
void freeze(torch::nn::Module& module);

// Sum of all parameter values in double; used to detect mutation.
double parameter_checksum(const torch::nn::Module& module);

struct LogRecord {
  int64_t step;
  double loss;
  double lr;
  double wallclock;
};

nlohmann::json to_json(const LogRecord& r);

class VaeTrainer {
 public:
  // `images` is a [N, 3, H, W] pool; see vae_training_images().
  VaeTrainer(VqVae model, TrainConfig cfg, torch::Tensor images);

  VaeStepResult step();
  // Runs until cfg.total_steps(); returns the last step's losses.
  VaeStepResult run(std::ostream* log = nullptr, const std::filesystem::path& checkpoint_dir = {});

  void save(const std::filesystem::path& dir) const;
  void resume(const std::filesystem::path& dir);

  int64_t steps_done() const { return step_; }
  VqVae& model() { return model_; }
  torch::Generator& generator() { return gen_; }

 private:
  VqVae model_;
  TrainConfig cfg_;
  torch::Tensor images_;
  torch::optim::Adam optimizer_;
  torch::Generator gen_;
  int64_t step_ = 0;
};

// Colour frames plus their grayscale replicas, since the encoder embeds both.
torch::Tensor vae_training_images(const SampleBank& bank);

class DiffusionTrainer {
 public:
  // Freezes `vae` and caches the conditioning latents of the whole bank.
  DiffusionTrainer(Denoiser model, VqVae vae, NoiseSchedule sched, TrainConfig cfg,
                   const SampleBank& bank, ScheduleConfig schedule_config = {});

  double step();
  double run(std::ostream* log = nullptr, const std::filesystem::path& checkpoint_dir = {});

  void save(const std::filesystem::path& dir) const;
  void resume(const std::filesystem::path& dir);

  int64_t steps_done() const { return step_; }
  Denoiser& model() { return model_; }
  VqVae& vae() { return vae_; }
  torch::Generator& generator() { return gen_; }
  const LatentBatch& cached_latents() const { return latents_; }

 private:
  Denoiser model_;
  VqVae vae_;
  NoiseSchedule sched_;
  ScheduleConfig schedule_config_;
  TrainConfig cfg_;
  LatentBatch latents_;
  torch::optim::Adam optimizer_;
  torch::Generator gen_;
  int64_t step_ = 0;
};

}  // namespace latentcolor

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "latentcolor/denoiser.hpp"
#include "latentcolor/diffusion.hpp"
#include "latentcolor/trainer.hpp"
#include "latentcolor/vqvae.hpp"

namespace latentcolor {

// Every tunable of a run as one flat record. JSON keys and CLI flags share
// names (image_size <-> --image-size). Architecture and schedule defaults
// follow the reference hyperparameter table; training defaults are scaled
// for desk-sized runs.
struct RunConfig {
  // data
  int64_t image_size = 128;
  double test_fraction = 0.2;
  // schedule
  int64_t steps_train = 200;
  int64_t steps_infer = 50;
  double linear_start = 1.5e-3;
  double linear_end = 0.0195;
  // denoiser
  int64_t in_channels = 9;
  int64_t inner_channels = 64;
  std::vector<int64_t> channel_multiples = {1, 2, 3, 4};
  int64_t res_blocks = 2;
  int64_t head_channels = 32;
  double dropout = 0.0;
  // autoencoder
  int64_t codebook_size = 512;
  int64_t latent_channels = 3;
  int64_t vae_hidden_channels = 64;
  double commitment_weight = 0.25;
  // diffusion training
  int64_t batch_size = 16;
  int64_t epochs = 1;
  int64_t max_steps = 0;
  double learning_rate = 1e-4;
  // autoencoder training
  int64_t vae_batch_size = 16;
  int64_t vae_epochs = 1;
  int64_t vae_max_steps = 0;
  double vae_learning_rate = 1e-3;
  // bookkeeping
  uint64_t seed = 0;
  int64_t log_every = 10;
  int64_t checkpoint_every = 0;
  // inference and evaluation
  bool overlay = true;
  std::string embedder = "pooled-color-v1";
  int64_t fvd_window = 4;
  // paths
  std::string train_manifest;
  std::string vae_checkpoint;
  std::string diffusion_checkpoint;

  VqVaeConfig vae_config() const;
  DenoiserConfig denoiser_config() const;
  ScheduleConfig schedule_config() const;
  TrainConfig vae_train_config() const;
  TrainConfig diffusion_train_config() const;

  // Runs every module's validation plus cross-module consistency checks.
  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
// Keys absent from `j` keep their current values; unknown keys are rejected.
void from_json(const nlohmann::json& j, RunConfig& c);

// Parses one flag value into the JSON type of `key`'s default.
nlohmann::json parse_config_value(const std::string& key, const std::string& text);

// Layers defaults < config file < flag overrides. The LATENTCOLOR_SEED
// environment variable supplies the seed when neither file nor flags do.
RunConfig resolve_config(const std::optional<std::string>& config_path,
                         const std::vector<std::pair<std::string, std::string>>& overrides);

// 64-bit FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string config_hash(const RunConfig& c);

}  // namespace latentcolor

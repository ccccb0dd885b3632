#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "latentcolor/denoiser.hpp"
#include "latentcolor/diffusion.hpp"
#include "latentcolor/vqvae.hpp"

namespace latentcolor {

// A checkpoint is a directory holding
//   weights.pt      serialized module parameters and buffers
//   meta.json       sidecar: format, version, kind, config (+ concat order and
//                   schedule for denoisers)
//   optimizer.pt    optional ADAM state
//   rng.pt          optional generator state
inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "latentcolor-checkpoint";

void save_vqvae(const std::filesystem::path& dir, const VqVae& model);
VqVae load_vqvae(const std::filesystem::path& dir);

struct LoadedDenoiser {
  Denoiser model{nullptr};
  ScheduleConfig schedule;
};

void save_denoiser(const std::filesystem::path& dir, const Denoiser& model, const ScheduleConfig& schedule);
LoadedDenoiser load_denoiser(const std::filesystem::path& dir);

// Reads and validates meta.json. Throws IoError if missing, CheckpointError if
// malformed or of another kind, IncompatibleCheckpointError on a version
// mismatch.
nlohmann::json read_sidecar(const std::filesystem::path& dir, const std::string& expected_kind);

void save_train_state(const std::filesystem::path& dir, const torch::optim::Optimizer& optimizer,
                      torch::Generator gen, int64_t step);
// Returns the saved step counter.
int64_t load_train_state(const std::filesystem::path& dir, torch::optim::Optimizer& optimizer,
                         torch::Generator& gen);

}  // namespace latentcolor

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "latentcolor/config.hpp"
#include "latentcolor/image.hpp"

namespace latentcolor {

// The operator-facing commands. Each returns the JSON report it also writes
// (where it writes one); failures surface as exceptions.

// Scans root, splits by subject, writes <out_dir>/train.json and test.json.
nlohmann::json cmd_ingest(const std::filesystem::path& root, const std::filesystem::path& out_dir,
                          double test_fraction, uint64_t seed);

// Trains the autoencoder on cfg.train_manifest into checkpoint dir `out_dir`;
// the line-JSON log goes to <out_dir>/train_log.jsonl. With `resume`, an
// existing checkpoint in `out_dir` is continued.
nlohmann::json cmd_train_vae(const RunConfig& cfg, const std::filesystem::path& out_dir, bool resume = false);

// Trains the denoiser against the frozen cfg.vae_checkpoint.
nlohmann::json cmd_train_diffusion(const RunConfig& cfg, const std::filesystem::path& out_dir,
                                   bool resume = false);

// Colorizes the frames in `input_dir` (<index>.png) into `out_dir`, writing
// report.json beside them.
nlohmann::json cmd_colorize(const RunConfig& cfg, const std::filesystem::path& input_dir,
                            const std::filesystem::path& out_dir,
                            const std::optional<std::filesystem::path>& exemplar);

// Compares predicted and reference frame trees. Either a flat directory of
// <index>.png (one clip) or the root/<subject>/<clip>/ layout is accepted.
// Writes `report_path` when non-empty.
nlohmann::json cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& pred_dir,
                            const std::filesystem::path& ref_dir, const std::filesystem::path& report_path = {});

// Human-readable table of an evaluate report.
std::string render_metrics_table(const nlohmann::json& report);

// Frames of one clip directory, ordered by index; indices must be 0..n-1.
std::vector<std::filesystem::path> list_clip_frames(const std::filesystem::path& dir);

// Clips keyed by clip id; see cmd_evaluate for the accepted layouts.
std::map<std::string, std::vector<RgbImage>> load_clips(const std::filesystem::path& dir);

}  // namespace latentcolor

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "latentcolor/image.hpp"

namespace latentcolor {

enum class Split { kTrain, kTest };

std::string to_string(Split split);

struct FrameRecord {
  std::string clip_id;     // "<subject_id>/<clip directory>", unique across subjects
  std::string subject_id;
  int64_t frame_index = 0;
  std::filesystem::path path;

  bool operator==(const FrameRecord&) const = default;
};

// Records are sorted by (clip_id, frame_index) and every clip holds the
// contiguous indices 0..n-1. A freshly scanned manifest has no split tag.
struct ClipManifest {
  std::vector<FrameRecord> records;
  std::optional<Split> split;

  bool operator==(const ClipManifest&) const = default;
};

struct SubjectSplit {
  ClipManifest train;
  ClipManifest test;
};

struct TrainingSample {
  RgbImage current_color;
  GrayImage current_gray;
  RgbImage previous_color;  // gray_to_rgb3(current_gray) when is_first_frame
  bool is_first_frame = false;
};

// Walks root/<subject_id>/<clip_id>/<frame_index>.png. Throws IoError when
// root is missing and ValidationError naming the clip when its indices are
// not 0..n-1.
ClipManifest scan_frames(const std::filesystem::path& root);

// Throws ValidationError unless the manifest ordering and contiguity
// invariants hold.
void validate(const ClipManifest& manifest);

// Sorted, de-duplicated subject ids.
std::vector<std::string> subjects(const ClipManifest& manifest);

// Assigns ceil(test_fraction * #subjects) randomly chosen subjects to test and
// the rest to train. Deterministic for a given seed.
SubjectSplit split_by_subject(const ClipManifest& manifest, double test_fraction, uint64_t seed);

// Decodes record `index` and its predecessor, resized to size x size.
TrainingSample load_sample(const ClipManifest& manifest, std::size_t index, int64_t size);

// Anti-aliased bilinear resize.
RgbImage resize_bilinear(const RgbImage& img, int64_t height, int64_t width);

nlohmann::json to_json(const ClipManifest& manifest);
ClipManifest manifest_from_json(const nlohmann::json& doc);
void save_manifest(const std::filesystem::path& path, const ClipManifest& manifest);
ClipManifest load_manifest(const std::filesystem::path& path);

}  // namespace latentcolor

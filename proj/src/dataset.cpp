#include "latentcolor/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "latentcolor/color_space.hpp"
#include "latentcolor/errors.hpp"
#include "latentcolor/png_io.hpp"

namespace fs = std::filesystem;

namespace latentcolor {
namespace {

std::optional<int64_t> parse_index(const std::string& stem) {
  if (stem.empty()) return std::nullopt;
  int64_t value = 0;
  auto [ptr, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), value);
  if (ec != std::errc() || ptr != stem.data() + stem.size() || value < 0) return std::nullopt;
  return value;
}

std::vector<fs::path> sorted_subdirs(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool record_less(const FrameRecord& a, const FrameRecord& b) {
  if (a.clip_id != b.clip_id) return a.clip_id < b.clip_id;
  return a.frame_index < b.frame_index;
}

}  // namespace

std::string to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

ClipManifest scan_frames(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("frame root is not a directory: " + root.string());

  ClipManifest manifest;
  for (const auto& subject_dir : sorted_subdirs(root)) {
    const auto subject = subject_dir.filename().string();
    for (const auto& clip_dir : sorted_subdirs(subject_dir)) {
      const auto clip_id = subject + "/" + clip_dir.filename().string();
      std::vector<FrameRecord> clip;
      for (const auto& entry : fs::directory_iterator(clip_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
        auto index = parse_index(entry.path().stem().string());
        if (!index) {
          throw ValidationError("clip " + clip_id + ": frame name is not an index: " +
                                entry.path().filename().string());
        }
        clip.push_back({clip_id, subject, *index, entry.path()});
      }
      std::sort(clip.begin(), clip.end(), record_less);
      manifest.records.insert(manifest.records.end(), clip.begin(), clip.end());
    }
  }
  std::sort(manifest.records.begin(), manifest.records.end(), record_less);
  validate(manifest);
  return manifest;
}

void validate(const ClipManifest& manifest) {
  const auto& recs = manifest.records;
  std::set<std::string> seen_clips;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    const bool starts_clip = i == 0 || recs[i - 1].clip_id != r.clip_id;
    if (starts_clip) {
      if (!seen_clips.insert(r.clip_id).second) {
        throw ValidationError("clip " + r.clip_id + ": records are not grouped by clip");
      }
      if (r.frame_index != 0) {
        throw ValidationError("clip " + r.clip_id + ": first frame index is " +
                              std::to_string(r.frame_index) + ", expected 0");
      }
      continue;
    }
    if (r.subject_id != recs[i - 1].subject_id) {
      throw ValidationError("clip " + r.clip_id + ": mixed subject ids");
    }
    if (r.frame_index != recs[i - 1].frame_index + 1) {
      throw ValidationError("clip " + r.clip_id + ": non-contiguous frame indices (" +
                            std::to_string(recs[i - 1].frame_index) + " then " +
                            std::to_string(r.frame_index) + ")");
    }
  }
}

std::vector<std::string> subjects(const ClipManifest& manifest) {
  std::set<std::string> s;
  for (const auto& r : manifest.records) s.insert(r.subject_id);
  return {s.begin(), s.end()};
}

SubjectSplit split_by_subject(const ClipManifest& manifest, double test_fraction, uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction <= 1.0)) {
    throw ConfigError("test_fraction must lie in (0, 1]");
  }
  auto ids = subjects(manifest);
  if (ids.size() < 2) {
    throw ValidationError("subject-disjoint split needs at least 2 subjects, found " +
                          std::to_string(ids.size()));
  }
  // The epsilon absorbs representation error in products like 0.2 * 10.
  const auto n_test = static_cast<std::size_t>(
      std::ceil(test_fraction * static_cast<double>(ids.size()) - 1e-9));
  if (n_test >= ids.size()) {
    throw ValidationError("test_fraction " + std::to_string(test_fraction) +
                          " leaves no subjects for training");
  }

  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const std::set<std::string> test_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));

  SubjectSplit out;
  out.train.split = Split::kTrain;
  out.test.split = Split::kTest;
  for (const auto& r : manifest.records) {
    (test_ids.count(r.subject_id) ? out.test : out.train).records.push_back(r);
  }
  return out;
}

RgbImage resize_bilinear(const RgbImage& img, int64_t height, int64_t width) {
  if (height <= 0 || width <= 0) throw ShapeError("resize target must be positive");
  if (img.height() == height && img.width() == width) return img;
  namespace F = torch::nn::functional;
  auto out = F::interpolate(img.tensor().unsqueeze(0),
                            F::InterpolateFuncOptions()
                                .size(std::vector<int64_t>{height, width})
                                .mode(torch::kBilinear)
                                .align_corners(false)
                                .antialias(true));
  return RgbImage(out[0].clamp(0.0, 1.0));
}

TrainingSample load_sample(const ClipManifest& manifest, std::size_t index, int64_t size) {
  if (index >= manifest.records.size()) {
    throw ValidationError("sample index " + std::to_string(index) + " out of range");
  }
  const auto& rec = manifest.records[index];
  TrainingSample sample;
  sample.current_color = resize_bilinear(read_png_rgb(rec.path), size, size);
  sample.current_gray = rgb_to_gray(sample.current_color);
  sample.is_first_frame = rec.frame_index == 0;
  if (sample.is_first_frame) {
    // Same neutral condition the colorizer bootstraps frame 0 with.
    sample.previous_color = gray_to_rgb3(sample.current_gray);
  } else {
    const auto& prev = manifest.records.at(index - 1);
    if (prev.clip_id != rec.clip_id || prev.frame_index != rec.frame_index - 1) {
      throw ValidationError("clip " + rec.clip_id + ": previous frame record missing");
    }
    sample.previous_color = resize_bilinear(read_png_rgb(prev.path), size, size);
  }
  return sample;
}

nlohmann::json to_json(const ClipManifest& manifest) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : manifest.records) {
    records.push_back({{"clip_id", r.clip_id},
                       {"subject_id", r.subject_id},
                       {"frame_index", r.frame_index},
                       {"path", r.path.string()}});
  }
  nlohmann::json doc;
  doc["split"] = manifest.split ? nlohmann::json(to_string(*manifest.split)) : nlohmann::json();
  doc["records"] = std::move(records);
  return doc;
}

ClipManifest manifest_from_json(const nlohmann::json& doc) {
  ClipManifest m;
  try {
    const auto& split = doc.at("split");
    if (!split.is_null()) {
      const auto s = split.get<std::string>();
      if (s == "train") {
        m.split = Split::kTrain;
      } else if (s == "test") {
        m.split = Split::kTest;
      } else {
        throw ValidationError("unknown split tag: " + s);
      }
    }
    for (const auto& r : doc.at("records")) {
      m.records.push_back({r.at("clip_id").get<std::string>(), r.at("subject_id").get<std::string>(),
                           r.at("frame_index").get<int64_t>(), fs::path(r.at("path").get<std::string>())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
  validate(m);
  return m;
}

void save_manifest(const fs::path& path, const ClipManifest& manifest) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << to_json(manifest).dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest " + path.string());
}

ClipManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed manifest " + path.string() + ": " + e.what());
  }
  return manifest_from_json(doc);
}

}  // namespace latentcolor

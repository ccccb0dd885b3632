#include "latentcolor/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "latentcolor/checkpoint.hpp"
#include "latentcolor/color_space.hpp"
#include "latentcolor/dataset.hpp"
#include "latentcolor/errors.hpp"
#include "latentcolor/metrics.hpp"
#include "latentcolor/pipeline.hpp"
#include "latentcolor/png_io.hpp"
#include "latentcolor/trainer.hpp"

namespace fs = std::filesystem;

namespace latentcolor {
namespace {

void write_report(const fs::path& path, const nlohmann::json& report) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path.string());
  out << report.dump(2) << '\n';
  if (!out) throw IoError("failed writing report " + path.string());
}

nlohmann::json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

bool has_png_files(const fs::path& dir) {
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") return true;
  }
  return false;
}

void require_path(const std::string& value, const char* key) {
  if (value.empty()) throw ConfigError(std::string("config key ") + key + " is required for this command");
  if (!fs::exists(value)) throw IoError(std::string(key) + " does not exist: " + value);
}

}  // namespace

std::vector<fs::path> list_clip_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("frame directory does not exist: " + dir.string());
  std::vector<std::pair<int64_t, fs::path>> frames;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".png") continue;
    const auto stem = e.path().stem().string();
    int64_t index = -1;
    auto [ptr, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), index);
    if (ec != std::errc() || ptr != stem.data() + stem.size() || index < 0) {
      throw ValidationError("frame name is not an index: " + e.path().string());
    }
    frames.emplace_back(index, e.path());
  }
  std::sort(frames.begin(), frames.end());
  std::vector<fs::path> out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].first != static_cast<int64_t>(i)) {
      throw ValidationError("frame indices in " + dir.string() + " are not contiguous from 0");
    }
    out.push_back(frames[i].second);
  }
  if (out.empty()) throw ValidationError("no PNG frames in " + dir.string());
  return out;
}

std::map<std::string, std::vector<RgbImage>> load_clips(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("frame directory does not exist: " + dir.string());
  std::map<std::string, std::vector<RgbImage>> clips;
  if (has_png_files(dir)) {
    auto& frames = clips["."];
    for (const auto& p : list_clip_frames(dir)) frames.push_back(read_png_rgb(p));
    return clips;
  }
  for (const auto& r : scan_frames(dir).records) clips[r.clip_id].push_back(read_png_rgb(r.path));
  return clips;
}

nlohmann::json cmd_ingest(const fs::path& root, const fs::path& out_dir, double test_fraction, uint64_t seed) {
  const auto manifest = scan_frames(root);
  const auto split = split_by_subject(manifest, test_fraction, seed);
  save_manifest(out_dir / "train.json", split.train);
  save_manifest(out_dir / "test.json", split.test);
  return {{"train_manifest", (out_dir / "train.json").string()},
          {"test_manifest", (out_dir / "test.json").string()},
          {"train_subjects", subjects(split.train)},
          {"test_subjects", subjects(split.test)},
          {"train_frames", split.train.records.size()},
          {"test_frames", split.test.records.size()},
          {"seed", seed},
          {"test_fraction", test_fraction}};
}

nlohmann::json cmd_train_vae(const RunConfig& cfg, const fs::path& out_dir, bool resume) {
  cfg.validate();
  require_path(cfg.train_manifest, "train_manifest");
  const auto bank = SampleBank::load(load_manifest(cfg.train_manifest), cfg.image_size);
  VaeTrainer trainer(build_vqvae(cfg.vae_config(), cfg.seed), cfg.vae_train_config(), vae_training_images(bank));
  if (resume) trainer.resume(out_dir);

  fs::create_directories(out_dir);
  std::ofstream log(out_dir / "train_log.jsonl", resume ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot open training log in " + out_dir.string());
  const auto last = trainer.run(&log, out_dir);
  nlohmann::json report = {{"checkpoint", out_dir.string()},
                           {"steps", trainer.steps_done()},
                           {"final_loss",
                            {{"total", last.total}, {"recon", last.recon}, {"codebook", last.codebook},
                             {"commit", last.commit}}},
                           {"config_hash", config_hash(cfg)},
                           {"config", cfg}};
  write_report(out_dir / "report.json", report);
  return report;
}

nlohmann::json cmd_train_diffusion(const RunConfig& cfg, const fs::path& out_dir, bool resume) {
  cfg.validate();
  require_path(cfg.train_manifest, "train_manifest");
  require_path(cfg.vae_checkpoint, "vae_checkpoint");
  auto vae = load_vqvae(cfg.vae_checkpoint);
  if (vae->config().image_size != cfg.image_size || vae->config().latent_channels != cfg.latent_channels) {
    throw ConfigError("vae_checkpoint was trained for a different image size or latent width");
  }
  const auto bank = SampleBank::load(load_manifest(cfg.train_manifest), cfg.image_size);
  const auto sc = cfg.schedule_config();
  DiffusionTrainer trainer(build_denoiser(cfg.denoiser_config(), cfg.seed), vae,
                           linear_schedule(sc.steps_train, sc.linear_start, sc.linear_end),
                           cfg.diffusion_train_config(), bank, sc);
  if (resume) trainer.resume(out_dir);

  fs::create_directories(out_dir);
  std::ofstream log(out_dir / "train_log.jsonl", resume ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot open training log in " + out_dir.string());
  const double last = trainer.run(&log, out_dir);
  nlohmann::json report = {{"checkpoint", out_dir.string()},
                           {"steps", trainer.steps_done()},
                           {"final_loss", last},
                           {"parameters", trainer.model()->parameter_count()},
                           {"config_hash", config_hash(cfg)},
                           {"config", cfg}};
  write_report(out_dir / "report.json", report);
  return report;
}

nlohmann::json cmd_colorize(const RunConfig& cfg, const fs::path& input_dir, const fs::path& out_dir,
                            const std::optional<fs::path>& exemplar) {
  cfg.validate();
  require_path(cfg.vae_checkpoint, "vae_checkpoint");
  require_path(cfg.diffusion_checkpoint, "diffusion_checkpoint");
  auto vae = load_vqvae(cfg.vae_checkpoint);
  auto loaded = load_denoiser(cfg.diffusion_checkpoint);
  const auto size = vae->config().image_size;
  const auto& sc = loaded.schedule;
  Colorizer colorizer(vae, loaded.model, linear_schedule(sc.steps_train, sc.linear_start, sc.linear_end));

  ColorizeRequest req;
  for (const auto& p : list_clip_frames(input_dir)) {
    req.gray_frames.push_back(rgb_to_gray(resize_bilinear(read_png_rgb(p), size, size)));
  }
  if (exemplar) req.exemplar = resize_bilinear(read_png_rgb(*exemplar), size, size);
  req.seed = cfg.seed;
  req.steps_infer = cfg.steps_infer;
  req.overlay = cfg.overlay;

  const auto result = colorizer.colorize_video(req);
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < result.color_frames.size(); ++i) {
    write_png(out_dir / (std::to_string(i) + ".png"), result.color_frames[i]);
  }
  nlohmann::json report = {{"seed", cfg.seed},
                           {"steps", cfg.steps_infer},
                           {"frames", result.color_frames.size()},
                           {"mode", exemplar ? "exemplar" : "bootstrap"},
                           {"overlay", cfg.overlay},
                           {"per_frame_wallclock", result.per_frame_runtime},
                           {"config_hash", config_hash(cfg)},
                           {"config", cfg}};
  write_report(out_dir / "report.json", report);
  return report;
}

nlohmann::json cmd_evaluate(const RunConfig& cfg, const fs::path& pred_dir, const fs::path& ref_dir,
                            const fs::path& report_path) {
  cfg.validate();
  const auto pred = load_clips(pred_dir);
  const auto ref = load_clips(ref_dir);
  if (pred.size() != ref.size()) {
    throw ValidationError("cannot pair frames: " + std::to_string(pred.size()) + " predicted clips vs " +
                          std::to_string(ref.size()) + " reference clips");
  }

  std::vector<RgbImage> pred_frames, ref_frames;
  std::vector<std::vector<RgbImage>> pred_windows, ref_windows;
  double psnr_sum = 0.0, ssim_sum = 0.0, tc_pred = 0.0, tc_ref = 0.0;
  std::size_t tc_clips = 0;
  for (const auto& [clip_id, frames] : pred) {
    const auto it = ref.find(clip_id);
    if (it == ref.end()) throw ValidationError("cannot pair frames: no reference clip " + clip_id);
    const auto& ref_clip = it->second;
    if (ref_clip.size() != frames.size()) {
      throw ValidationError("cannot pair frames: clip " + clip_id + " has " + std::to_string(frames.size()) +
                            " predicted vs " + std::to_string(ref_clip.size()) + " reference frames");
    }
    for (std::size_t i = 0; i < frames.size(); ++i) {
      psnr_sum += psnr(frames[i], ref_clip[i]);
      ssim_sum += ssim(rgb_to_gray(frames[i]), rgb_to_gray(ref_clip[i]));
    }
    pred_frames.insert(pred_frames.end(), frames.begin(), frames.end());
    ref_frames.insert(ref_frames.end(), ref_clip.begin(), ref_clip.end());
    const auto w = static_cast<std::size_t>(cfg.fvd_window);
    for (std::size_t s = 0; s + w <= frames.size(); s += w) {
      pred_windows.emplace_back(frames.begin() + s, frames.begin() + s + w);
      ref_windows.emplace_back(ref_clip.begin() + s, ref_clip.begin() + s + w);
    }
    if (frames.size() >= 2) {
      tc_pred += temporal_consistency_score(frames);
      tc_ref += temporal_consistency_score(ref_clip);
      ++tc_clips;
    }
  }
  const auto n = static_cast<double>(pred_frames.size());
  const auto image_embedder = make_image_embedder(cfg.embedder);
  const auto clip_embedder = make_clip_embedder(cfg.embedder);

  nlohmann::json metrics;
  metrics["psnr"] = number_or_inf(psnr_sum / n);
  metrics["ssim"] = ssim_sum / n;
  metrics["fid"] = pred_frames.size() >= 2 ? nlohmann::json(fid(pred_frames, ref_frames, *image_embedder))
                                           : nlohmann::json();
  metrics["fvd"] = pred_windows.size() >= 2
                       ? nlohmann::json(fvd(pred_windows, ref_windows, *clip_embedder))
                       : nlohmann::json();
  metrics["temporal_consistency"] = tc_clips ? nlohmann::json(tc_pred / static_cast<double>(tc_clips))
                                             : nlohmann::json();
  metrics["temporal_consistency_reference"] =
      tc_clips ? nlohmann::json(tc_ref / static_cast<double>(tc_clips)) : nlohmann::json();

  nlohmann::json report = {
      {"metrics", metrics},
      {"embedder_id", image_embedder->id()},
      {"clip_embedder_id", clip_embedder->id()},
      {"n_samples", pred_frames.size()},
      {"n_clips", pred.size()},
      {"n_fvd_windows", pred_windows.size()},
      {"conventions",
       {{"psnr", "RGB in [0,1], max value 1, mean over frames; identical frames report \"inf\""},
        {"ssim", "BT.601 luma, 8x8 sliding mean window, C1=(0.01)^2, C2=(0.03)^2, mean over frames"},
        {"fid", "Frechet distance of per-frame embeddings; embedder-relative"},
        {"fvd", "Frechet distance of non-overlapping fvd_window-frame clip embeddings; embedder-relative"},
        {"temporal_consistency", "mean |dCb|,|dCr| between consecutive predicted frames"}}},
      {"config_hash", config_hash(cfg)},
      {"config", cfg}};
  if (!report_path.empty()) write_report(report_path, report);
  return report;
}

std::string render_metrics_table(const nlohmann::json& report) {
  const auto& m = report.at("metrics");
  auto cell = [](const nlohmann::json& v) {
    if (v.is_null()) return std::string("n/a");
    if (v.is_string()) return v.get<std::string>();
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << v.get<double>();
    return s.str();
  };
  std::ostringstream out;
  out << std::left << std::setw(12) << "PSNR" << std::setw(12) << "SSIM" << std::setw(12) << "FID"
      << std::setw(12) << "FVD" << "Temporal\n";
  out << std::setw(12) << cell(m.at("psnr")) << std::setw(12) << cell(m.at("ssim")) << std::setw(12)
      << cell(m.at("fid")) << std::setw(12) << cell(m.at("fvd")) << cell(m.at("temporal_consistency")) << '\n';
  out << "embedder: " << report.at("embedder_id").get<std::string>()
      << "  samples: " << report.at("n_samples").get<std::size_t>()
      << "  config: " << report.at("config_hash").get<std::string>() << '\n';
  return out.str();
}

}  // namespace latentcolor

#include "latentcolor/checkpoint.hpp"

#include <fstream>
#include <mutex>

#include "latentcolor/errors.hpp"

namespace fs = std::filesystem;

namespace latentcolor {
namespace {

constexpr const char* kWeights = "weights.pt";
constexpr const char* kMeta = "meta.json";
constexpr const char* kOptimizer = "optimizer.pt";
constexpr const char* kRng = "rng.pt";
constexpr const char* kTrainState = "train_state.json";

void write_json(const fs::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

nlohmann::json parse_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing checkpoint file " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupted checkpoint sidecar " + path.string() + ": " + e.what());
  }
}

nlohmann::json sidecar(const std::string& kind, nlohmann::json config) {
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"kind", kind},
          {"config", std::move(config)}};
}

template <typename Module>
void save_weights(const fs::path& dir, const Module& model) {
  torch::serialize::OutputArchive archive;
  model->save(archive);
  archive.save_to((dir / kWeights).string());
}

template <typename Module>
void load_weights(const fs::path& dir, Module& model) {
  const auto path = dir / kWeights;
  if (!fs::is_regular_file(path)) throw IoError("missing checkpoint file " + path.string());
  try {
    torch::serialize::InputArchive archive;
    archive.load_from(path.string());
    model->load(archive);
  } catch (const c10::Error& e) {
    throw CheckpointError("cannot load weights " + path.string() + ": " + e.what_without_backtrace());
  }
}

}  // namespace

nlohmann::json read_sidecar(const fs::path& dir, const std::string& expected_kind) {
  auto meta = parse_json_file(dir / kMeta);
  if (!meta.is_object() || meta.value("format", std::string{}) != kCheckpointFormat) {
    throw CheckpointError("not a checkpoint sidecar: " + (dir / kMeta).string());
  }
  if (!meta.contains("version") || !meta["version"].is_number_integer()) {
    throw CheckpointError("checkpoint sidecar lacks a version: " + (dir / kMeta).string());
  }
  const auto version = meta["version"].get<int>();
  if (version != kCheckpointVersion) {
    throw IncompatibleCheckpointError("checkpoint version " + std::to_string(version) +
                                      " is incompatible with supported version " +
                                      std::to_string(kCheckpointVersion));
  }
  const auto kind = meta.value("kind", std::string{});
  if (kind != expected_kind) {
    throw CheckpointError("expected a " + expected_kind + " checkpoint, found '" + kind + "'");
  }
  if (!meta.contains("config") || !meta["config"].is_object()) {
    throw CheckpointError("checkpoint sidecar lacks a config object");
  }
  return meta;
}

void save_vqvae(const fs::path& dir, const VqVae& model) {
  fs::create_directories(dir);
  save_weights(dir, model);
  write_json(dir / kMeta, sidecar("vqvae", model->config()));
}

VqVae load_vqvae(const fs::path& dir) {
  const auto meta = read_sidecar(dir, "vqvae");
  VqVaeConfig cfg;
  try {
    cfg = meta.at("config").get<VqVaeConfig>();
    cfg.validate();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed vqvae config: ") + e.what());
  }
  VqVae model(cfg);
  load_weights(dir, model);
  return model;
}

void save_denoiser(const fs::path& dir, const Denoiser& model, const ScheduleConfig& schedule) {
  fs::create_directories(dir);
  save_weights(dir, model);
  auto meta = sidecar("denoiser", model->config());
  meta["concat_order"] = kConcatOrder;
  meta["schedule"] = schedule;
  write_json(dir / kMeta, meta);
}

LoadedDenoiser load_denoiser(const fs::path& dir) {
  const auto meta = read_sidecar(dir, "denoiser");
  LoadedDenoiser out;
  try {
    if (meta.at("concat_order").get<std::vector<std::string>>() !=
        std::vector<std::string>(kConcatOrder.begin(), kConcatOrder.end())) {
      throw CheckpointError("denoiser checkpoint uses a different conditioning order");
    }
    auto cfg = meta.at("config").get<DenoiserConfig>();
    cfg.validate();
    out.schedule = meta.at("schedule").get<ScheduleConfig>();
    out.schedule.validate();
    out.model = Denoiser(cfg);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed denoiser sidecar: ") + e.what());
  }
  load_weights(dir, out.model);
  return out;
}

void save_train_state(const fs::path& dir, const torch::optim::Optimizer& optimizer,
                      torch::Generator gen, int64_t step) {
  fs::create_directories(dir);
  torch::save(optimizer, (dir / kOptimizer).string());
  torch::Tensor state;
  {
    std::lock_guard<std::mutex> lock(gen.mutex());
    state = gen.get_state();
  }
  torch::save(state, (dir / kRng).string());
  write_json(dir / kTrainState, {{"step", step}});
}

int64_t load_train_state(const fs::path& dir, torch::optim::Optimizer& optimizer, torch::Generator& gen) {
  for (const auto* name : {kOptimizer, kRng, kTrainState}) {
    if (!fs::is_regular_file(dir / name)) throw IoError("missing checkpoint file " + (dir / name).string());
  }
  const auto doc = parse_json_file(dir / kTrainState);
  if (!doc.contains("step") || !doc["step"].is_number_integer()) {
    throw CheckpointError("corrupted training state " + (dir / kTrainState).string());
  }
  try {
    torch::load(optimizer, (dir / kOptimizer).string());
    torch::Tensor state;
    torch::load(state, (dir / kRng).string());
    std::lock_guard<std::mutex> lock(gen.mutex());
    gen.set_state(state);
  } catch (const c10::Error& e) {
    throw CheckpointError("cannot restore training state: " + std::string(e.what_without_backtrace()));
  }
  return doc["step"].get<int64_t>();
}

}  // namespace latentcolor

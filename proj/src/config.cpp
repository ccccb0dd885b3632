#include "latentcolor/config.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "latentcolor/errors.hpp"
#include "latentcolor/metrics.hpp"

namespace latentcolor {

VqVaeConfig RunConfig::vae_config() const {
  VqVaeConfig c;
  c.image_size = image_size;
  c.codebook_size = codebook_size;
  c.latent_channels = latent_channels;
  c.hidden_channels = vae_hidden_channels;
  c.commitment_weight = commitment_weight;
  return c;
}

DenoiserConfig RunConfig::denoiser_config() const {
  DenoiserConfig c;
  c.in_channels = in_channels;
  c.latent_channels = latent_channels;
  c.num_conditions = 2;
  c.inner_channels = inner_channels;
  c.channel_multiples = channel_multiples;
  c.res_blocks = res_blocks;
  c.head_channels = head_channels;
  c.dropout = dropout;
  c.latent_size = image_size / VqVaeConfig::kDownsampleFactor;
  return c;
}

ScheduleConfig RunConfig::schedule_config() const {
  return {steps_train, steps_infer, linear_start, linear_end};
}

TrainConfig RunConfig::vae_train_config() const {
  TrainConfig c;
  c.batch_size = vae_batch_size;
  c.epochs = vae_epochs;
  c.max_steps = vae_max_steps;
  c.learning_rate = vae_learning_rate;
  c.seed = seed;
  c.image_size = image_size;
  c.steps_train = steps_train;
  c.log_every = log_every;
  c.checkpoint_every = checkpoint_every;
  return c;
}

TrainConfig RunConfig::diffusion_train_config() const {
  TrainConfig c = vae_train_config();
  c.batch_size = batch_size;
  c.epochs = epochs;
  c.max_steps = max_steps;
  c.learning_rate = learning_rate;
  return c;
}

void RunConfig::validate() const {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
  if (fvd_window < 1) throw ConfigError("fvd_window must be >= 1");
  vae_config().validate();
  denoiser_config().validate();
  schedule_config().validate();
  vae_train_config().validate();
  diffusion_train_config().validate();
  make_image_embedder(embedder);
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"image_size", c.image_size},
       {"test_fraction", c.test_fraction},
       {"steps_train", c.steps_train},
       {"steps_infer", c.steps_infer},
       {"linear_start", c.linear_start},
       {"linear_end", c.linear_end},
       {"in_channels", c.in_channels},
       {"inner_channels", c.inner_channels},
       {"channel_multiples", c.channel_multiples},
       {"res_blocks", c.res_blocks},
       {"head_channels", c.head_channels},
       {"dropout", c.dropout},
       {"codebook_size", c.codebook_size},
       {"latent_channels", c.latent_channels},
       {"vae_hidden_channels", c.vae_hidden_channels},
       {"commitment_weight", c.commitment_weight},
       {"batch_size", c.batch_size},
       {"epochs", c.epochs},
       {"max_steps", c.max_steps},
       {"learning_rate", c.learning_rate},
       {"vae_batch_size", c.vae_batch_size},
       {"vae_epochs", c.vae_epochs},
       {"vae_max_steps", c.vae_max_steps},
       {"vae_learning_rate", c.vae_learning_rate},
       {"seed", c.seed},
       {"log_every", c.log_every},
       {"checkpoint_every", c.checkpoint_every},
       {"overlay", c.overlay},
       {"embedder", c.embedder},
       {"fvd_window", c.fvd_window},
       {"train_manifest", c.train_manifest},
       {"vae_checkpoint", c.vae_checkpoint},
       {"diffusion_checkpoint", c.diffusion_checkpoint}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  const nlohmann::json defaults = c;
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw ConfigError("unknown config key: " + key);
  }
  try {
#define LATENTCOLOR_READ(field) c.field = j.value(#field, c.field)
    LATENTCOLOR_READ(image_size);
    LATENTCOLOR_READ(test_fraction);
    LATENTCOLOR_READ(steps_train);
    LATENTCOLOR_READ(steps_infer);
    LATENTCOLOR_READ(linear_start);
    LATENTCOLOR_READ(linear_end);
    LATENTCOLOR_READ(in_channels);
    LATENTCOLOR_READ(inner_channels);
    LATENTCOLOR_READ(channel_multiples);
    LATENTCOLOR_READ(res_blocks);
    LATENTCOLOR_READ(head_channels);
    LATENTCOLOR_READ(dropout);
    LATENTCOLOR_READ(codebook_size);
    LATENTCOLOR_READ(latent_channels);
    LATENTCOLOR_READ(vae_hidden_channels);
    LATENTCOLOR_READ(commitment_weight);
    LATENTCOLOR_READ(batch_size);
    LATENTCOLOR_READ(epochs);
    LATENTCOLOR_READ(max_steps);
    LATENTCOLOR_READ(learning_rate);
    LATENTCOLOR_READ(vae_batch_size);
    LATENTCOLOR_READ(vae_epochs);
    LATENTCOLOR_READ(vae_max_steps);
    LATENTCOLOR_READ(vae_learning_rate);
    LATENTCOLOR_READ(seed);
    LATENTCOLOR_READ(log_every);
    LATENTCOLOR_READ(checkpoint_every);
    LATENTCOLOR_READ(overlay);
    LATENTCOLOR_READ(embedder);
    LATENTCOLOR_READ(fvd_window);
    LATENTCOLOR_READ(train_manifest);
    LATENTCOLOR_READ(vae_checkpoint);
    LATENTCOLOR_READ(diffusion_checkpoint);
#undef LATENTCOLOR_READ
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

nlohmann::json parse_config_value(const std::string& key, const std::string& text) {
  const nlohmann::json defaults = RunConfig{};
  if (!defaults.contains(key)) throw ConfigError("unknown config key: " + key);
  const auto& proto = defaults.at(key);
  try {
    if (proto.is_string()) return text;
    if (proto.is_boolean()) {
      if (text == "true" || text == "1" || text == "on") return true;
      if (text == "false" || text == "0" || text == "off") return false;
      throw ConfigError("expected a boolean for " + key + ", got '" + text + "'");
    }
    if (proto.is_array()) {
      // Accept either a JSON array or a comma list such as 1,2,3,4.
      if (!text.empty() && text.front() == '[') return nlohmann::json::parse(text);
      nlohmann::json arr = nlohmann::json::array();
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) arr.push_back(std::stoll(item));
      return arr;
    }
    std::size_t used = 0;
    nlohmann::json out;
    if (proto.is_number_unsigned()) {
      out = std::stoull(text, &used);
    } else if (proto.is_number_integer()) {
      out = std::stoll(text, &used);
    } else {
      out = std::stod(text, &used);
    }
    if (used != text.size()) throw ConfigError("trailing characters in value for " + key + ": '" + text + "'");
    return out;
  } catch (const std::logic_error&) {
    throw ConfigError("cannot parse value for " + key + ": '" + text + "'");
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("cannot parse value for " + key + ": '" + text + "'");
  }
}

RunConfig resolve_config(const std::optional<std::string>& config_path,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  bool seed_given = false;
  if (config_path) {
    std::ifstream in(*config_path);
    if (!in) throw IoError("cannot read config file " + *config_path);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("malformed config file " + *config_path + ": " + e.what());
    }
    from_json(doc, cfg);
    seed_given = doc.contains("seed");
  }
  nlohmann::json patch = nlohmann::json::object();
  for (const auto& [key, text] : overrides) {
    patch[key] = parse_config_value(key, text);
    if (key == "seed") seed_given = true;
  }
  if (!seed_given) {
    if (const char* env = std::getenv("LATENTCOLOR_SEED")) patch["seed"] = parse_config_value("seed", env);
  }
  from_json(patch, cfg);
  cfg.validate();
  return cfg;
}

std::string config_hash(const RunConfig& c) {
  const auto text = nlohmann::json(c).dump();
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

}  // namespace latentcolor

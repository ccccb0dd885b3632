#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "latentcolor/config.hpp"
#include "latentcolor/errors.hpp"
#include "support/synthetic.hpp"

using namespace latentcolor;
using namespace latentcolor::testing;

namespace {

// Restores LATENTCOLOR_SEED on scope exit.
class SeedEnvGuard {
 public:
  SeedEnvGuard() {
    if (const char* v = std::getenv("LATENTCOLOR_SEED")) saved_ = v;
  }
  ~SeedEnvGuard() {
    if (saved_) setenv("LATENTCOLOR_SEED", saved_->c_str(), 1);
    else unsetenv("LATENTCOLOR_SEED");
  }

 private:
  std::optional<std::string> saved_;
};

}  // namespace

TEST(RunConfigTest, DefaultsFollowReferenceHyperparameters) {
  RunConfig c;
  EXPECT_EQ(c.image_size, 128);
  EXPECT_EQ(c.steps_train, 200);
  EXPECT_EQ(c.steps_infer, 50);
  EXPECT_EQ(c.linear_start, 1.5e-3);
  EXPECT_EQ(c.linear_end, 0.0195);
  EXPECT_EQ(c.in_channels, 9);
  EXPECT_EQ(c.inner_channels, 64);
  EXPECT_EQ(c.channel_multiples, (std::vector<int64_t>{1, 2, 3, 4}));
  EXPECT_EQ(c.res_blocks, 2);
  EXPECT_EQ(c.head_channels, 32);
  EXPECT_EQ(c.dropout, 0.0);
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfigTest, DerivedConfigsAgree) {
  RunConfig c;
  c.image_size = 64;
  EXPECT_EQ(c.vae_config().latent_size(), 16);
  EXPECT_EQ(c.denoiser_config().latent_size, 16);
  EXPECT_EQ(c.schedule_config().steps_infer, 50);
  EXPECT_EQ(c.diffusion_train_config().learning_rate, c.learning_rate);
  EXPECT_EQ(c.vae_train_config().learning_rate, c.vae_learning_rate);
}

TEST(RunConfigTest, JsonRoundTrip) {
  RunConfig c;
  c.seed = 77;
  c.channel_multiples = {1, 2};
  c.embedder = "mean-color-v1";
  nlohmann::json j = c;
  RunConfig back;
  from_json(j, back);
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(RunConfigTest, UnknownKeyRejected) {
  RunConfig c;
  EXPECT_THROW(from_json(nlohmann::json{{"no_such_key", 1}}, c), ConfigError);
}

TEST(RunConfigTest, HashChangesWithAnyField) {
  RunConfig a, b;
  b.learning_rate = 2e-4;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(RunConfigTest, ValidationCatchesBadValues) {
  RunConfig c;
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.vae_learning_rate = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.in_channels = 8;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.steps_infer = 300;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.test_fraction = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ParseConfigValue, TypesFollowDefaults) {
  EXPECT_EQ(parse_config_value("image_size", "64"), 64);
  EXPECT_EQ(parse_config_value("learning_rate", "2e-4"), 2e-4);
  EXPECT_EQ(parse_config_value("overlay", "false"), false);
  EXPECT_EQ(parse_config_value("embedder", "mean-color-v1"), "mean-color-v1");
  EXPECT_EQ(parse_config_value("channel_multiples", "1,2,2"), nlohmann::json({1, 2, 2}));
  EXPECT_THROW(parse_config_value("image_size", "64px"), ConfigError);
  EXPECT_THROW(parse_config_value("overlay", "maybe"), ConfigError);
  EXPECT_THROW(parse_config_value("bogus", "1"), ConfigError);
}

TEST(ResolveConfig, FlagsOverrideFileOverrideDefaults) {
  SeedEnvGuard guard;
  unsetenv("LATENTCOLOR_SEED");
  auto dir = scratch_dir("config_layers");
  std::ofstream(dir / "run.json") << R"({"image_size": 64, "learning_rate": 3e-4, "seed": 5})";
  auto c = resolve_config((dir / "run.json").string(), {{"learning_rate", "1e-3"}});
  EXPECT_EQ(c.image_size, 64);
  EXPECT_EQ(c.learning_rate, 1e-3);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.batch_size, RunConfig{}.batch_size);
}

TEST(ResolveConfig, EnvironmentSuppliesSeedOnlyAsFallback) {
  SeedEnvGuard guard;
  setenv("LATENTCOLOR_SEED", "1234", 1);
  EXPECT_EQ(resolve_config(std::nullopt, {}).seed, 1234u);
  EXPECT_EQ(resolve_config(std::nullopt, {{"seed", "9"}}).seed, 9u);
}

TEST(ResolveConfig, BadFilesAreReported) {
  auto dir = scratch_dir("config_bad");
  std::ofstream(dir / "bad.json") << "{oops";
  EXPECT_THROW(resolve_config((dir / "bad.json").string(), {}), ConfigError);
  EXPECT_THROW(resolve_config((dir / "missing.json").string(), {}), IoError);
  EXPECT_THROW(resolve_config(std::nullopt, {{"learning_rate", "-1"}}), ConfigError);
}

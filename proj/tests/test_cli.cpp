#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "latentcolor/color_space.hpp"
#include "latentcolor/commands.hpp"
#include "latentcolor/config.hpp"
#include "latentcolor/errors.hpp"
#include "latentcolor/metrics.hpp"
#include "latentcolor/png_io.hpp"
#include "support/synthetic.hpp"

using namespace latentcolor;
using namespace latentcolor::testing;
namespace fs = std::filesystem;

namespace {

const std::string kCli = LATENTCOLOR_CLI_PATH;

// Micro model shape shared by every training and inference invocation.
const std::string kMicro =
    " --image-size 16 --vae-hidden-channels 8 --codebook-size 16 --inner-channels 8"
    " --channel-multiples 1,2 --res-blocks 1 --head-channels 8 --steps-infer 5"
    " --batch-size 4 --vae-batch-size 4 --log-every 1";

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

std::vector<nlohmann::json> read_log(const fs::path& p) {
  std::vector<nlohmann::json> out;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) out.push_back(nlohmann::json::parse(line));
  return out;
}

// Writes a flat clip directory of n frames.
void write_clip(const fs::path& dir, int n, int offset = 0) {
  for (int i = 0; i < n; ++i) write_png(dir / (std::to_string(i) + ".png"), varied_frame(i + offset, 16));
}

// Ingests a small tree and trains micro checkpoints through the CLI.
struct MicroModels {
  fs::path root, manifests, vae, diffusion;

  explicit MicroModels(const std::string& name) {
    root = scratch_dir(name);
    write_tree(root / "frames", 3, 1, 4);
    manifests = root / "manifests";
    vae = root / "vae";
    diffusion = root / "diffusion";
    EXPECT_EQ(run("ingest --root " + (root / "frames").string() + " --out " + manifests.string() +
                  " --test-fraction 0.34 --seed 1"),
              0);
    EXPECT_EQ(run("train-vae" + kMicro + " --vae-max-steps 3 --train-manifest " + train() + " --out " +
                  vae.string()),
              0);
    EXPECT_EQ(run("train-diffusion" + kMicro + " --max-steps 3 --train-manifest " + train() +
                  " --vae-checkpoint " + vae.string() + " --out " + diffusion.string()),
              0);
  }

  std::string train() const { return (manifests / "train.json").string(); }
  std::string models() const {
    return kMicro + " --vae-checkpoint " + vae.string() + " --diffusion-checkpoint " + diffusion.string();
  }
};

}  // namespace

TEST(CliIngest, WritesDisjointManifests) {
  auto dir = scratch_dir("cli_ingest");
  write_tree(dir / "frames", 2, 1, 3);
  ASSERT_EQ(run("ingest --root " + (dir / "frames").string() + " --out " + (dir / "m").string() +
                " --test-fraction 0.5 --seed 3"),
            0);
  auto train = load_manifest(dir / "m" / "train.json");
  auto test = load_manifest(dir / "m" / "test.json");
  EXPECT_EQ(subjects(train).size(), 1u);
  EXPECT_EQ(subjects(test).size(), 1u);
  EXPECT_NE(subjects(train), subjects(test));
}

TEST(CliIngest, RerunIsByteIdentical) {
  auto dir = scratch_dir("cli_ingest_rerun");
  write_tree(dir / "frames", 4, 2, 2);
  const auto root = (dir / "frames").string();
  ASSERT_EQ(run("ingest --root " + root + " --out " + (dir / "a").string() + " --seed 8"), 0);
  ASSERT_EQ(run("ingest --root " + root + " --out " + (dir / "b").string() + " --seed 8"), 0);
  EXPECT_EQ(slurp(dir / "a" / "train.json"), slurp(dir / "b" / "train.json"));
  EXPECT_EQ(slurp(dir / "a" / "test.json"), slurp(dir / "b" / "test.json"));
}

TEST(CliIngest, FullTestFractionFails) {
  auto dir = scratch_dir("cli_ingest_full");
  write_tree(dir / "frames", 2, 1, 2);
  EXPECT_NE(run("ingest --root " + (dir / "frames").string() + " --out " + (dir / "m").string() +
                " --test-fraction 1.0"),
            0);
  EXPECT_FALSE(fs::exists(dir / "m" / "train.json"));
  EXPECT_THROW(cmd_ingest(dir / "frames", dir / "m", 1.0, 0), ValidationError);
}

TEST(CliTrain, MicroConfigCompletesAndLogs) {
  MicroModels m("cli_train");
  auto report = read_json(m.diffusion / "report.json");
  EXPECT_EQ(report["steps"], 3);
  EXPECT_TRUE(report.contains("config_hash"));
  auto log = read_log(m.vae / "train_log.jsonl");
  ASSERT_EQ(log.size(), 3u);
  for (const auto& rec : log) {
    EXPECT_TRUE(rec.contains("step") && rec.contains("loss") && rec.contains("lr") && rec.contains("wallclock"));
  }
  EXPECT_TRUE(fs::exists(m.diffusion / "meta.json"));
  EXPECT_TRUE(fs::exists(m.diffusion / "weights.pt"));
}

TEST(CliTrain, ResumeReproducesNextStepLoss) {
  MicroModels m("cli_resume");
  const auto base = kMicro + " --train-manifest " + m.train() + " --vae-checkpoint " + m.vae.string();
  const auto straight = m.root / "straight";
  const auto split = m.root / "split";
  ASSERT_EQ(run("train-diffusion" + base + " --max-steps 4 --out " + straight.string()), 0);
  ASSERT_EQ(run("train-diffusion" + base + " --max-steps 2 --out " + split.string()), 0);
  ASSERT_EQ(run("train-diffusion" + base + " --max-steps 4 --resume --out " + split.string()), 0);
  auto a = read_log(straight / "train_log.jsonl");
  auto b = read_log(split / "train_log.jsonl");
  ASSERT_EQ(a.size(), 4u);
  ASSERT_EQ(b.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(b[i]["step"], a[i]["step"]);
    EXPECT_EQ(b[i]["loss"].get<double>(), a[i]["loss"].get<double>()) << "step " << i + 1;
  }
}

TEST(CliTrain, NonPositiveLearningRateFails) {
  auto dir = scratch_dir("cli_lr");
  write_tree(dir / "frames", 2, 1, 2);
  ASSERT_EQ(run("ingest --root " + (dir / "frames").string() + " --out " + (dir / "m").string() + " --test-fraction 0.5"), 0);
  EXPECT_NE(run("train-vae" + kMicro + " --vae-learning-rate 0 --vae-max-steps 1 --train-manifest " +
                (dir / "m" / "train.json").string() + " --out " + (dir / "vae").string()),
            0);
  EXPECT_NE(run("train-vae" + kMicro + " --vae-learning-rate -0.001 --vae-max-steps 1 --train-manifest " +
                (dir / "m" / "train.json").string() + " --out " + (dir / "vae").string()),
            0);
  EXPECT_FALSE(fs::exists(dir / "vae" / "weights.pt"));
}

TEST(CliColorize, SameSeedGivesIdenticalFiles) {
  MicroModels m("cli_colorize");
  write_clip(m.root / "clip", 3);
  ASSERT_EQ(run("colorize" + m.models() + " --seed 4 --input " + (m.root / "clip").string() + " --out " +
                (m.root / "o1").string()),
            0);
  ASSERT_EQ(run("colorize" + m.models() + " --seed 4 --input " + (m.root / "clip").string() + " --out " +
                (m.root / "o2").string()),
            0);
  for (int i = 0; i < 3; ++i) {
    const auto name = std::to_string(i) + ".png";
    ASSERT_TRUE(fs::exists(m.root / "o1" / name));
    EXPECT_EQ(slurp(m.root / "o1" / name), slurp(m.root / "o2" / name)) << name;
  }
  auto report = read_json(m.root / "o1" / "report.json");
  EXPECT_EQ(report["mode"], "bootstrap");
  EXPECT_EQ(report["frames"], 3);
  EXPECT_EQ(report["seed"], 4);
  EXPECT_EQ(report["per_frame_wallclock"].size(), 3u);
  EXPECT_EQ(report["config"]["seed"], 4);
}

TEST(CliColorize, ExemplarSelectsInteractiveMode) {
  MicroModels m("cli_exemplar");
  write_clip(m.root / "clip", 2);
  write_png(m.root / "exemplar.png", varied_frame(0, 16));
  ASSERT_EQ(run("colorize" + m.models() + " --input " + (m.root / "clip").string() + " --exemplar " +
                (m.root / "exemplar.png").string() + " --out " + (m.root / "o").string()),
            0);
  EXPECT_EQ(read_json(m.root / "o" / "report.json")["mode"], "exemplar");
}

TEST(CliColorize, OverlayKeepsInputLuma) {
  MicroModels m("cli_overlay");
  write_clip(m.root / "clip", 2);
  ASSERT_EQ(run("colorize" + m.models() + " --overlay true --input " + (m.root / "clip").string() + " --out " +
                (m.root / "o").string()),
            0);
  for (int i = 0; i < 2; ++i) {
    auto out = read_png_rgb(m.root / "o" / (std::to_string(i) + ".png"));
    auto in = read_png_gray(m.root / "clip" / (std::to_string(i) + ".png"));
    // 8-bit quantisation of each channel adds at most half a level of luma error.
    EXPECT_LE((rgb_to_gray(out).tensor() - in.tensor()).abs().max().item<float>(), 1e-3f + 0.5f / 255.0f);
  }
}

TEST(CliEvaluate, IdenticalDirectoriesGivePerfectScores) {
  auto dir = scratch_dir("cli_eval_same");
  write_clip(dir / "a", 8);
  write_clip(dir / "b", 8);
  ASSERT_EQ(run("evaluate --pred " + (dir / "a").string() + " --ref " + (dir / "b").string() + " --report " +
                (dir / "r.json").string()),
            0);
  auto r = read_json(dir / "r.json");
  EXPECT_EQ(r["metrics"]["psnr"], "inf");
  EXPECT_NEAR(r["metrics"]["ssim"].get<double>(), 1.0, 1e-12);
  EXPECT_NEAR(r["metrics"]["fid"].get<double>(), 0.0, 1e-8);
  EXPECT_NEAR(r["metrics"]["fvd"].get<double>(), 0.0, 1e-8);
  EXPECT_EQ(r["embedder_id"], "pooled-color-v1");
  EXPECT_EQ(r["config_hash"].get<std::string>().size(), 16u);
  EXPECT_EQ(r["config_hash"], config_hash(RunConfig{}));
}

TEST(CliEvaluate, MatchesDirectLibraryCalls) {
  auto dir = scratch_dir("cli_eval_parity");
  write_clip(dir / "pred", 8, 0);
  write_clip(dir / "ref", 8, 1);
  ASSERT_EQ(run("evaluate --embedder mean-color-v1 --fvd-window 2 --pred " + (dir / "pred").string() + " --ref " +
                (dir / "ref").string() + " --report " + (dir / "r.json").string()),
            0);
  auto r = read_json(dir / "r.json");

  std::vector<RgbImage> pred, ref;
  double p = 0.0, s = 0.0;
  for (int i = 0; i < 8; ++i) {
    pred.push_back(read_png_rgb(dir / "pred" / (std::to_string(i) + ".png")));
    ref.push_back(read_png_rgb(dir / "ref" / (std::to_string(i) + ".png")));
    p += psnr(pred.back(), ref.back());
    s += ssim(rgb_to_gray(pred.back()), rgb_to_gray(ref.back()));
  }
  std::vector<std::vector<RgbImage>> pw, rw;
  for (int i = 0; i < 8; i += 2) {
    pw.push_back({pred[i], pred[i + 1]});
    rw.push_back({ref[i], ref[i + 1]});
  }
  MeanColorEmbedder e;
  auto ce = make_clip_embedder("mean-color-v1");
  EXPECT_NEAR(r["metrics"]["psnr"].get<double>(), p / 8, 1e-9);
  EXPECT_NEAR(r["metrics"]["ssim"].get<double>(), s / 8, 1e-9);
  EXPECT_NEAR(r["metrics"]["fid"].get<double>(), fid(pred, ref, e), 1e-9);
  EXPECT_NEAR(r["metrics"]["fvd"].get<double>(), fvd(pw, rw, *ce), 1e-9);
  EXPECT_NEAR(r["metrics"]["temporal_consistency"].get<double>(), temporal_consistency_score(pred), 1e-12);
  EXPECT_EQ(r["embedder_id"], "mean-color-v1");
  EXPECT_EQ(r["n_samples"], 8);
}

TEST(CliEvaluate, UnpairableDirectoriesFail) {
  auto dir = scratch_dir("cli_eval_mismatch");
  write_clip(dir / "a", 3);
  write_clip(dir / "b", 4);
  EXPECT_NE(run("evaluate --pred " + (dir / "a").string() + " --ref " + (dir / "b").string()), 0);
  EXPECT_THROW(cmd_evaluate(RunConfig{}, dir / "a", dir / "b"), ValidationError);
}

TEST(CliConfig, FileValuesAndFlagOverrides) {
  auto dir = scratch_dir("cli_config");
  write_clip(dir / "a", 4);
  std::ofstream(dir / "run.json") << R"({"embedder": "mean-color-v1", "fvd_window": 2})";
  ASSERT_EQ(run("evaluate --config " + (dir / "run.json").string() + " --fvd-window 1 --pred " +
                (dir / "a").string() + " --ref " + (dir / "a").string() + " --report " + (dir / "r.json").string()),
            0);
  auto r = read_json(dir / "r.json");
  EXPECT_EQ(r["config"]["embedder"], "mean-color-v1");
  EXPECT_EQ(r["config"]["fvd_window"], 1);
  EXPECT_EQ(r["n_fvd_windows"], 4);
  EXPECT_NE(run("evaluate --config " + (dir / "missing.json").string() + " --pred " + (dir / "a").string() +
                " --ref " + (dir / "a").string()),
            0);
}

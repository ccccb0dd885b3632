// latentcolor: ingest frame trees, train the autoencoder and the conditioned
// latent denoiser, colorize clips and evaluate the results.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "latentcolor/commands.hpp"
#include "latentcolor/config.hpp"
#include "latentcolor/errors.hpp"

namespace fs = std::filesystem;
using namespace latentcolor;

namespace {

// Mirrors every RunConfig key as a --dashed-flag on a subcommand.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run config file");
    const nlohmann::json defaults = RunConfig{};
    for (const auto& [key, value] : defaults.items()) {
      std::string flag = key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      options[key] = cmd->add_option("--" + flag, values[key], "config key " + key + " (default " +
                                                                   value.dump() + ")");
    }
  }

  RunConfig resolve() const {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) overrides.emplace_back(key, values.at(key));
    }
    return resolve_config(config_path.empty() ? std::nullopt : std::optional<std::string>(config_path),
                          overrides);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exemplar-conditioned latent diffusion video colorization"};
  app.require_subcommand(1);

  std::string root, out, input, exemplar, pred, ref, report;
  bool resume = false;

  auto* ingest = app.add_subcommand("ingest", "scan a frame tree and write train/test manifests");
  ConfigFlags ingest_flags;
  ingest_flags.attach(ingest);
  ingest->add_option("--root", root, "root/<subject>/<clip>/<index>.png")->required();
  ingest->add_option("--out", out, "directory for train.json and test.json")->required();

  auto* train_vae = app.add_subcommand("train-vae", "train the VQ-VAE");
  ConfigFlags vae_flags;
  vae_flags.attach(train_vae);
  train_vae->add_option("--out", out, "checkpoint directory")->required();
  train_vae->add_flag("--resume", resume, "continue from the checkpoint in --out");

  auto* train_diff = app.add_subcommand("train-diffusion", "train the conditioned latent denoiser");
  ConfigFlags diff_flags;
  diff_flags.attach(train_diff);
  train_diff->add_option("--out", out, "checkpoint directory")->required();
  train_diff->add_flag("--resume", resume, "continue from the checkpoint in --out");

  auto* colorize = app.add_subcommand("colorize", "colorize a directory of grayscale frames");
  ConfigFlags col_flags;
  col_flags.attach(colorize);
  colorize->add_option("--input", input, "directory of <index>.png frames")->required();
  colorize->add_option("--out", out, "output directory")->required();
  colorize->add_option("--exemplar", exemplar, "colour reference for the first frame");

  auto* evaluate = app.add_subcommand("evaluate", "score predicted frames against references");
  ConfigFlags eval_flags;
  eval_flags.attach(evaluate);
  evaluate->add_option("--pred", pred, "predicted frames")->required();
  evaluate->add_option("--ref", ref, "reference frames")->required();
  evaluate->add_option("--report", report, "JSON report path (default <pred>/metrics.json)");

  CLI11_PARSE(app, argc, argv);

  torch::set_num_threads(1);
  try {
    nlohmann::json result;
    if (ingest->parsed()) {
      const auto cfg = ingest_flags.resolve();
      result = cmd_ingest(root, out, cfg.test_fraction, cfg.seed);
    } else if (train_vae->parsed()) {
      result = cmd_train_vae(vae_flags.resolve(), out, resume);
    } else if (train_diff->parsed()) {
      result = cmd_train_diffusion(diff_flags.resolve(), out, resume);
    } else if (colorize->parsed()) {
      result = cmd_colorize(col_flags.resolve(), input, out,
                            exemplar.empty() ? std::nullopt : std::optional<fs::path>(exemplar));
    } else if (evaluate->parsed()) {
      const fs::path report_path = report.empty() ? fs::path(pred) / "metrics.json" : fs::path(report);
      result = cmd_evaluate(eval_flags.resolve(), pred, ref, report_path);
      std::cout << render_metrics_table(result);
      std::cout << "report: " << report_path.string() << '\n';
      return 0;
    }
    if (result.contains("checkpoint")) std::cout << "checkpoint: " << result["checkpoint"].get<std::string>() << '\n';
    std::cout << result.dump(2) << '\n';
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

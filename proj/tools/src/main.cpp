// lamod: command-line front end. Every subcommand exits 0 on success and
// prints one "lamod: error: ..." line and exits nonzero on failure.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "lamod/error.hpp"
#include "lamod/io/files.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON run config (defaults when omitted)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Override the config seed");
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = lamod::cli;
  CLI::App app{"lamod: latent motion diffusion on cardiac image sequences"};
  app.require_subcommand(1);

  Common common;
  std::string out, data, model, reg_model, sequence, motion, split = "all", mode;
  std::size_t n = 30;
  std::optional<int> epochs;
  bool resume = false;

  auto* config = app.add_subcommand("config", "Print the full configuration with every default");
  add_common(config, common);
  config->add_option("--out", out, "Write to this file instead of stdout");

  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic phantom dataset");
  add_common(phantom, common);
  phantom->add_option("--out", out, "Output directory")->required();
  phantom->add_option("-n,--sequences", n, "Number of sequences")->check(CLI::PositiveNumber);

  auto* reg = app.add_subcommand("register", "Pairwise registration: direct, train or apply");
  add_common(reg, common);
  reg->add_option("mode", mode, "direct | train | apply")->required()->check(CLI::IsMember({"direct", "train", "apply"}));
  reg->add_option("--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  reg->add_option("--split", split, "train | validation | test | all (direct, apply)");
  reg->add_option("--out", out, "Output directory (direct, apply)");
  reg->add_option("--model", model, "Checkpoint to write (train) or read (apply)");
  reg->add_option("--epochs", epochs, "Training epochs (train)");

  auto* train = app.add_subcommand("train", "Joint training of the noise predictor and motion decoder");
  add_common(train, common);
  train->add_option("--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--reg-model", reg_model, "Registration network checkpoint")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out, "Checkpoint to write; a log goes to <out>.csv")->required();
  train->add_option("--epochs", epochs, "Epochs to run in this invocation");
  train->add_flag("--resume", resume, "Continue from the checkpoint at --out");

  auto* infer = app.add_subcommand("infer", "Diffusion-refined motion for one sequence");
  add_common(infer, common);
  infer->add_option("--sequence", sequence, "Sequence file")->required()->check(CLI::ExistingFile);
  infer->add_option("--reg-model", reg_model, "Registration network checkpoint")->required()->check(CLI::ExistingFile);
  infer->add_option("--model", model, "Diffusion checkpoint")->required()->check(CLI::ExistingFile);
  infer->add_option("--out", out, "Output displacement file")->required();

  auto* strain = app.add_subcommand("strain", "Ecc maps and segmental means of a displacement file");
  strain->add_option("--motion", motion, "Displacement file")->required()->check(CLI::ExistingFile);
  strain->add_option("--sequence", sequence, "Sequence file (mask, center, insertion angle)")
      ->required()
      ->check(CLI::ExistingFile);
  strain->add_option("--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "EPE and segmental strain error against the ground truth");
  eval->add_option("--pred", motion, "Predicted displacement file")->required()->check(CLI::ExistingFile);
  eval->add_option("--sequence", sequence, "Sequence file with ground-truth motion")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "lamod: error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*config) {
      const std::string text = cli::config_reference(cli::load_run_config(common.config, common.seed));
      if (out.empty()) {
        std::cout << text;
      } else {
        lamod::io::write_atomic(out, text);
      }
    } else if (*phantom) {
      cli::make_phantom_dataset(cli::load_run_config(common.config, common.seed), out, n);
    } else if (*reg) {
      const auto cfg = cli::load_run_config(common.config, common.seed);
      if (mode == "train") {
        if (model.empty()) throw lamod::UsageError("register train needs --model");
        cli::register_train(cfg, data, model, epochs);
      } else {
        if (out.empty()) throw lamod::UsageError("register " + mode + " needs --out");
        if (mode == "direct") {
          cli::register_direct(cfg, data, split, out);
        } else {
          if (model.empty()) throw lamod::UsageError("register apply needs --model");
          cli::register_apply(cfg, data, split, model, out);
        }
      }
    } else if (*train) {
      cli::train_diffusion(cli::load_run_config(common.config, common.seed), data, reg_model, out, epochs, resume);
    } else if (*infer) {
      cli::infer_sequence(cli::load_run_config(common.config, common.seed), sequence, reg_model, model, out);
    } else if (*strain) {
      cli::strain_report(motion, sequence, out);
    } else if (*eval) {
      cli::eval_report(motion, sequence, out);
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& ch : msg)
      if (ch == '\n') ch = ' ';
    std::cerr << "lamod: error: " << msg << '\n';
    return 1;
  }
  return 0;
}

#pragma once

// Subcommand implementations behind the `lamod` executable. Each function
// throws lamod::Error (or a subclass) on failure and writes its outputs
// atomically.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lamod/io/config.hpp"

namespace lamod::cli {

namespace fs = std::filesystem;

// Config from a JSON file, or defaults when `path` is empty; `seed` overrides.
io::RunConfig load_run_config(const fs::path& path, std::optional<std::uint64_t> seed);

// `lamod config`: the full configuration with every default spelled out.
std::string config_reference(const io::RunConfig& cfg);

struct Manifest {
  std::uint64_t seed = 0;
  std::vector<std::string> train, validation, test;  // file names relative to the dataset dir

  std::vector<std::string> all() const;
  const std::vector<std::string>& split(const std::string& name) const;  // "train", "validation", "test"
};

Manifest read_manifest(const fs::path& dataset_dir);

// `lamod phantom`: n sample files plus manifest.json.
void make_phantom_dataset(const io::RunConfig& cfg, const fs::path& out_dir, std::size_t n);

// `lamod register direct`: per-pair optimization of every sequence in `split`
// ("all" for every file). Writes <stem>_v0.lmf1, <stem>_disp.lmf1 and energy.csv.
void register_direct(const io::RunConfig& cfg, const fs::path& dataset_dir, const std::string& split,
                     const fs::path& out_dir);

// `lamod register train`: fits E_R/D_R on the training split; writes the
// checkpoint and a per-epoch CSV next to it (<model>.csv).
void register_train(const io::RunConfig& cfg, const fs::path& dataset_dir, const fs::path& model_out,
                    std::optional<int> epochs);

// `lamod register apply`: network predictions in the same layout as direct mode.
void register_apply(const io::RunConfig& cfg, const fs::path& dataset_dir, const std::string& split,
                    const fs::path& model, const fs::path& out_dir);

// `lamod train`: joint diffusion training on encoder latents. With `resume`,
// continues from an earlier checkpoint at `model_out` and appends to its log.
void train_diffusion(const io::RunConfig& cfg, const fs::path& dataset_dir, const fs::path& reg_model,
                     const fs::path& model_out, std::optional<int> epochs, bool resume);

// `lamod infer`: diffusion-refined displacements for one sequence file.
void infer_sequence(const io::RunConfig& cfg, const fs::path& sequence, const fs::path& reg_model,
                    const fs::path& model, const fs::path& out);

// `lamod strain`: Ecc maps (PGM) and six segment means per frame (strain.csv).
void strain_report(const fs::path& motion, const fs::path& sequence, const fs::path& out_dir);

// `lamod eval`: EPE and segmental strain errors of `pred` against the
// sequence's ground truth (eval.csv, eval_frames.csv, error maps).
void eval_report(const fs::path& pred, const fs::path& sequence, const fs::path& out_dir);

}  // namespace lamod::cli

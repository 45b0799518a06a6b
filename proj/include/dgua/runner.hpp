#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dgua/config.hpp"
#include "dgua/eval.hpp"

namespace dgua {

struct RunResult {
  ExperimentConfig config;
  std::vector<LossBundle> history;
  EvalReport report;
};

// Full pipeline for one config: data, split, training, evaluation, and the
// artifact set (manifest.json, metrics.csv, report.json, roc.csv,
// checkpoint.dgua) under config.output_dir.
RunResult run_experiment(const ExperimentConfig& config);

struct SweepCell {
  std::string label;
  ExperimentConfig config;
};

// Expands a base config along one axis: "protocol" holds out each eligible
// domain in turn, "ablation" toggles the synthetic loss terms through all
// four combinations, "seed" reruns the config per seed.
std::vector<SweepCell> sweep_cells(const ExperimentConfig& base, const std::string& axis,
                                   const std::vector<std::uint64_t>& seeds);

// Runs every cell (continuing past failures) and writes summary.csv with one
// row per cell plus mean and median rows. Nonzero when any cell failed.
int run_sweep(const ExperimentConfig& base, const std::string& axis,
              const std::vector<std::uint64_t>& seeds);

int exit_code_for(const std::exception& error);

// Subcommand entry points. Overrides replace the config's seed / output_dir;
// when no output override is given the DGUA_OUTPUT_DIR variable applies.
int command_run(const std::filesystem::path& config_path, std::optional<std::uint64_t> seed,
                std::optional<std::string> output_dir);
int command_sweep(const std::filesystem::path& config_path, const std::string& axis,
                  const std::string& seeds_csv, std::optional<std::uint64_t> seed,
                  std::optional<std::string> output_dir);
int command_eval(const std::filesystem::path& checkpoint_path,
                 const std::filesystem::path& config_path, std::optional<std::string> output_dir);
int command_gen_data(const std::filesystem::path& config_path, std::optional<std::uint64_t> seed,
                     std::optional<std::string> output_dir);

}  // namespace dgua

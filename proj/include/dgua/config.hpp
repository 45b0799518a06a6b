#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "nlohmann/json_fwd.hpp"

#include "dgua/datagen.hpp"
#include "dgua/trainer.hpp"

namespace dgua {

// One experiment, fully described: where the data comes from, how it is
// split, how training runs, and where artifacts land. Parsing is strict:
// unknown keys are rejected at every level and missing required keys are
// named, so a manifest's config echo always reproduces the run.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path output_dir;

  enum class DataSource { generate, feature_file };
  DataSource source = DataSource::generate;
  GenSpec gen;
  std::filesystem::path feature_file;

  ProtocolSpec protocol;
  TrainConfig train;  // seed and ablation flags resolved from the other sections
  std::optional<double> eval_threshold;

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  static ExperimentConfig load(const std::filesystem::path& path);
};

}  // namespace dgua

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "nlohmann/json_fwd.hpp"

#include "dgua/backbone.hpp"
#include "dgua/datagen.hpp"
#include "dgua/losses.hpp"

namespace dgua {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double lr = 1e-4;
  double weight_decay = 1e-6;
  double lambda = 1.0;
  double alpha_id = 0.5;
  double alpha_ood = 1.0;
  std::uint64_t seed = 1;
  ArchitectureSpec architecture;
  bool use_sid = true;
  bool use_sood = true;
  bool weight_decay_on_bias = false;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Alternating optimization: per batch, first the generator trains against the
// frozen extractor (imitation + classification), then the extractor and head
// train on the composed objective with the generator frozen. Inference uses
// only the extractor and head.
class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);

  // One generator update. Extractor and head must come out bit-unchanged.
  LossBundle train_step_suasg(const TensorPtr& x, const std::vector<int>& labels);
  // One extractor + head update. The generator must come out bit-unchanged.
  LossBundle train_step_extractor(const TensorPtr& x, const std::vector<int>& labels);

  // Called after each optimizer step (step is 1 for the generator, 2 for the
  // extractor), so callers can audit parameter state mid-run.
  using StepObserver =
      std::function<void(std::size_t epoch, std::size_t batch, int step, const LossBundle&)>;

  // Runs both steps over every batch of the remaining epochs, recording one
  // mean LossBundle per epoch. Callable again after load_checkpoint to finish
  // an interrupted run.
  const std::vector<LossBundle>& fit(std::span<const LabeledSample> train,
                                     const StepObserver& observer = {});

  const TrainConfig& config() const { return cfg_; }
  const GroupedNetwork& extractor() const { return extractor_; }
  const ClassifierHead& head() const { return head_; }
  const GroupedNetwork& suasg() const { return suasg_; }
  GroupedNetwork& extractor_mut() { return extractor_; }
  ClassifierHead& head_mut() { return head_; }
  GroupedNetwork& suasg_mut() { return suasg_; }

  std::size_t epochs_done() const { return epochs_done_; }
  const std::vector<LossBundle>& history() const { return history_; }

  void save_checkpoint(const std::filesystem::path& path) const;
  static Trainer load_checkpoint(const std::filesystem::path& path);

 private:
  void check_frozen(const std::vector<NamedParam>& params, const char* step) const;
  static void check_divergence(const LossBundle& bundle);

  TrainConfig cfg_;
  GroupedNetwork extractor_;
  GroupedNetwork suasg_;
  ClassifierHead head_;
  std::unique_ptr<Adam> opt_extract_;
  std::unique_ptr<Adam> opt_suasg_;
  std::vector<LossBundle> history_;
  std::size_t epochs_done_ = 0;
};

// Training history as CSV with one row per epoch.
std::string metrics_csv(std::span<const LossBundle> history);

}  // namespace dgua

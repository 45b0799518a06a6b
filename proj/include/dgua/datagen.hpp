#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "nlohmann/json_fwd.hpp"

#include "dgua/error.hpp"

namespace dgua {

// label 0 is the real class, 1..K are known attacks, >K are unknown attacks.
// test_only marks samples that must never reach the trainer.
struct LabeledSample {
  std::vector<double> features;
  int label = 0;
  int domain = 0;
  bool test_only = false;

  bool operator==(const LabeledSample&) const = default;
};

// Invertible affine shift standing in for capture-condition changes: paired
// coordinate rotation, isotropic scale, translation, plus additive noise.
struct DomainSpec {
  double rotation = 0.0;
  std::vector<double> translation;
  double scale = 1.0;
  double noise_sigma = 0.05;

  void validate(std::size_t input_dim) const;
  bool operator==(const DomainSpec&) const = default;
};

struct GenSpec {
  std::size_t input_dim = 8;
  std::size_t num_domains = 4;
  int known_attacks = 2;    // K
  int unknown_attacks = 2;  // extra classes appearing only at test time
  std::size_t per_class_domain = 500;
  double class_radius = 3.0;
  double class_sigma = 0.6;
  // Unknown class means alternate between a point on the real-to-attack
  // segment (inside the training hull, tilted along an axis no known class
  // uses) and a point beyond the real mean on its own ray (far outside the
  // hull).
  double unknown_real_mix = 0.85;
  double unknown_novel_lift = 1.0;
  double unknown_far_scale = 2.0;
  double domain_shift = 0.7;        // scales rotation and translation of default domains
  std::vector<DomainSpec> domains;  // filled with defaults when empty

  int total_classes() const { return known_attacks + unknown_attacks + 1; }
  void validate() const;
  static GenSpec defaults();
  bool operator==(const GenSpec&) const = default;
};

std::vector<DomainSpec> default_domains(std::size_t input_dim, std::size_t num_domains,
                                        double shift = 1.0);

// Mean of a class in the pre-domain (latent) space.
std::vector<double> class_mean(const GenSpec& spec, int cls);

std::vector<double> domain_transform(const DomainSpec& spec, std::span<const double> x);
std::vector<double> domain_inverse(const DomainSpec& spec, std::span<const double> y);

// Balanced samples for every (domain, class) cell, deterministic per seed.
std::vector<LabeledSample> generate(const GenSpec& spec, std::uint64_t seed);

enum class ProtocolMode { leave_one_out, limited_source, unknown_attack };

struct ProtocolSpec {
  ProtocolMode mode = ProtocolMode::leave_one_out;
  std::set<int> train_domains;  // empty = every domain except test_domain
  int test_domain = 0;
  int known_k = 2;
  std::set<int> unknown_classes;  // only in unknown_attack mode

  std::set<int> resolved_train_domains(std::size_t num_domains) const;
  void validate(std::size_t num_domains) const;
  bool operator==(const ProtocolSpec&) const = default;
};

std::string protocol_mode_name(ProtocolMode mode);
ProtocolMode protocol_mode_from(const std::string& name);

struct SplitData {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;  // every sample tagged test_only
};

SplitData split_protocol(const std::vector<LabeledSample>& data, const ProtocolSpec& protocol);

// Deterministic stratified batching: every class is spread evenly across the
// epoch so each batch mirrors the train-set class mix. Each epoch is an exact
// partition of the train set.
class BatchStream {
 public:
  BatchStream(std::span<const LabeledSample> train, std::size_t batch_size, std::uint64_t seed);

  std::vector<std::vector<std::size_t>> epoch_batches(std::size_t epoch) const;
  std::size_t batch_size() const { return batch_size_; }

 private:
  std::vector<std::vector<std::size_t>> by_class_;  // indices grouped by label
  std::size_t total_ = 0;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

std::vector<LabeledSample> load_feature_file(const std::filesystem::path& path);
std::string feature_csv(std::span<const LabeledSample> samples);
void save_feature_file(const std::filesystem::path& path, std::span<const LabeledSample> samples);

nlohmann::json dataset_manifest(const GenSpec& spec, std::uint64_t seed,
                                std::span<const LabeledSample> samples);

}  // namespace dgua

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nlohmann/json_fwd.hpp"

#include "dgua/backbone.hpp"
#include "dgua/datagen.hpp"

namespace dgua {

// Binary ground truth for real-vs-spoof scoring. Unknown attack classes count
// as spoof.
struct ScoredSample {
  double spoof_score = 0.0;
  bool is_spoof = false;
  int domain = 0;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct HterResult {
  double hter = 0.0;
  double far = 0.0;  // spoof accepted as real: score < threshold
  double frr = 0.0;  // real rejected as spoof: score >= threshold
};

// score = 1 - p(real). Rows of probs must be probability vectors.
std::vector<double> spoof_scores(const TensorPtr& probs);

// Trapezoidal area under the ROC curve of the spoof score.
double auc(std::span<const ScoredSample> samples);

// O(n^2) reference: P(score_spoof > score_real) with half credit for ties.
double pairwise_auc(std::span<const ScoredSample> samples);

HterResult hter(std::span<const ScoredSample> samples, double threshold);

// Threshold minimizing |FAR - FRR| over midpoints of consecutive distinct
// scores; ties go to the smaller threshold. With a single distinct score the
// score itself is returned.
double eer_threshold(std::span<const ScoredSample> samples);

// One point per distinct score, swept from high to low, with (0,0) prepended.
// Both coordinates are nondecreasing and the curve ends at (1,1).
std::vector<RocPoint> roc_curve(std::span<const ScoredSample> samples);

struct EvalReport {
  double auc = 0.0;
  double hter = 0.0;
  double far = 0.0;
  double frr = 0.0;
  double threshold = 0.0;
  bool threshold_from_eer = true;
  std::vector<RocPoint> roc;
  // Known classes: fraction with argmax == label. Unknown classes: fraction
  // assigned to any attack class (argmax != 0).
  std::map<int, double> per_class_accuracy;
  std::map<int, double> per_class_mean_score;
  std::map<int, std::size_t> per_class_counts;
  std::size_t sample_count = 0;
};

// Scores the test set through extractor + head alone. When fixed_threshold is
// absent, HTER is reported at this set's own EER threshold.
EvalReport evaluate_model(const GroupedNetwork& extractor, const ClassifierHead& head,
                          std::span<const LabeledSample> test,
                          std::optional<double> fixed_threshold = std::nullopt);

nlohmann::json report_to_json(const EvalReport& report);
std::string roc_csv(std::span<const RocPoint> roc);

}  // namespace dgua

#include "dgua/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "nlohmann/json.hpp"

namespace dgua {

namespace {

struct ClassCounts {
  std::size_t spoof = 0;
  std::size_t real = 0;
};

ClassCounts require_both_classes(std::span<const ScoredSample> samples, const char* op) {
  ClassCounts c;
  for (const auto& s : samples) {
    if (!std::isfinite(s.spoof_score)) {
      throw MetricError(std::string(op) + ": non-finite spoof score");
    }
    if (s.is_spoof) ++c.spoof; else ++c.real;
  }
  if (c.spoof == 0 || c.real == 0) {
    throw MetricError(std::string(op) + ": needs both real and spoof samples, got " +
                      std::to_string(c.real) + " real and " + std::to_string(c.spoof) + " spoof");
  }
  return c;
}

}  // namespace

std::vector<double> spoof_scores(const TensorPtr& probs) {
  const std::size_t rows = probs->rows(), cols = probs->cols();
  if (cols < 2) throw ContractError("spoof_scores: need at least 2 classes, got " + std::to_string(cols));
  std::vector<double> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double p = probs->at(i, c);
      if (!(p >= -1e-12) || !(p <= 1.0 + 1e-12)) {
        throw ContractError("spoof_scores: row " + std::to_string(i) +
                            " is not a probability vector");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ContractError("spoof_scores: row " + std::to_string(i) + " sums to " +
                          std::to_string(sum) + ", expected 1");
    }
    out[i] = 1.0 - probs->at(i, 0);
  }
  return out;
}

std::vector<RocPoint> roc_curve(std::span<const ScoredSample> samples) {
  const auto counts = require_both_classes(samples, "roc_curve");
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return samples[a].spoof_score > samples[b].spoof_score;
  });

  std::vector<RocPoint> roc;
  roc.push_back(RocPoint{0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = samples[order[i]].spoof_score;
    while (i < order.size() && samples[order[i]].spoof_score == s) {
      if (samples[order[i]].is_spoof) ++tp; else ++fp;
      ++i;
    }
    roc.push_back(RocPoint{static_cast<double>(fp) / static_cast<double>(counts.real),
                           static_cast<double>(tp) / static_cast<double>(counts.spoof)});
  }
  return roc;
}

double auc(std::span<const ScoredSample> samples) {
  const auto roc = roc_curve(samples);
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    area += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) * 0.5;
  }
  return area;
}

double pairwise_auc(std::span<const ScoredSample> samples) {
  require_both_classes(samples, "pairwise_auc");
  double won = 0.0;
  std::size_t pairs = 0;
  for (const auto& a : samples) {
    if (!a.is_spoof) continue;
    for (const auto& b : samples) {
      if (b.is_spoof) continue;
      ++pairs;
      if (a.spoof_score > b.spoof_score) won += 1.0;
      else if (a.spoof_score == b.spoof_score) won += 0.5;
    }
  }
  return won / static_cast<double>(pairs);
}

HterResult hter(std::span<const ScoredSample> samples, double threshold) {
  const auto counts = require_both_classes(samples, "hter");
  std::size_t accepted_spoof = 0, rejected_real = 0;
  for (const auto& s : samples) {
    if (s.is_spoof) {
      if (s.spoof_score < threshold) ++accepted_spoof;
    } else {
      if (s.spoof_score >= threshold) ++rejected_real;
    }
  }
  HterResult r;
  r.far = static_cast<double>(accepted_spoof) / static_cast<double>(counts.spoof);
  r.frr = static_cast<double>(rejected_real) / static_cast<double>(counts.real);
  r.hter = 0.5 * (r.far + r.frr);
  return r;
}

double eer_threshold(std::span<const ScoredSample> samples) {
  require_both_classes(samples, "eer_threshold");
  std::vector<double> distinct;
  distinct.reserve(samples.size());
  for (const auto& s : samples) distinct.push_back(s.spoof_score);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) return distinct.front();

  double best_thr = 0.0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
    const double thr = 0.5 * (distinct[i] + distinct[i + 1]);
    const auto h = hter(samples, thr);
    const double gap = std::abs(h.far - h.frr);
    if (gap < best_gap) {
      best_gap = gap;
      best_thr = thr;
    }
  }
  return best_thr;
}

EvalReport evaluate_model(const GroupedNetwork& extractor, const ClassifierHead& head,
                          std::span<const LabeledSample> test,
                          std::optional<double> fixed_threshold) {
  if (test.empty()) throw MetricError("evaluate_model: empty test set");
  const std::size_t dim = extractor.spec().input_dim;
  std::vector<double> flat;
  flat.reserve(test.size() * dim);
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test[i].features.size() != dim) {
      throw DimensionError("evaluate_model: sample " + std::to_string(i) + " has width " +
                           std::to_string(test[i].features.size()) + ", expected " +
                           std::to_string(dim));
    }
    flat.insert(flat.end(), test[i].features.begin(), test[i].features.end());
  }
  auto x = Tensor::create({test.size(), dim}, std::move(flat));

  Tape tape;
  auto emb = extractor.forward_groups(tape, x, 1, extractor.num_groups());
  auto logits = head.classify(tape, emb);
  auto probs = softmax_rows(tape, logits);
  const auto scores = spoof_scores(probs);

  std::vector<ScoredSample> scored(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    scored[i] = ScoredSample{scores[i], test[i].label != 0, test[i].domain};
  }

  EvalReport report;
  report.sample_count = test.size();
  report.auc = auc(scored);
  report.roc = roc_curve(scored);
  report.threshold_from_eer = !fixed_threshold.has_value();
  report.threshold = fixed_threshold ? *fixed_threshold : eer_threshold(scored);
  const auto h = hter(scored, report.threshold);
  report.hter = h.hter;
  report.far = h.far;
  report.frr = h.frr;

  const int k = static_cast<int>(extractor.spec().num_attacks);
  std::map<int, std::size_t> hits;
  std::map<int, double> score_sum;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const int label = test[i].label;
    std::size_t argmax = 0;
    for (std::size_t c = 1; c < probs->cols(); ++c) {
      if (probs->at(i, c) > probs->at(i, argmax)) argmax = c;
    }
    const bool hit = label <= k ? static_cast<int>(argmax) == label : argmax != 0;
    ++report.per_class_counts[label];
    hits[label] += hit ? 1 : 0;
    score_sum[label] += scores[i];
  }
  for (const auto& [label, n] : report.per_class_counts) {
    report.per_class_accuracy[label] = static_cast<double>(hits[label]) / static_cast<double>(n);
    report.per_class_mean_score[label] = score_sum[label] / static_cast<double>(n);
  }
  return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json roc = nlohmann::json::array();
  for (const auto& p : report.roc) roc.push_back({p.fpr, p.tpr});
  nlohmann::json acc = nlohmann::json::object();
  nlohmann::json mean_score = nlohmann::json::object();
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [label, v] : report.per_class_accuracy) acc[std::to_string(label)] = v;
  for (const auto& [label, v] : report.per_class_mean_score) mean_score[std::to_string(label)] = v;
  for (const auto& [label, v] : report.per_class_counts) counts[std::to_string(label)] = v;
  return nlohmann::json{{"auc", report.auc},
                        {"hter", report.hter},
                        {"far", report.far},
                        {"frr", report.frr},
                        {"threshold", report.threshold},
                        {"threshold_from_eer", report.threshold_from_eer},
                        {"per_class_accuracy", acc},
                        {"per_class_mean_score", mean_score},
                        {"per_class_counts", counts},
                        {"sample_count", report.sample_count},
                        {"roc", roc}};
}

std::string roc_csv(std::span<const RocPoint> roc) {
  std::string out = "fpr,tpr\n";
  char buf[80];
  for (const auto& p : roc) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", p.fpr, p.tpr);
    out += buf;
  }
  return out;
}

}  // namespace dgua

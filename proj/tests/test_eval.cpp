#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"

#include "dgua/eval.hpp"
#include "dgua/rng.hpp"

using namespace dgua;

namespace {

std::vector<ScoredSample> scored(std::vector<double> spoof, std::vector<double> real) {
  std::vector<ScoredSample> out;
  for (double s : spoof) out.push_back(ScoredSample{s, true, 0});
  for (double s : real) out.push_back(ScoredSample{s, false, 0});
  return out;
}

}  // namespace

TEST_CASE("auc on the hand fixture") {
  auto samples = scored({0.9, 0.4}, {0.1, 0.7});
  CHECK(auc(samples) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(pairwise_auc(samples) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("auc extremes") {
  CHECK(auc(scored({0.8, 0.9}, {0.1, 0.2})) == 1.0);
  CHECK(auc(scored({0.1, 0.2}, {0.8, 0.9})) == 0.0);
  CHECK(auc(scored({0.5, 0.5}, {0.5, 0.5})) == 0.5);
}

TEST_CASE("trapezoidal auc equals the pairwise reference with heavy ties") {
  Rng rng(17);
  std::vector<ScoredSample> samples;
  for (int i = 0; i < 100; ++i) {
    samples.push_back(ScoredSample{std::round(rng.uniform() * 20.0) / 20.0, true, 0});
  }
  for (int i = 0; i < 200; ++i) {
    samples.push_back(ScoredSample{std::round(rng.uniform() * 20.0) / 20.0, false, 0});
  }
  CHECK(std::abs(auc(samples) - pairwise_auc(samples)) < 1e-9);

  // and without ties
  std::vector<ScoredSample> smooth;
  for (int i = 0; i < 100; ++i) smooth.push_back(ScoredSample{rng.uniform(), true, 0});
  for (int i = 0; i < 200; ++i) smooth.push_back(ScoredSample{rng.uniform(), false, 0});
  CHECK(std::abs(auc(smooth) - pairwise_auc(smooth)) < 1e-9);
}

TEST_CASE("roc curve shape") {
  auto samples = scored({0.9, 0.4, 0.4}, {0.1, 0.7});
  auto roc = roc_curve(samples);
  // (0,0) plus one point per distinct score: 0.9, 0.7, 0.4, 0.1
  REQUIRE(roc.size() == 5);
  CHECK(roc.front().fpr == 0.0);
  CHECK(roc.front().tpr == 0.0);
  CHECK(roc.back().fpr == 1.0);
  CHECK(roc.back().tpr == 1.0);
  for (std::size_t i = 1; i < roc.size(); ++i) {
    CHECK(roc[i].fpr >= roc[i - 1].fpr);
    CHECK(roc[i].tpr >= roc[i - 1].tpr);
  }
  CHECK(roc[1].tpr == doctest::Approx(1.0 / 3.0));
  CHECK(roc[1].fpr == 0.0);
  CHECK(roc[2].fpr == 0.5);
}

TEST_CASE("hter counts rejections on each side of the threshold") {
  auto samples = scored({0.9, 0.4}, {0.1, 0.7});

  auto mid = hter(samples, 0.5);
  CHECK(mid.far == 0.5);
  CHECK(mid.frr == 0.5);
  CHECK(mid.hter == 0.5);

  auto zero = hter(samples, 0.0);
  CHECK(zero.far == 0.0);  // score >= 0 everywhere, no spoof accepted
  CHECK(zero.frr == 1.0);
  CHECK(zero.hter == 0.5);

  auto top = hter(samples, 1.0);
  CHECK(top.far == 1.0);
  CHECK(top.frr == 0.0);

  // boundary sample: score equal to the threshold counts as rejected
  auto edge = hter(scored({0.5}, {0.5}), 0.5);
  CHECK(edge.far == 0.0);
  CHECK(edge.frr == 1.0);
}

TEST_CASE("eer threshold balances the error rates") {
  CHECK(eer_threshold(scored({0.7, 0.9}, {0.1, 0.3})) == doctest::Approx(0.5).epsilon(1e-15));

  // two midpoints tie on |far - frr|; the smaller one wins
  CHECK(eer_threshold(scored({0.5, 0.9}, {0.1, 0.5})) == doctest::Approx(0.3).epsilon(1e-15));

  // a single distinct score is its own threshold
  CHECK(eer_threshold(scored({0.5}, {0.5})) == 0.5);

  auto thr = eer_threshold(scored({0.6, 0.7, 0.8}, {0.2, 0.3, 0.4}));
  auto h = hter(scored({0.6, 0.7, 0.8}, {0.2, 0.3, 0.4}), thr);
  CHECK(h.far == h.frr);
}

TEST_CASE("metrics refuse degenerate inputs") {
  std::vector<ScoredSample> only_spoof = {{0.5, true, 0}};
  std::vector<ScoredSample> only_real = {{0.5, false, 0}};
  std::vector<ScoredSample> empty;
  CHECK_THROWS_AS(auc(only_spoof), MetricError);
  CHECK_THROWS_AS(auc(only_real), MetricError);
  CHECK_THROWS_AS(auc(empty), MetricError);
  CHECK_THROWS_AS(hter(only_spoof, 0.5), MetricError);
  CHECK_THROWS_AS(eer_threshold(only_real), MetricError);
  CHECK_THROWS_AS(pairwise_auc(empty), MetricError);

  std::vector<ScoredSample> with_nan = {{std::nan(""), true, 0}, {0.5, false, 0}};
  CHECK_THROWS_AS(auc(with_nan), MetricError);
}

TEST_CASE("spoof scores read one minus the real probability") {
  auto probs = Tensor::create({2, 3}, {0.5, 0.25, 0.25, 0.1, 0.6, 0.3});
  auto s = spoof_scores(probs);
  CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(0.9).epsilon(1e-15));

  CHECK_THROWS_AS(spoof_scores(Tensor::create({1, 3}, {0.5, 0.4, 0.2})), ContractError);
  CHECK_THROWS_AS(spoof_scores(Tensor::create({1, 3}, {1.2, -0.2, 0.0})), ContractError);
  CHECK_THROWS_AS(spoof_scores(Tensor::create({1, 1}, {1.0})), ContractError);
}

TEST_CASE("an all-zero model scores everything at the uniform spoof rate") {
  ArchitectureSpec arch;
  GroupedNetwork extractor(arch, 1);
  ClassifierHead head(16, 3, 2);
  for (auto& p : extractor.parameters()) {
    for (auto& v : p.tensor->values_mut()) v = 0.0;
  }
  for (auto& p : head.parameters()) {
    for (auto& v : p.tensor->values_mut()) v = 0.0;
  }

  GenSpec gen;
  gen.per_class_domain = 4;
  ProtocolSpec protocol;
  protocol.mode = ProtocolMode::unknown_attack;
  protocol.unknown_classes = {3, 4};
  auto split = split_protocol(generate(gen, 1), protocol);

  auto report = evaluate_model(extractor, head, split.test);
  CHECK(report.sample_count == split.test.size());
  CHECK(report.auc == 0.5);
  CHECK(report.threshold_from_eer);
  CHECK(report.threshold == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  for (int cls = 0; cls < 5; ++cls) {
    CHECK(report.per_class_counts.at(cls) == 4);
    CHECK(report.per_class_mean_score.at(cls) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    // uniform rows argmax to class 0: only the real class is "correct" and
    // unknowns never land on an attack class
    CHECK(report.per_class_accuracy.at(cls) == (cls == 0 ? 1.0 : 0.0));
  }

  auto fixed = evaluate_model(extractor, head, split.test, 0.5);
  CHECK_FALSE(fixed.threshold_from_eer);
  CHECK(fixed.threshold == 0.5);
  CHECK(fixed.far == 0.0);
  CHECK(fixed.frr == 1.0);
  CHECK(fixed.hter == 0.5);

  auto bad = split.test;
  bad[0].features.pop_back();
  CHECK_THROWS_AS(evaluate_model(extractor, head, bad), DimensionError);
}

TEST_CASE("model evaluation agrees with an independent pairwise pass") {
  ArchitectureSpec arch;
  GroupedNetwork extractor(arch, 5);
  ClassifierHead head(16, 3, 6);

  GenSpec gen;
  gen.per_class_domain = 8;
  auto split = split_protocol(generate(gen, 2), ProtocolSpec{});
  auto report = evaluate_model(extractor, head, split.test);

  std::vector<ScoredSample> mine;
  for (const auto& s : split.test) {
    Tape tape;
    auto x = Tensor::create({1, 8}, std::vector<double>(s.features));
    auto probs = softmax_rows(tape, head.classify(tape, extractor.forward_groups(tape, x, 1, 3)));
    mine.push_back(ScoredSample{spoof_scores(probs)[0], s.label != 0, s.domain});
  }
  CHECK(std::abs(report.auc - pairwise_auc(mine)) < 1e-9);

  double frac_correct_total = 0.0;
  std::size_t n = 0;
  for (const auto& [cls, count] : report.per_class_counts) {
    n += count;
    frac_correct_total += report.per_class_accuracy.at(cls) * static_cast<double>(count);
  }
  CHECK(n == report.sample_count);
  CHECK(frac_correct_total >= 0.0);
  CHECK(frac_correct_total <= static_cast<double>(n));
}

TEST_CASE("report serialization carries every field") {
  auto samples = scored({0.9, 0.4}, {0.1, 0.7});
  EvalReport report;
  report.auc = auc(samples);
  report.hter = 0.5;
  report.far = 0.25;
  report.frr = 0.75;
  report.threshold = 0.45;
  report.threshold_from_eer = false;
  report.roc = roc_curve(samples);
  report.per_class_accuracy = {{0, 1.0}, {3, 0.5}};
  report.per_class_mean_score = {{0, 0.4}, {3, 0.8}};
  report.per_class_counts = {{0, 2}, {3, 2}};
  report.sample_count = 4;

  auto j = report_to_json(report);
  CHECK(j["auc"] == 0.75);
  CHECK(j["threshold"] == 0.45);
  CHECK(j["threshold_from_eer"] == false);
  CHECK(j["per_class_accuracy"]["3"] == 0.5);
  CHECK(j["per_class_mean_score"]["0"] == 0.4);
  CHECK(j["per_class_counts"]["3"] == 2);
  CHECK(j["sample_count"] == 4);
  CHECK(j["roc"].size() == report.roc.size());
  CHECK(j["roc"][0][0] == 0.0);

  auto csv = roc_csv(report.roc);
  CHECK(csv.rfind("fpr,tpr\n", 0) == 0);
  std::size_t lines = 0;
  for (char c : csv) lines += c == '\n';
  CHECK(lines == report.roc.size() + 1);
}

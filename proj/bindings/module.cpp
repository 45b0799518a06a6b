#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "nlohmann/json.hpp"

#include "dgua/config.hpp"
#include "dgua/eval.hpp"
#include "dgua/rng.hpp"
#include "dgua/routing.hpp"
#include "dgua/runner.hpp"
#include "dgua/trainer.hpp"

namespace py = pybind11;
using namespace dgua;

namespace {

std::vector<ScoredSample> scored_from(const std::vector<double>& scores,
                                      const std::vector<bool>& is_spoof) {
  if (scores.size() != is_spoof.size()) {
    throw ContractError("scores and is_spoof must have the same length");
  }
  std::vector<ScoredSample> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = {scores[i], is_spoof[i], 0};
  return out;
}

py::dict report_dict(const EvalReport& report) {
  py::dict d;
  d["auc"] = report.auc;
  d["hter"] = report.hter;
  d["far"] = report.far;
  d["frr"] = report.frr;
  d["threshold"] = report.threshold;
  d["threshold_from_eer"] = report.threshold_from_eer;
  d["sample_count"] = report.sample_count;
  d["per_class_accuracy"] = report.per_class_accuracy;
  d["per_class_mean_score"] = report.per_class_mean_score;
  d["per_class_counts"] = report.per_class_counts;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "grouped feature extractor + synthetic unknown-attack sample generator";

  py::register_exception<Error>(m, "DguaError");

  m.def(
      "smooth_targets",
      [](const std::vector<int>& labels, int k, double alpha) {
        auto t = smooth_targets(labels, k, alpha);
        std::vector<std::vector<double>> rows(t->rows(), std::vector<double>(t->cols()));
        for (std::size_t i = 0; i < t->rows(); ++i)
          for (std::size_t j = 0; j < t->cols(); ++j) rows[i][j] = t->at(i, j);
        return rows;
      },
      py::arg("labels"), py::arg("k"), py::arg("alpha"),
      "(1-alpha)*onehot + alpha/(k+1)*ones, one row per label");

  m.def(
      "auc",
      [](const std::vector<double>& scores, const std::vector<bool>& is_spoof) {
        return auc(scored_from(scores, is_spoof));
      },
      py::arg("scores"), py::arg("is_spoof"));

  m.def(
      "pairwise_auc",
      [](const std::vector<double>& scores, const std::vector<bool>& is_spoof) {
        return pairwise_auc(scored_from(scores, is_spoof));
      },
      py::arg("scores"), py::arg("is_spoof"));

  m.def(
      "hter",
      [](const std::vector<double>& scores, const std::vector<bool>& is_spoof, double threshold) {
        const auto h = hter(scored_from(scores, is_spoof), threshold);
        return py::make_tuple(h.hter, h.far, h.frr);
      },
      py::arg("scores"), py::arg("is_spoof"), py::arg("threshold"),
      "returns (hter, far, frr)");

  m.def(
      "eer_threshold",
      [](const std::vector<double>& scores, const std::vector<bool>& is_spoof) {
        return eer_threshold(scored_from(scores, is_spoof));
      },
      py::arg("scores"), py::arg("is_spoof"));

  m.def(
      "generate_dataset",
      [](std::size_t input_dim, std::size_t num_domains, int known_attacks, int unknown_attacks,
         std::size_t per_class_domain, std::uint64_t seed) {
        GenSpec spec;
        spec.input_dim = input_dim;
        spec.num_domains = num_domains;
        spec.known_attacks = known_attacks;
        spec.unknown_attacks = unknown_attacks;
        spec.per_class_domain = per_class_domain;
        const auto data = generate(spec, seed);
        std::vector<std::vector<double>> features;
        std::vector<int> labels, domains;
        features.reserve(data.size());
        for (const auto& s : data) {
          features.push_back(s.features);
          labels.push_back(s.label);
          domains.push_back(s.domain);
        }
        return py::make_tuple(features, labels, domains);
      },
      py::arg("input_dim") = 8, py::arg("num_domains") = 4, py::arg("known_attacks") = 2,
      py::arg("unknown_attacks") = 2, py::arg("per_class_domain") = 500, py::arg("seed") = 1,
      "returns (features, labels, domains)");

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(config_json);
        } catch (const nlohmann::json::exception& e) {
          throw ParseError(std::string("config is not valid json: ") + e.what());
        }
        const auto result = run_experiment(ExperimentConfig::from_json(j));
        py::dict d = report_dict(result.report);
        d["epochs"] = result.history.size();
        d["output_dir"] = result.config.output_dir.string();
        return d;
      },
      py::arg("config_json"),
      "full pipeline from a config json string; writes artifacts to output_dir");

  m.def(
      "evaluate_checkpoint",
      [](const std::filesystem::path& checkpoint, const std::string& config_json) {
        nlohmann::json j = nlohmann::json::parse(config_json);
        auto cfg = ExperimentConfig::from_json(j);
        auto trainer = Trainer::load_checkpoint(checkpoint);
        auto data = cfg.source == ExperimentConfig::DataSource::generate
                        ? generate(cfg.gen, mix_seed(cfg.seed, "data"))
                        : load_feature_file(cfg.feature_file);
        auto split = split_protocol(data, cfg.protocol);
        return report_dict(
            evaluate_model(trainer.extractor(), trainer.head(), split.test, cfg.eval_threshold));
      },
      py::arg("checkpoint"), py::arg("config_json"));

  m.def(
      "score_checkpoint",
      [](const std::filesystem::path& checkpoint, const std::vector<std::vector<double>>& rows) {
        auto trainer = Trainer::load_checkpoint(checkpoint);
        const auto& net = trainer.extractor();
        const std::size_t dim = net.spec().input_dim;
        std::vector<double> flat;
        flat.reserve(rows.size() * dim);
        for (const auto& row : rows) {
          if (row.size() != dim) {
            throw DimensionError("score_checkpoint: row width " + std::to_string(row.size()) +
                                 ", expected " + std::to_string(dim));
          }
          flat.insert(flat.end(), row.begin(), row.end());
        }
        Tape tape;
        auto x = Tensor::create({rows.size(), dim}, std::move(flat));
        auto emb = net.forward_groups(tape, x, 1, net.num_groups());
        auto probs = softmax_rows(tape, trainer.head().classify(tape, emb));
        return spoof_scores(probs);
      },
      py::arg("checkpoint"), py::arg("rows"),
      "spoof score for each feature row under a trained checkpoint");
}

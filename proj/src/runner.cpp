#include "dgua/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <sstream>

#include "nlohmann/json.hpp"

#include "dgua/fsio.hpp"
#include "dgua/rng.hpp"
#include "dgua/trainer.hpp"

namespace dgua {

namespace {

std::vector<LabeledSample> load_dataset(const ExperimentConfig& cfg) {
  if (cfg.source == ExperimentConfig::DataSource::generate) {
    return generate(cfg.gen, mix_seed(cfg.seed, "data"));
  }
  auto data = load_feature_file(cfg.feature_file);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].features.size() != cfg.gen.input_dim) {
      throw SchemaError("feature file row " + std::to_string(i + 1) + " has width " +
                        std::to_string(data[i].features.size()) + ", config says " +
                        std::to_string(cfg.gen.input_dim));
    }
  }
  return data;
}

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double mean_of(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return values.empty() ? std::numeric_limits<double>::quiet_NaN()
                        : sum / static_cast<double>(values.size());
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::optional<std::string> env_output_override() {
  if (const char* dir = std::getenv("DGUA_OUTPUT_DIR"); dir && *dir) return std::string(dir);
  return std::nullopt;
}

ExperimentConfig load_with_overrides(const std::filesystem::path& config_path,
                                     std::optional<std::uint64_t> seed,
                                     std::optional<std::string> output_dir) {
  auto cfg = ExperimentConfig::load(config_path);
  if (seed) {
    cfg.seed = *seed;
    cfg.train.seed = *seed;
  }
  if (!output_dir) output_dir = env_output_override();
  if (output_dir) cfg.output_dir = *output_dir;
  cfg.validate();
  return cfg;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto data = load_dataset(cfg);
  auto split = split_protocol(data, cfg.protocol);

  Trainer trainer(cfg.train);
  const auto& history = trainer.fit(split.train);
  auto report = evaluate_model(trainer.extractor(), trainer.head(), split.test,
                               cfg.eval_threshold);

  const auto& dir = cfg.output_dir;
  const std::string metrics = metrics_csv(history);
  const std::string report_json = dump_json(report_to_json(report));
  const std::string roc = roc_csv(report.roc);
  atomic_write_file(dir / "metrics.csv", metrics);
  atomic_write_file(dir / "report.json", report_json);
  atomic_write_file(dir / "roc.csv", roc);
  trainer.save_checkpoint(dir / "checkpoint.dgua");

  const auto resolved = cfg.to_json();
  nlohmann::json manifest{
      {"config", resolved},
      {"config_sha256", sha256_hex(resolved.dump())},
      {"artifacts",
       {{"metrics.csv", sha256_hex(metrics)},
        {"report.json", sha256_hex(report_json)},
        {"roc.csv", sha256_hex(roc)},
        {"checkpoint.dgua", sha256_hex(read_file(dir / "checkpoint.dgua"))}}},
      {"dataset", {{"train_samples", split.train.size()}, {"test_samples", split.test.size()}}},
      {"metrics", {{"auc", report.auc}, {"hter", report.hter}}}};
  atomic_write_file(dir / "manifest.json", dump_json(manifest));

  return RunResult{cfg, history, report};
}

std::vector<SweepCell> sweep_cells(const ExperimentConfig& base, const std::string& axis,
                                   const std::vector<std::uint64_t>& seeds) {
  std::vector<SweepCell> cells;
  auto with_dir = [&](ExperimentConfig cfg, const std::string& label) {
    cfg.output_dir = base.output_dir / "cells" / label;
    cells.push_back(SweepCell{label, std::move(cfg)});
  };

  if (axis == "protocol") {
    std::size_t num_domains;
    if (base.source == ExperimentConfig::DataSource::generate) {
      num_domains = base.gen.num_domains;
    } else {
      const auto data = load_dataset(base);
      int max_domain = 0;
      for (const auto& s : data) max_domain = std::max(max_domain, s.domain);
      num_domains = static_cast<std::size_t>(max_domain) + 1;
    }
    for (std::size_t d = 0; d < num_domains; ++d) {
      if (base.protocol.mode == ProtocolMode::limited_source) {
        if (base.protocol.train_domains.count(static_cast<int>(d))) continue;
      }
      ExperimentConfig cfg = base;
      cfg.protocol.test_domain = static_cast<int>(d);
      if (cfg.protocol.mode != ProtocolMode::limited_source) cfg.protocol.train_domains.clear();
      with_dir(std::move(cfg), "d" + std::to_string(d));
    }
  } else if (axis == "ablation") {
    const std::pair<bool, bool> combos[] = {{false, false}, {true, false}, {false, true},
                                            {true, true}};
    const char* labels[] = {"baseline", "sid", "sood", "sid_sood"};
    for (std::size_t i = 0; i < 4; ++i) {
      ExperimentConfig cfg = base;
      cfg.train.use_sid = combos[i].first;
      cfg.train.use_sood = combos[i].second;
      with_dir(std::move(cfg), labels[i]);
    }
  } else if (axis == "seed") {
    if (seeds.empty()) throw ConfigError("sweep: seed axis needs at least one seed");
    for (auto s : seeds) {
      ExperimentConfig cfg = base;
      cfg.seed = s;
      cfg.train.seed = s;
      with_dir(std::move(cfg), "seed" + std::to_string(s));
    }
  } else {
    throw ConfigError("sweep: unknown axis '" + axis + "', expected protocol, ablation or seed");
  }
  if (cells.empty()) throw ConfigError("sweep: axis '" + axis + "' produced no cells");
  return cells;
}

int run_sweep(const ExperimentConfig& base, const std::string& axis,
              const std::vector<std::uint64_t>& seeds) {
  const auto cells = sweep_cells(base, axis, seeds);
  std::string csv = "cell,mode,test_domain,use_sid,use_sood,seed,status,auc,hter\n";
  std::vector<double> aucs, hters;
  bool any_failed = false;
  for (const auto& cell : cells) {
    const auto& p = cell.config.protocol;
    std::ostringstream row;
    row << cell.label << "," << protocol_mode_name(p.mode) << "," << p.test_domain << ","
        << (cell.config.train.use_sid ? 1 : 0) << "," << (cell.config.train.use_sood ? 1 : 0)
        << "," << cell.config.seed << ",";
    try {
      const auto result = run_experiment(cell.config);
      row << "ok," << fmt17(result.report.auc) << "," << fmt17(result.report.hter);
      aucs.push_back(result.report.auc);
      hters.push_back(result.report.hter);
    } catch (const std::exception& e) {
      any_failed = true;
      std::cerr << "cell " << cell.label << " failed: " << e.what() << "\n";
      row << "failed,,";
    }
    csv += row.str() + "\n";
  }
  if (!aucs.empty()) {
    csv += "mean,,,,,," + std::string("ok,") + fmt17(mean_of(aucs)) + "," + fmt17(mean_of(hters)) +
           "\n";
    csv += "median,,,,,,ok," + fmt17(median_of(aucs)) + "," + fmt17(median_of(hters)) + "\n";
  }
  atomic_write_file(base.output_dir / "summary.csv", csv);
  return any_failed ? 1 : 0;
}

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const DivergenceError*>(&error)) return 3;
  if (dynamic_cast<const IoError*>(&error)) return 4;
  if (dynamic_cast<const ConfigError*>(&error) || dynamic_cast<const SchemaError*>(&error) ||
      dynamic_cast<const ParseError*>(&error)) {
    return 2;
  }
  return 1;
}

int command_run(const std::filesystem::path& config_path, std::optional<std::uint64_t> seed,
                std::optional<std::string> output_dir) {
  try {
    const auto cfg = load_with_overrides(config_path, seed, output_dir);
    const auto result = run_experiment(cfg);
    std::cout << "auc=" << result.report.auc << " hter=" << result.report.hter << " threshold="
              << result.report.threshold << " artifacts=" << cfg.output_dir.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

int command_sweep(const std::filesystem::path& config_path, const std::string& axis,
                  const std::string& seeds_csv, std::optional<std::uint64_t> seed,
                  std::optional<std::string> output_dir) {
  try {
    const auto cfg = load_with_overrides(config_path, seed, output_dir);
    std::vector<std::uint64_t> seeds;
    if (!seeds_csv.empty()) {
      std::stringstream ss(seeds_csv);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        try {
          std::size_t used = 0;
          seeds.push_back(std::stoull(cell, &used));
          if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
          throw ConfigError("sweep: bad seed '" + cell + "' in --seeds");
        }
      }
    } else if (axis == "seed") {
      for (std::uint64_t i = 0; i < 5; ++i) seeds.push_back(cfg.seed + i);
    }
    const int rc = run_sweep(cfg, axis, seeds);
    std::cout << "summary=" << (cfg.output_dir / "summary.csv").string() << "\n";
    return rc;
  } catch (const std::exception& e) {
    std::cerr << "sweep failed: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

int command_eval(const std::filesystem::path& checkpoint_path,
                 const std::filesystem::path& config_path, std::optional<std::string> output_dir) {
  try {
    const auto cfg = load_with_overrides(config_path, std::nullopt, std::move(output_dir));
    auto trainer = Trainer::load_checkpoint(checkpoint_path);
    const auto data = load_dataset(cfg);
    auto split = split_protocol(data, cfg.protocol);
    const auto report =
        evaluate_model(trainer.extractor(), trainer.head(), split.test, cfg.eval_threshold);
    atomic_write_file(cfg.output_dir / "report.json", dump_json(report_to_json(report)));
    atomic_write_file(cfg.output_dir / "roc.csv", roc_csv(report.roc));
    std::cout << "auc=" << report.auc << " hter=" << report.hter << " threshold="
              << report.threshold << " artifacts=" << cfg.output_dir.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "eval failed: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

int command_gen_data(const std::filesystem::path& config_path, std::optional<std::uint64_t> seed,
                     std::optional<std::string> output_dir) {
  try {
    const auto cfg = load_with_overrides(config_path, seed, output_dir);
    if (cfg.source != ExperimentConfig::DataSource::generate) {
      throw ConfigError("gen-data: config must use dataset.source 'generate'");
    }
    const auto data = generate(cfg.gen, mix_seed(cfg.seed, "data"));
    save_feature_file(cfg.output_dir / "features.csv", data);
    GenSpec spec = cfg.gen;
    if (spec.domains.empty()) {
      spec.domains = default_domains(spec.input_dim, spec.num_domains, spec.domain_shift);
    }
    atomic_write_file(cfg.output_dir / "dataset_manifest.json",
                      dump_json(dataset_manifest(spec, mix_seed(cfg.seed, "data"), data)));
    std::cout << "samples=" << data.size() << " artifacts=" << cfg.output_dir.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "gen-data failed: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace dgua

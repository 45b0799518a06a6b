#include <optional>
#include <string>

#include "CLI11.hpp"

#include "dgua/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"dgua: grouped-feature anti-spoofing trainer with synthetic unknown-attack samples"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, axis = "protocol", seeds_csv, output_dir;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd, bool with_seed) {
    cmd->add_option("config", config_path, "experiment config json")->required();
    cmd->add_option("--output-dir", output_dir, "override the config's output_dir");
    if (with_seed) cmd->add_option("--seed", seed, "override the config's seed");
  };

  auto* run = app.add_subcommand("run", "train and evaluate one experiment");
  add_common(run, true);

  auto* sweep = app.add_subcommand("sweep", "expand the config along one axis");
  add_common(sweep, true);
  sweep->add_option("--axis", axis, "protocol, ablation or seed")->required();
  sweep->add_option("--seeds", seeds_csv, "comma-separated seeds for the seed axis");

  auto* eval = app.add_subcommand("eval", "score a checkpoint on the config's test split");
  eval->add_option("checkpoint", checkpoint_path, "checkpoint.dgua path")->required();
  add_common(eval, false);

  auto* gen = app.add_subcommand("gen-data", "write the synthetic dataset as csv");
  add_common(gen, true);

  CLI11_PARSE(app, argc, argv);

  auto opt_seed = [&](CLI::App* cmd) -> std::optional<std::uint64_t> {
    if (cmd->count("--seed")) return seed;
    return std::nullopt;
  };
  auto opt_dir = [&]() -> std::optional<std::string> {
    if (output_dir.empty()) return std::nullopt;
    return output_dir;
  };

  if (run->parsed()) return dgua::command_run(config_path, opt_seed(run), opt_dir());
  if (sweep->parsed()) {
    return dgua::command_sweep(config_path, axis, seeds_csv, opt_seed(sweep), opt_dir());
  }
  if (eval->parsed()) return dgua::command_eval(checkpoint_path, config_path, opt_dir());
  if (gen->parsed()) return dgua::command_gen_data(config_path, opt_seed(gen), opt_dir());
  return 1;
}

#include "dgua/config.hpp"

#include <fstream>

#include "nlohmann/json.hpp"

#include "dgua/fsio.hpp"

namespace dgua {

namespace {

using nlohmann::json;

[[noreturn]] void bad_type(const std::string& key, const char* want) {
  throw SchemaError("config: key '" + key + "' must be " + want);
}

double as_number(const json& v, const std::string& key) {
  if (!v.is_number()) bad_type(key, "a number");
  return v.get<double>();
}

std::uint64_t as_uint(const json& v, const std::string& key) {
  if (!v.is_number_unsigned()) bad_type(key, "a nonnegative integer");
  return v.get<std::uint64_t>();
}

int as_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) bad_type(key, "an integer");
  return v.get<int>();
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) bad_type(key, "a boolean");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) bad_type(key, "a string");
  return v.get<std::string>();
}

std::set<int> as_int_set(const json& v, const std::string& key) {
  if (!v.is_array()) bad_type(key, "an array of integers");
  std::set<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) bad_type(key, "an array of integers");
    out.insert(e.get<int>());
  }
  return out;
}

const json& require_object(const json& v, const std::string& key) {
  if (!v.is_object()) bad_type(key, "an object");
  return v;
}

void parse_dataset(const json& section, ExperimentConfig& cfg) {
  require_object(section, "dataset");
  if (auto it = section.find("source"); it != section.end()) {
    const auto source = as_string(*it, "dataset.source");
    if (source == "generate") cfg.source = ExperimentConfig::DataSource::generate;
    else if (source == "feature_file") cfg.source = ExperimentConfig::DataSource::feature_file;
    else throw SchemaError("config: dataset.source must be 'generate' or 'feature_file', got '" +
                           source + "'");
  }
  const bool file_source = cfg.source == ExperimentConfig::DataSource::feature_file;
  bool saw_path = false;
  for (const auto& [key, value] : section.items()) {
    const std::string path = "dataset." + key;
    if (key == "source") continue;
    if (key == "input_dim") { cfg.gen.input_dim = as_uint(value, path); continue; }
    if (file_source) {
      if (key == "path") { cfg.feature_file = as_string(value, path); saw_path = true; continue; }
      throw SchemaError("config: key '" + path + "' is not allowed with source 'feature_file'");
    }
    if (key == "num_domains") cfg.gen.num_domains = as_uint(value, path);
    else if (key == "known_attacks") cfg.gen.known_attacks = as_int(value, path);
    else if (key == "unknown_attacks") cfg.gen.unknown_attacks = as_int(value, path);
    else if (key == "per_class_domain") cfg.gen.per_class_domain = as_uint(value, path);
    else if (key == "class_radius") cfg.gen.class_radius = as_number(value, path);
    else if (key == "class_sigma") cfg.gen.class_sigma = as_number(value, path);
    else if (key == "unknown_real_mix") cfg.gen.unknown_real_mix = as_number(value, path);
    else if (key == "unknown_novel_lift") cfg.gen.unknown_novel_lift = as_number(value, path);
    else if (key == "unknown_far_scale") cfg.gen.unknown_far_scale = as_number(value, path);
    else if (key == "domain_shift") cfg.gen.domain_shift = as_number(value, path);
    else throw SchemaError("config: unknown key '" + path + "'");
  }
  if (file_source && !saw_path) {
    throw SchemaError("config: missing required key 'dataset.path'");
  }
}

bool parse_protocol(const json& section, ExperimentConfig& cfg) {
  require_object(section, "protocol");
  bool saw_known_k = false;
  for (const auto& [key, value] : section.items()) {
    const std::string path = "protocol." + key;
    if (key == "mode") cfg.protocol.mode = protocol_mode_from(as_string(value, path));
    else if (key == "test_domain") cfg.protocol.test_domain = as_int(value, path);
    else if (key == "train_domains") cfg.protocol.train_domains = as_int_set(value, path);
    else if (key == "known_k") { cfg.protocol.known_k = as_int(value, path); saw_known_k = true; }
    else if (key == "unknown_classes") cfg.protocol.unknown_classes = as_int_set(value, path);
    else throw SchemaError("config: unknown key '" + path + "'");
  }
  return saw_known_k;
}

void parse_train(const json& section, ExperimentConfig& cfg) {
  require_object(section, "train");
  for (const auto& [key, value] : section.items()) {
    const std::string path = "train." + key;
    if (key == "epochs") cfg.train.epochs = as_uint(value, path);
    else if (key == "batch_size") cfg.train.batch_size = as_uint(value, path);
    else if (key == "lr") cfg.train.lr = as_number(value, path);
    else if (key == "weight_decay") cfg.train.weight_decay = as_number(value, path);
    else if (key == "lambda") cfg.train.lambda = as_number(value, path);
    else if (key == "alpha_id") cfg.train.alpha_id = as_number(value, path);
    else if (key == "alpha_ood") cfg.train.alpha_ood = as_number(value, path);
    else if (key == "weight_decay_on_bias") cfg.train.weight_decay_on_bias = as_bool(value, path);
    else if (key == "architecture") {
      require_object(value, path);
      for (const auto& [akey, avalue] : value.items()) {
        const std::string apath = path + "." + akey;
        if (akey == "group_widths") {
          if (!avalue.is_array()) bad_type(apath, "an array of arrays of integers");
          std::vector<std::vector<std::size_t>> widths;
          for (const auto& group : avalue) {
            if (!group.is_array()) bad_type(apath, "an array of arrays of integers");
            std::vector<std::size_t> w;
            for (const auto& e : group) w.push_back(as_uint(e, apath));
            widths.push_back(std::move(w));
          }
          cfg.train.architecture.group_widths = std::move(widths);
        } else if (akey == "embed_dim") {
          cfg.train.architecture.embed_dim = as_uint(avalue, apath);
        } else {
          throw SchemaError("config: unknown key '" + apath + "'");
        }
      }
    } else {
      throw SchemaError("config: unknown key '" + path + "'");
    }
  }
}

void parse_ablation(const json& section, ExperimentConfig& cfg) {
  require_object(section, "ablation");
  for (const auto& [key, value] : section.items()) {
    const std::string path = "ablation." + key;
    if (key == "use_sid") cfg.train.use_sid = as_bool(value, path);
    else if (key == "use_sood") cfg.train.use_sood = as_bool(value, path);
    else throw SchemaError("config: unknown key '" + path + "'");
  }
}

void parse_eval(const json& section, ExperimentConfig& cfg) {
  require_object(section, "eval");
  for (const auto& [key, value] : section.items()) {
    const std::string path = "eval." + key;
    if (key == "threshold") {
      if (value.is_null()) cfg.eval_threshold.reset();
      else cfg.eval_threshold = as_number(value, path);
    } else {
      throw SchemaError("config: unknown key '" + path + "'");
    }
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("config: top level must be an object");
  ExperimentConfig cfg;
  bool saw_seed = false, saw_output = false, saw_known_k = false;

  // dataset first: protocol and architecture defaults depend on it
  if (auto it = j.find("dataset"); it != j.end()) parse_dataset(*it, cfg);
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") { cfg.seed = as_uint(value, "seed"); saw_seed = true; }
    else if (key == "output_dir") { cfg.output_dir = as_string(value, "output_dir"); saw_output = true; }
    else if (key == "dataset") continue;
    else if (key == "protocol") saw_known_k = parse_protocol(value, cfg);
    else if (key == "train") parse_train(value, cfg);
    else if (key == "ablation") parse_ablation(value, cfg);
    else if (key == "eval") parse_eval(value, cfg);
    else throw SchemaError("config: unknown key '" + key + "'");
  }
  if (!saw_seed) throw SchemaError("config: missing required key 'seed'");
  if (!saw_output) throw SchemaError("config: missing required key 'output_dir'");

  const bool generating = cfg.source == DataSource::generate;
  if (!saw_known_k && generating) cfg.protocol.known_k = cfg.gen.known_attacks;
  if (generating && cfg.protocol.mode == ProtocolMode::unknown_attack &&
      cfg.protocol.unknown_classes.empty()) {
    for (int u = 0; u < cfg.gen.unknown_attacks; ++u) {
      cfg.protocol.unknown_classes.insert(cfg.gen.known_attacks + 1 + u);
    }
  }
  cfg.train.seed = cfg.seed;
  cfg.train.architecture.input_dim = cfg.gen.input_dim;
  cfg.train.architecture.num_attacks = static_cast<std::size_t>(cfg.protocol.known_k);

  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  if (output_dir.empty()) throw ConfigError("config: output_dir must not be empty");
  if (source == DataSource::generate) {
    gen.validate();
    if (protocol.known_k != gen.known_attacks) {
      throw ConfigError("config: protocol.known_k (" + std::to_string(protocol.known_k) +
                        ") must match dataset.known_attacks (" +
                        std::to_string(gen.known_attacks) + ")");
    }
    for (int u : protocol.unknown_classes) {
      if (u > gen.total_classes() - 1) {
        throw ConfigError("config: protocol.unknown_classes entry " + std::to_string(u) +
                          " exceeds the generated class range");
      }
    }
    protocol.validate(gen.num_domains);
  } else {
    if (feature_file.empty()) throw ConfigError("config: dataset.path must not be empty");
    if (gen.input_dim < 1) throw ConfigError("config: dataset.input_dim must be >= 1");
  }
  train.validate();
  if (eval_threshold && (!(*eval_threshold >= 0.0) || !(*eval_threshold <= 1.0))) {
    throw ConfigError("config: eval.threshold must be in [0,1]");
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json dataset;
  if (source == DataSource::generate) {
    dataset = {{"source", "generate"},
               {"input_dim", gen.input_dim},
               {"num_domains", gen.num_domains},
               {"known_attacks", gen.known_attacks},
               {"unknown_attacks", gen.unknown_attacks},
               {"per_class_domain", gen.per_class_domain},
               {"class_radius", gen.class_radius},
               {"class_sigma", gen.class_sigma},
               {"unknown_real_mix", gen.unknown_real_mix},
               {"unknown_novel_lift", gen.unknown_novel_lift},
               {"unknown_far_scale", gen.unknown_far_scale},
               {"domain_shift", gen.domain_shift}};
  } else {
    dataset = {{"source", "feature_file"},
               {"path", feature_file.string()},
               {"input_dim", gen.input_dim}};
  }
  return nlohmann::json{
      {"seed", seed},
      {"output_dir", output_dir.string()},
      {"dataset", dataset},
      {"protocol",
       {{"mode", protocol_mode_name(protocol.mode)},
        {"test_domain", protocol.test_domain},
        {"train_domains", protocol.train_domains},
        {"known_k", protocol.known_k},
        {"unknown_classes", protocol.unknown_classes}}},
      {"train",
       {{"epochs", train.epochs},
        {"batch_size", train.batch_size},
        {"lr", train.lr},
        {"weight_decay", train.weight_decay},
        {"lambda", train.lambda},
        {"alpha_id", train.alpha_id},
        {"alpha_ood", train.alpha_ood},
        {"weight_decay_on_bias", train.weight_decay_on_bias},
        {"architecture",
         {{"group_widths", train.architecture.group_widths},
          {"embed_dim", train.architecture.embed_dim}}}}},
      {"ablation", {{"use_sid", train.use_sid}, {"use_sood", train.use_sood}}},
      {"eval", {{"threshold", eval_threshold ? nlohmann::json(*eval_threshold) : nlohmann::json()}}}};
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config " + path.string() + " is not valid json: " + e.what());
  }
  return from_json(j);
}

}  // namespace dgua

#include "dgua/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>

#include <zlib.h>

#include "nlohmann/json.hpp"

#include "dgua/fsio.hpp"
#include "dgua/losses.hpp"
#include "dgua/rng.hpp"
#include "dgua/routing.hpp"

namespace dgua {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be positive");
  if (weight_decay < 0.0 || !std::isfinite(weight_decay)) {
    throw ConfigError("train: weight_decay must be >= 0");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("train: lambda must be >= 0");
  if (alpha_id < 0.0 || alpha_id > 1.0) throw ConfigError("train: alpha_id must be in [0,1]");
  if (alpha_ood < 0.0 || alpha_ood > 1.0) throw ConfigError("train: alpha_ood must be in [0,1]");
  architecture.validate();
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  return nlohmann::json{{"epochs", cfg.epochs},
                        {"batch_size", cfg.batch_size},
                        {"lr", cfg.lr},
                        {"weight_decay", cfg.weight_decay},
                        {"lambda", cfg.lambda},
                        {"alpha_id", cfg.alpha_id},
                        {"alpha_ood", cfg.alpha_ood},
                        {"seed", cfg.seed},
                        {"use_sid", cfg.use_sid},
                        {"use_sood", cfg.use_sood},
                        {"weight_decay_on_bias", cfg.weight_decay_on_bias},
                        {"architecture",
                         {{"input_dim", cfg.architecture.input_dim},
                          {"group_widths", cfg.architecture.group_widths},
                          {"embed_dim", cfg.architecture.embed_dim},
                          {"num_attacks", cfg.architecture.num_attacks}}}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  if (!j.is_object()) throw SchemaError("train config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "epochs") cfg.epochs = value.get<std::size_t>();
    else if (key == "batch_size") cfg.batch_size = value.get<std::size_t>();
    else if (key == "lr") cfg.lr = value.get<double>();
    else if (key == "weight_decay") cfg.weight_decay = value.get<double>();
    else if (key == "lambda") cfg.lambda = value.get<double>();
    else if (key == "alpha_id") cfg.alpha_id = value.get<double>();
    else if (key == "alpha_ood") cfg.alpha_ood = value.get<double>();
    else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
    else if (key == "use_sid") cfg.use_sid = value.get<bool>();
    else if (key == "use_sood") cfg.use_sood = value.get<bool>();
    else if (key == "weight_decay_on_bias") cfg.weight_decay_on_bias = value.get<bool>();
    else if (key == "architecture") {
      if (!value.is_object()) throw SchemaError("train config: architecture must be an object");
      for (const auto& [akey, avalue] : value.items()) {
        if (akey == "input_dim") cfg.architecture.input_dim = avalue.get<std::size_t>();
        else if (akey == "group_widths")
          cfg.architecture.group_widths = avalue.get<std::vector<std::vector<std::size_t>>>();
        else if (akey == "embed_dim") cfg.architecture.embed_dim = avalue.get<std::size_t>();
        else if (akey == "num_attacks") cfg.architecture.num_attacks = avalue.get<std::size_t>();
        else throw SchemaError("train config: unknown architecture key '" + akey + "'");
      }
    } else {
      throw SchemaError("train config: unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

namespace {

AdamConfig adam_config(const TrainConfig& cfg) {
  AdamConfig out;
  out.lr = cfg.lr;
  out.weight_decay = cfg.weight_decay;
  out.decay_biases = cfg.weight_decay_on_bias;
  return out;
}

std::vector<NamedParam> extract_side_params(const GroupedNetwork& extractor,
                                            const ClassifierHead& head) {
  auto params = extractor.parameters("extractor");
  for (auto& p : head.parameters("head")) params.push_back(std::move(p));
  return params;
}

}  // namespace

Trainer::Trainer(const TrainConfig& cfg)
    : cfg_((cfg.validate(), cfg)),
      extractor_(cfg.architecture, mix_seed(cfg.seed, "extractor")),
      suasg_(cfg.architecture, mix_seed(cfg.seed, "suasg")),
      head_(cfg.architecture.embed_dim, cfg.architecture.num_classes(),
            mix_seed(cfg.seed, "head")) {
  suasg_.copy_parameters_from(extractor_);
  opt_extract_ = std::make_unique<Adam>(extract_side_params(extractor_, head_), adam_config(cfg_));
  // The generator's final group never appears in its objective, so the
  // optimizer owns only the imitated groups; the final group keeps its
  // initial weights for the whole run.
  opt_suasg_ = std::make_unique<Adam>(
      suasg_.parameters_through(suasg_.num_groups() - 1, "suasg"), adam_config(cfg_));
}

void Trainer::check_frozen(const std::vector<NamedParam>& params, const char* step) const {
  for (const auto& p : params) {
    if (p.tensor->requires_grad() || p.tensor->has_grad()) {
      throw ContractError(std::string(step) + ": parameter " + p.name +
                          " is not frozen, gradients would leak into it");
    }
  }
}

void Trainer::check_divergence(const LossBundle& bundle) {
  const std::pair<const char*, double> terms[] = {
      {"cls", bundle.cls},         {"assoc", bundle.assoc}, {"imi", bundle.imi},
      {"sid_cls", bundle.sid_cls}, {"sood_cls", bundle.sood_cls},
      {"main", bundle.main},       {"extract", bundle.extract}};
  for (const auto& [name, value] : terms) {
    if (!std::isfinite(value) || value > 1e6) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%g", value);
      throw DivergenceError(std::string("loss term '") + name + "' diverged to " + buf);
    }
  }
}

LossBundle Trainer::train_step_suasg(const TensorPtr& x, const std::vector<int>& labels) {
  Tape tape;
  auto routed = route(tape, extractor_, head_, suasg_, x, labels, cfg_.alpha_id, cfg_.alpha_ood);
  auto imi = imitation_loss(tape, routed.suasg_group_feats, routed.extract_group_feats);

  // Hard-label CE over the switch-point paths keeps the imitated groups
  // producing features the frozen classifier still recognizes. The pure
  // generator path stays out of the objective, leaving its final group
  // unconstrained.
  auto hard = smooth_targets(labels, static_cast<int>(cfg_.architecture.num_attacks), 0.0);
  TensorPtr ce_acc;
  for (const auto& logits : routed.sid_logits) {
    auto ce = cross_entropy(tape, logits, hard);
    ce_acc = ce_acc ? add(tape, ce_acc, ce) : ce;
  }
  auto cls = scale(tape, ce_acc, 1.0 / static_cast<double>(routed.sid_logits.size()));
  auto total = add(tape, imi, cls);

  LossBundle bundle;
  bundle.imi = imi->item();
  bundle.sid_cls = cls->item();
  bundle.lambda = cfg_.lambda;
  check_divergence(bundle);

  tape.backward(total);
  check_frozen(extractor_.parameters("extractor"), "generator step");
  check_frozen(head_.parameters("head"), "generator step");
  opt_suasg_->step();
  return bundle;
}

LossBundle Trainer::train_step_extractor(const TensorPtr& x, const std::vector<int>& labels) {
  const int k = static_cast<int>(cfg_.architecture.num_attacks);
  Tape tape;
  auto routed = route(tape, extractor_, head_, suasg_, x, labels, cfg_.alpha_id, cfg_.alpha_ood);

  auto hard = smooth_targets(labels, k, 0.0);
  auto clean_ce = cross_entropy(tape, routed.clean_logits, hard);

  std::vector<std::size_t> real_rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 0) real_rows.push_back(i);
  }
  auto assoc = assoc_loss_rows(tape, routed.extract_group_feats.back(), real_rows);

  std::vector<TensorPtr> sid_ces;
  if (cfg_.use_sid) {
    auto id_targets = smooth_targets(labels, k, cfg_.alpha_id);
    for (const auto& logits : routed.sid_logits) {
      sid_ces.push_back(cross_entropy(tape, logits, id_targets));
    }
  }
  TensorPtr sood_ce;
  if (cfg_.use_sood) {
    auto ood_targets = smooth_targets(labels, k, cfg_.alpha_ood);
    sood_ce = cross_entropy(tape, routed.sood_logits, ood_targets);
  }

  auto composed = compose_extract_loss(tape, clean_ce, assoc, sid_ces, sood_ce, cfg_.lambda);
  check_divergence(composed.bundle);

  tape.backward(composed.total);
  check_frozen(suasg_.parameters("suasg"), "extractor step");
  opt_extract_->step();
  return composed.bundle;
}

const std::vector<LossBundle>& Trainer::fit(std::span<const LabeledSample> train,
                                            const StepObserver& observer) {
  const int k = static_cast<int>(cfg_.architecture.num_attacks);
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].test_only) {
      throw ContractError("fit: sample " + std::to_string(i) + " is test-only");
    }
    if (train[i].label < 0 || train[i].label > k) {
      throw ContractError("fit: sample " + std::to_string(i) + " has label " +
                          std::to_string(train[i].label) + ", outside 0.." + std::to_string(k));
    }
    if (train[i].features.size() != cfg_.architecture.input_dim) {
      throw DimensionError("fit: sample " + std::to_string(i) + " has width " +
                           std::to_string(train[i].features.size()) + ", expected " +
                           std::to_string(cfg_.architecture.input_dim));
    }
  }

  BatchStream stream(train, cfg_.batch_size, mix_seed(cfg_.seed, "batches"));
  const std::size_t dim = cfg_.architecture.input_dim;
  for (std::size_t epoch = epochs_done_; epoch < cfg_.epochs; ++epoch) {
    const auto batches = stream.epoch_batches(epoch);
    LossBundle acc;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      std::vector<double> flat;
      flat.reserve(batch.size() * dim);
      std::vector<int> labels;
      labels.reserve(batch.size());
      for (std::size_t idx : batch) {
        flat.insert(flat.end(), train[idx].features.begin(), train[idx].features.end());
        labels.push_back(train[idx].label);
      }
      auto x = Tensor::create({batch.size(), dim}, std::move(flat));

      extractor_.set_trainable(false);
      head_.set_trainable(false);
      suasg_.set_trainable(true);
      const auto gen_bundle = train_step_suasg(x, labels);
      if (observer) observer(epoch, b, 1, gen_bundle);

      suasg_.set_trainable(false);
      extractor_.set_trainable(true);
      head_.set_trainable(true);
      const auto ext_bundle = train_step_extractor(x, labels);
      if (observer) observer(epoch, b, 2, ext_bundle);

      acc.imi += gen_bundle.imi;
      acc.cls += ext_bundle.cls;
      acc.assoc += ext_bundle.assoc;
      acc.sid_cls += ext_bundle.sid_cls;
      acc.sood_cls += ext_bundle.sood_cls;
      acc.main += ext_bundle.main;
      acc.extract += ext_bundle.extract;
    }
    const double n = static_cast<double>(batches.size());
    acc.imi /= n;
    acc.cls /= n;
    acc.assoc /= n;
    acc.sid_cls /= n;
    acc.sood_cls /= n;
    acc.main /= n;
    acc.extract /= n;
    acc.lambda = cfg_.lambda;
    history_.push_back(acc);
    epochs_done_ = epoch + 1;
  }
  extractor_.set_trainable(true);
  head_.set_trainable(true);
  suasg_.set_trainable(true);
  return history_;
}

std::string metrics_csv(std::span<const LossBundle> history) {
  std::string out = "epoch,cls,assoc,imi,sid_cls,sood_cls,extract\n";
  char buf[224];
  for (std::size_t e = 0; e < history.size(); ++e) {
    const auto& h = history[e];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e + 1, h.cls,
                  h.assoc, h.imi, h.sid_cls, h.sood_cls, h.extract);
    out += buf;
  }
  return out;
}

// --- checkpoint container ----------------------------------------------------
//
// "DGUA" | u32 version | u64 json length | config json | u64 epochs done |
// u32 array count | arrays (u32 name length, name, u64 count, f64 values) |
// u32 crc32 of everything before it. All integers and doubles little-endian.

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u64(buf, bits);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw ParseError("checkpoint truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string out = buf.substr(pos, n);
    pos += n;
    return out;
  }
};

void put_array(std::string& buf, const std::string& name, std::span<const double> values) {
  put_u32(buf, static_cast<std::uint32_t>(name.size()));
  buf += name;
  put_u64(buf, values.size());
  for (double v : values) put_f64(buf, v);
}

std::uint32_t crc_of(std::string_view bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

const char* kHistoryFields[] = {"cls", "assoc", "imi", "sid_cls", "sood_cls", "main", "extract"};

double LossBundle::*history_member(std::size_t i) {
  static double LossBundle::*members[] = {&LossBundle::cls,      &LossBundle::assoc,
                                          &LossBundle::imi,      &LossBundle::sid_cls,
                                          &LossBundle::sood_cls, &LossBundle::main,
                                          &LossBundle::extract};
  return members[i];
}

}  // namespace

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  std::string buf = "DGUA";
  put_u32(buf, kCheckpointVersion);
  const std::string cfg_json = train_config_to_json(cfg_).dump();
  put_u64(buf, cfg_json.size());
  buf += cfg_json;
  put_u64(buf, epochs_done_);

  std::vector<std::pair<std::string, std::vector<double>>> arrays;
  auto add_params = [&](const std::vector<NamedParam>& params) {
    for (const auto& p : params) {
      arrays.emplace_back(p.name, std::vector<double>(p.tensor->values().begin(),
                                                      p.tensor->values().end()));
    }
  };
  add_params(extractor_.parameters("extractor"));
  add_params(head_.parameters("head"));
  add_params(suasg_.parameters("suasg"));

  auto add_optimizer = [&](const std::string& tag, const Adam& opt) {
    const auto& params = opt.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      arrays.emplace_back("adam." + tag + "." + params[i].name + ".m", opt.first_moment(i));
      arrays.emplace_back("adam." + tag + "." + params[i].name + ".v", opt.second_moment(i));
    }
    arrays.emplace_back("adam." + tag + ".t",
                        std::vector<double>{static_cast<double>(opt.step_count())});
  };
  add_optimizer("extract", *opt_extract_);
  add_optimizer("suasg", *opt_suasg_);

  for (std::size_t f = 0; f < std::size(kHistoryFields); ++f) {
    std::vector<double> column;
    column.reserve(history_.size());
    for (const auto& h : history_) column.push_back(h.*history_member(f));
    arrays.emplace_back(std::string("history.") + kHistoryFields[f], std::move(column));
  }

  put_u32(buf, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, values] : arrays) put_array(buf, name, values);

  put_u32(buf, crc_of(buf));
  atomic_write_file(path, buf);
}

Trainer Trainer::load_checkpoint(const std::filesystem::path& path) {
  const std::string buf = read_file(path);
  if (buf.size() < 12 || buf.compare(0, 4, "DGUA") != 0) {
    throw ParseError("checkpoint " + path.string() + " lacks the DGUA magic");
  }
  {
    Reader tail{buf, buf.size() - 4};
    const std::uint32_t stored = tail.u32();
    if (stored != crc_of(std::string_view(buf).substr(0, buf.size() - 4))) {
      throw ParseError("checkpoint " + path.string() + " failed its crc32 check");
    }
  }
  Reader r{buf, 4};
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ParseError("checkpoint version " + std::to_string(version) + " unsupported, expected " +
                     std::to_string(kCheckpointVersion));
  }
  const auto cfg_len = r.u64();
  nlohmann::json cfg_json;
  try {
    cfg_json = nlohmann::json::parse(r.bytes(cfg_len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint config echo is not valid json: ") + e.what());
  }
  Trainer trainer(train_config_from_json(cfg_json));
  const std::uint64_t epochs_done = r.u64();

  std::map<std::string, std::vector<double>> arrays;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.u32();
    std::string name = r.bytes(name_len);
    const auto n = r.u64();
    std::vector<double> values(n);
    for (auto& v : values) v = r.f64();
    if (!arrays.emplace(std::move(name), std::move(values)).second) {
      throw SchemaError("checkpoint has a duplicate array");
    }
  }
  if (r.pos != buf.size() - 4) throw ParseError("checkpoint has trailing bytes");

  auto take = [&](const std::string& name) {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw SchemaError("checkpoint is missing array '" + name + "'");
    std::vector<double> values = std::move(it->second);
    arrays.erase(it);
    return values;
  };
  auto restore_params = [&](const std::vector<NamedParam>& params) {
    for (const auto& p : params) {
      const auto values = take(p.name);
      if (values.size() != p.tensor->numel()) {
        throw SchemaError("checkpoint array '" + p.name + "' has length " +
                          std::to_string(values.size()) + ", expected " +
                          std::to_string(p.tensor->numel()));
      }
      std::copy(values.begin(), values.end(), p.tensor->values_mut().begin());
    }
  };
  restore_params(trainer.extractor_.parameters("extractor"));
  restore_params(trainer.head_.parameters("head"));
  restore_params(trainer.suasg_.parameters("suasg"));

  auto restore_optimizer = [&](const std::string& tag, Adam& opt) {
    const auto& params = opt.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto m = take("adam." + tag + "." + params[i].name + ".m");
      auto v = take("adam." + tag + "." + params[i].name + ".v");
      if (m.size() != params[i].tensor->numel() || v.size() != params[i].tensor->numel()) {
        throw SchemaError("checkpoint optimizer state for '" + params[i].name +
                          "' has the wrong length");
      }
      opt.restore_state(i, std::move(m), std::move(v));
    }
    const auto t = take("adam." + tag + ".t");
    if (t.size() != 1) throw SchemaError("checkpoint optimizer step count must be one value");
    opt.restore_step_count(static_cast<std::uint64_t>(t[0]));
  };
  restore_optimizer("extract", *trainer.opt_extract_);
  restore_optimizer("suasg", *trainer.opt_suasg_);

  std::vector<std::vector<double>> history_columns;
  for (const char* field : kHistoryFields) {
    history_columns.push_back(take(std::string("history.") + field));
    if (history_columns.back().size() != epochs_done) {
      throw SchemaError(std::string("checkpoint history column '") + field +
                        "' does not match the epoch counter");
    }
  }
  trainer.history_.resize(epochs_done);
  for (std::size_t e = 0; e < epochs_done; ++e) {
    for (std::size_t f = 0; f < history_columns.size(); ++f) {
      trainer.history_[e].*history_member(f) = history_columns[f][e];
    }
    trainer.history_[e].lambda = trainer.cfg_.lambda;
  }
  trainer.epochs_done_ = epochs_done;

  if (!arrays.empty()) {
    throw SchemaError("checkpoint has an unknown array '" + arrays.begin()->first + "'");
  }
  return trainer;
}

}  // namespace dgua

#include "dgua/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "nlohmann/json.hpp"

#include "dgua/fsio.hpp"
#include "dgua/rng.hpp"

namespace dgua {

void DomainSpec::validate(std::size_t input_dim) const {
  if (!(scale > 0.0)) throw ContractError("domain spec: scale must be > 0");
  if (!(noise_sigma > 0.0)) throw ContractError("domain spec: noise_sigma must be > 0");
  if (!translation.empty() && translation.size() != input_dim) {
    throw DimensionError("domain spec: translation length " + std::to_string(translation.size()) +
                         " does not match input_dim " + std::to_string(input_dim));
  }
}

std::vector<DomainSpec> default_domains(std::size_t input_dim, std::size_t num_domains,
                                        double shift) {
  std::vector<DomainSpec> out;
  for (std::size_t d = 0; d < num_domains; ++d) {
    DomainSpec spec;
    spec.rotation = 0.35 * shift * static_cast<double>(d);
    spec.scale = 1.0 + 0.08 * (static_cast<double>(d % 3) - 1.0);
    spec.noise_sigma = 0.05;
    spec.translation.resize(input_dim);
    for (std::size_t j = 0; j < input_dim; ++j) {
      spec.translation[j] = 0.4 * shift *
                            std::sin(0.9 * static_cast<double>(d + 1) *
                                     static_cast<double>(j + 1));
    }
    out.push_back(std::move(spec));
  }
  return out;
}

void GenSpec::validate() const {
  if (input_dim < 1) throw ContractError("gen spec: input_dim must be >= 1");
  if (num_domains < 2) throw ContractError("gen spec: need at least 2 domains");
  if (known_attacks < 1) throw ContractError("gen spec: need at least 1 known attack class");
  if (unknown_attacks < 0) throw ContractError("gen spec: unknown_attacks must be >= 0");
  if (per_class_domain < 1) throw ContractError("gen spec: per_class_domain must be >= 1");
  if (!(class_radius > 0.0)) throw ContractError("gen spec: class_radius must be > 0");
  if (class_sigma < 0.0) throw ContractError("gen spec: class_sigma must be >= 0");
  // real + known attacks each take one axis; the in-hull unknown tilts
  // along the first axis left over
  const std::size_t needed = static_cast<std::size_t>(known_attacks) + 1 +
                             (unknown_attacks > 0 ? 1 : 0);
  if (needed > input_dim) {
    throw ContractError("gen spec: input_dim too small for axis-aligned class means");
  }
  if (!(domain_shift >= 0.0)) throw ContractError("gen spec: domain_shift must be >= 0");
  if (!domains.empty() && domains.size() != num_domains) {
    throw ContractError("gen spec: domain spec count does not match num_domains");
  }
  for (const auto& d : domains) d.validate(input_dim);
}

GenSpec GenSpec::defaults() { return GenSpec{}; }

std::vector<double> class_mean(const GenSpec& spec, int cls) {
  if (cls < 0 || cls >= spec.total_classes()) {
    throw ContractError("class_mean: class " + std::to_string(cls) + " out of range");
  }
  const double r = spec.class_radius;
  std::vector<double> mean(spec.input_dim, 0.0);
  if (cls <= spec.known_attacks) {
    // known classes on axis-aligned sphere points
    mean[static_cast<std::size_t>(cls)] = r;
    return mean;
  }
  // real-class and averaged-attack anchor points
  std::vector<double> real(spec.input_dim, 0.0);
  real[0] = r;
  std::vector<double> attack_avg(spec.input_dim, 0.0);
  for (int a = 1; a <= spec.known_attacks; ++a) {
    attack_avg[static_cast<std::size_t>(a)] = r / static_cast<double>(spec.known_attacks);
  }
  const int u = cls - spec.known_attacks - 1;  // 0-based unknown index
  if (u % 2 == 0) {
    // between the real mean and the attack means, so it overlaps the training
    // hull, with a tilt along an axis no known class occupies
    for (std::size_t j = 0; j < spec.input_dim; ++j) {
      mean[j] = spec.unknown_real_mix * real[j] + (1.0 - spec.unknown_real_mix) * attack_avg[j];
    }
    mean[static_cast<std::size_t>(spec.known_attacks) + 1] += spec.unknown_novel_lift * r;
  } else {
    // far outside the hull, beyond the real mean along its ray: an attack
    // that presents an exaggerated version of genuine structure
    for (std::size_t j = 0; j < spec.input_dim; ++j) mean[j] = spec.unknown_far_scale * real[j];
  }
  return mean;
}

std::vector<double> domain_transform(const DomainSpec& spec, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  const double c = std::cos(spec.rotation), s = std::sin(spec.rotation);
  for (std::size_t i = 0; i + 1 < y.size(); i += 2) {
    const double a = y[i], b = y[i + 1];
    y[i] = c * a - s * b;
    y[i + 1] = s * a + c * b;
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = spec.scale * y[i] + (spec.translation.empty() ? 0.0 : spec.translation[i]);
  }
  return y;
}

std::vector<double> domain_inverse(const DomainSpec& spec, std::span<const double> y) {
  std::vector<double> x(y.begin(), y.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = (x[i] - (spec.translation.empty() ? 0.0 : spec.translation[i])) / spec.scale;
  }
  const double c = std::cos(spec.rotation), s = std::sin(spec.rotation);
  for (std::size_t i = 0; i + 1 < x.size(); i += 2) {
    const double a = x[i], b = x[i + 1];
    x[i] = c * a + s * b;
    x[i + 1] = -s * a + c * b;
  }
  return x;
}

std::vector<LabeledSample> generate(const GenSpec& spec_in, std::uint64_t seed) {
  GenSpec spec = spec_in;
  if (spec.domains.empty()) {
    spec.domains = default_domains(spec.input_dim, spec.num_domains, spec.domain_shift);
  }
  spec.validate();

  std::vector<LabeledSample> out;
  out.reserve(spec.num_domains * static_cast<std::size_t>(spec.total_classes()) *
              spec.per_class_domain);
  for (std::size_t d = 0; d < spec.num_domains; ++d) {
    for (int cls = 0; cls < spec.total_classes(); ++cls) {
      const auto mean = class_mean(spec, cls);
      // class scatter and sensor noise come from separately seeded streams
      Rng latent_rng(mix_seed(seed, "datagen.latent", d, static_cast<std::uint64_t>(cls)));
      Rng noise_rng(mix_seed(seed, "datagen.noise", d, static_cast<std::uint64_t>(cls)));
      for (std::size_t n = 0; n < spec.per_class_domain; ++n) {
        std::vector<double> latent(spec.input_dim);
        for (std::size_t j = 0; j < spec.input_dim; ++j) {
          latent[j] = mean[j] + spec.class_sigma * latent_rng.gaussian();
        }
        auto x = domain_transform(spec.domains[d], latent);
        for (std::size_t j = 0; j < spec.input_dim; ++j) {
          x[j] += spec.domains[d].noise_sigma * noise_rng.gaussian();
        }
        out.push_back(LabeledSample{std::move(x), cls, static_cast<int>(d), false});
      }
    }
  }
  return out;
}

std::string protocol_mode_name(ProtocolMode mode) {
  switch (mode) {
    case ProtocolMode::leave_one_out: return "leave_one_out";
    case ProtocolMode::limited_source: return "limited_source";
    case ProtocolMode::unknown_attack: return "unknown_attack";
  }
  throw ContractError("unknown protocol mode");
}

ProtocolMode protocol_mode_from(const std::string& name) {
  if (name == "leave_one_out") return ProtocolMode::leave_one_out;
  if (name == "limited_source") return ProtocolMode::limited_source;
  if (name == "unknown_attack") return ProtocolMode::unknown_attack;
  throw ConfigError("unknown protocol mode '" + name + "'");
}

std::set<int> ProtocolSpec::resolved_train_domains(std::size_t num_domains) const {
  if (!train_domains.empty()) return train_domains;
  std::set<int> out;
  for (std::size_t d = 0; d < num_domains; ++d) {
    if (static_cast<int>(d) != test_domain) out.insert(static_cast<int>(d));
  }
  return out;
}

void ProtocolSpec::validate(std::size_t num_domains) const {
  if (test_domain < 0 || test_domain >= static_cast<int>(num_domains)) {
    throw ProtocolError("protocol: test domain " + std::to_string(test_domain) + " out of range");
  }
  auto train = resolved_train_domains(num_domains);
  if (train.count(test_domain)) {
    throw ProtocolError("protocol: test domain " + std::to_string(test_domain) +
                        " also appears in the train domains");
  }
  if (train.empty()) throw ProtocolError("protocol: no train domains");
  for (int d : train) {
    if (d < 0 || d >= static_cast<int>(num_domains)) {
      throw ProtocolError("protocol: train domain " + std::to_string(d) + " out of range");
    }
  }
  if (known_k < 1) throw ProtocolError("protocol: known_k must be >= 1");
  for (int u : unknown_classes) {
    if (u <= known_k) {
      throw ProtocolError("protocol: unknown class " + std::to_string(u) +
                          " collides with known classes 0.." + std::to_string(known_k));
    }
  }
  if (mode != ProtocolMode::unknown_attack && !unknown_classes.empty()) {
    throw ProtocolError("protocol: unknown classes are only allowed in unknown_attack mode");
  }
}

SplitData split_protocol(const std::vector<LabeledSample>& data, const ProtocolSpec& protocol) {
  std::size_t num_domains = 0;
  for (const auto& s : data) {
    num_domains = std::max(num_domains, static_cast<std::size_t>(s.domain) + 1);
  }
  protocol.validate(num_domains);
  if (protocol.mode == ProtocolMode::unknown_attack) {
    for (int u : protocol.unknown_classes) {
      if (std::none_of(data.begin(), data.end(), [&](const auto& s) { return s.label == u; })) {
        throw ProtocolError("protocol: unknown class " + std::to_string(u) +
                            " absent from the dataset");
      }
    }
  }

  const auto train_domains = protocol.resolved_train_domains(num_domains);
  SplitData out;
  for (const auto& s : data) {
    if (train_domains.count(s.domain) && s.label <= protocol.known_k) {
      out.train.push_back(s);
      out.train.back().test_only = false;
    } else if (s.domain == protocol.test_domain) {
      const bool known = s.label <= protocol.known_k;
      const bool unknown_kept = protocol.mode == ProtocolMode::unknown_attack &&
                                protocol.unknown_classes.count(s.label) > 0;
      if (known || unknown_kept) {
        out.test.push_back(s);
        out.test.back().test_only = true;
      }
    }
  }
  if (out.train.empty() || out.test.empty()) {
    throw ProtocolError("protocol: split produced an empty train or test set");
  }
  return out;
}

BatchStream::BatchStream(std::span<const LabeledSample> train, std::size_t batch_size,
                         std::uint64_t seed)
    : batch_size_(batch_size), seed_(seed) {
  if (batch_size_ < 1) throw ContractError("batches: batch_size must be >= 1");
  std::map<int, std::vector<std::size_t>> grouped;
  for (std::size_t i = 0; i < train.size(); ++i) grouped[train[i].label].push_back(i);
  if (grouped.empty()) throw ContractError("batches: empty train set");
  if (batch_size_ < grouped.size()) {
    throw ContractError("batches: batch_size " + std::to_string(batch_size_) +
                        " smaller than the class count " + std::to_string(grouped.size()));
  }
  for (auto& [label, idx] : grouped) {
    total_ += idx.size();
    by_class_.push_back(std::move(idx));
  }
}

std::vector<std::vector<std::size_t>> BatchStream::epoch_batches(std::size_t epoch) const {
  struct Slot {
    double key;
    std::size_t cls;
    std::size_t pos;
    std::size_t index;
  };
  std::vector<Slot> slots;
  slots.reserve(total_);
  for (std::size_t c = 0; c < by_class_.size(); ++c) {
    auto idx = by_class_[c];
    Rng rng(mix_seed(seed_, "batch", epoch, c));
    for (std::size_t j = idx.size(); j > 1; --j) {
      std::swap(idx[j - 1], idx[rng.below(j)]);
    }
    const double offset = rng.uniform();
    const double n = static_cast<double>(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
      slots.push_back(Slot{(static_cast<double>(j) + offset) / n, c, j, idx[j]});
    }
  }
  std::sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
    if (a.key != b.key) return a.key < b.key;
    if (a.cls != b.cls) return a.cls < b.cls;
    return a.pos < b.pos;
  });

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < slots.size(); start += batch_size_) {
    std::vector<std::size_t> batch;
    for (std::size_t i = start; i < std::min(start + batch_size_, slots.size()); ++i) {
      batch.push_back(slots[i].index);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::vector<LabeledSample> load_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open feature file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("feature file " + path.string() + " has no header");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 3 || header[header.size() - 2] != "label" || header.back() != "domain") {
    throw SchemaError("feature file header must be f_0..f_{d-1},label,domain");
  }
  const std::size_t dim = header.size() - 2;
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[j] != "f_" + std::to_string(j)) {
      throw SchemaError("feature file header column " + std::to_string(j) + " is '" + header[j] +
                        "', expected 'f_" + std::to_string(j) + "'");
    }
  }

  std::vector<LabeledSample> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) {
      throw SchemaError("feature file line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " columns, expected " +
                        std::to_string(header.size()));
    }
    LabeledSample s;
    s.features.resize(dim);
    try {
      std::size_t used = 0;
      for (std::size_t j = 0; j < dim; ++j) {
        s.features[j] = std::stod(cells[j], &used);
        if (used != cells[j].size()) throw std::invalid_argument(cells[j]);
        if (!std::isfinite(s.features[j])) throw std::invalid_argument("non-finite");
      }
      s.label = std::stoi(cells[dim], &used);
      if (used != cells[dim].size()) throw std::invalid_argument(cells[dim]);
      s.domain = std::stoi(cells[dim + 1], &used);
      if (used != cells[dim + 1].size()) throw std::invalid_argument(cells[dim + 1]);
    } catch (const std::exception&) {
      throw ParseError("feature file line " + std::to_string(line_no) + " is malformed: " + line);
    }
    if (s.label < 0 || s.domain < 0) {
      throw ParseError("feature file line " + std::to_string(line_no) +
                       " has a negative label or domain");
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string feature_csv(std::span<const LabeledSample> samples) {
  std::string out;
  const std::size_t dim = samples.empty() ? 0 : samples[0].features.size();
  for (std::size_t j = 0; j < dim; ++j) out += "f_" + std::to_string(j) + ",";
  out += "label,domain\n";
  char buf[40];
  for (const auto& s : samples) {
    if (s.features.size() != dim) throw DimensionError("feature_csv: ragged feature widths");
    for (double v : s.features) {
      std::snprintf(buf, sizeof buf, "%.17g,", v);
      out += buf;
    }
    out += std::to_string(s.label) + "," + std::to_string(s.domain) + "\n";
  }
  return out;
}

void save_feature_file(const std::filesystem::path& path, std::span<const LabeledSample> samples) {
  atomic_write_file(path, feature_csv(samples));
}

nlohmann::json dataset_manifest(const GenSpec& spec, std::uint64_t seed,
                                std::span<const LabeledSample> samples) {
  std::map<int, std::size_t> per_class;
  std::map<int, std::size_t> per_domain;
  for (const auto& s : samples) {
    ++per_class[s.label];
    ++per_domain[s.domain];
  }
  nlohmann::json classes = nlohmann::json::object();
  for (auto& [cls, n] : per_class) classes[std::to_string(cls)] = n;
  nlohmann::json domains = nlohmann::json::object();
  for (auto& [dom, n] : per_domain) domains[std::to_string(dom)] = n;
  return nlohmann::json{{"input_dim", spec.input_dim},
                        {"num_domains", spec.num_domains},
                        {"known_attacks", spec.known_attacks},
                        {"unknown_attacks", spec.unknown_attacks},
                        {"seed", seed},
                        {"sample_count", samples.size()},
                        {"per_class_counts", classes},
                        {"per_domain_counts", domains}};
}

}  // namespace dgua

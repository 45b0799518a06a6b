#include "dgua/backbone.hpp"

#include <algorithm>

#include "dgua/rng.hpp"

namespace dgua {

void ArchitectureSpec::validate() const {
  if (input_dim < 1) throw ContractError("architecture: input_dim must be >= 1");
  if (group_widths.size() < 2) throw ContractError("architecture: need at least 2 groups");
  for (std::size_t g = 0; g < group_widths.size(); ++g) {
    if (group_widths[g].empty()) {
      throw ContractError("architecture: group " + std::to_string(g + 1) + " has no layers");
    }
    for (auto w : group_widths[g]) {
      if (w < 1) throw ContractError("architecture: widths must be >= 1");
    }
  }
  if (embed_dim != group_widths.back().back()) {
    throw ContractError("architecture: embed_dim " + std::to_string(embed_dim) +
                        " must equal the final group's final width " +
                        std::to_string(group_widths.back().back()));
  }
  if (num_attacks < 1) throw ContractError("architecture: need at least 1 known attack class");
}

GroupedNetwork::GroupedNetwork(const ArchitectureSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  std::size_t in = spec_.input_dim;
  const std::size_t G = spec_.num_groups();
  for (std::size_t g = 0; g < G; ++g) {
    std::vector<LinearLayer> layers;
    for (std::size_t l = 0; l < spec_.group_widths[g].size(); ++l) {
      const std::size_t out = spec_.group_widths[g][l];
      const bool final_layer = (g == G - 1) && (l == spec_.group_widths[g].size() - 1);
      layers.push_back(LinearLayer(in, out, mix_seed(seed, "layer", g, l),
                                   final_layer ? Activation::none : Activation::relu));
      in = out;
    }
    groups_.push_back(std::move(layers));
  }
}

std::size_t GroupedNetwork::group_input_dim(std::size_t g) const {
  if (g < 1 || g > groups_.size()) throw ContractError("group index out of range");
  return groups_[g - 1].front().in_dim();
}

std::size_t GroupedNetwork::group_output_dim(std::size_t g) const {
  if (g < 1 || g > groups_.size()) throw ContractError("group index out of range");
  return groups_[g - 1].back().out_dim();
}

TensorPtr GroupedNetwork::forward_groups(Tape& tape, const TensorPtr& x, std::size_t from_group,
                                         std::size_t to_group) const {
  const std::size_t G = groups_.size();
  if (from_group < 1 || from_group > to_group || to_group > G) {
    throw ContractError("forward_groups: invalid group range " + std::to_string(from_group) +
                        ".." + std::to_string(to_group) + " for G=" + std::to_string(G));
  }
  if (x->shape().size() != 2 || x->cols() != group_input_dim(from_group)) {
    throw DimensionError("forward_groups: input shape " + shape_str(x->shape()) +
                         " does not match group " + std::to_string(from_group) + " input width " +
                         std::to_string(group_input_dim(from_group)));
  }
  TensorPtr h = x;
  for (std::size_t g = from_group; g <= to_group; ++g) {
    for (const auto& layer : groups_[g - 1]) h = layer.forward(tape, h);
  }
  return h;
}

std::vector<TensorPtr> GroupedNetwork::group_outputs(Tape& tape, const TensorPtr& x) const {
  std::vector<TensorPtr> outs;
  outs.reserve(groups_.size());
  TensorPtr h = x;
  for (std::size_t g = 1; g <= groups_.size(); ++g) {
    h = forward_groups(tape, h, g, g);
    outs.push_back(h);
  }
  return outs;
}

std::vector<NamedParam> GroupedNetwork::parameters(const std::string& prefix) const {
  return parameters_through(groups_.size(), prefix);
}

std::vector<NamedParam> GroupedNetwork::parameters_through(std::size_t last_group,
                                                           const std::string& prefix) const {
  if (last_group > groups_.size()) {
    throw ArchitectureError("parameters_through: group index out of range");
  }
  std::vector<NamedParam> out;
  for (std::size_t g = 0; g < last_group; ++g) {
    for (std::size_t l = 0; l < groups_[g].size(); ++l) {
      const std::string name = (prefix.empty() ? "" : prefix + ".") + "g" + std::to_string(g + 1) +
                               ".l" + std::to_string(l);
      for (auto& p : groups_[g][l].parameters(name)) out.push_back(std::move(p));
    }
  }
  return out;
}

void GroupedNetwork::set_trainable(bool trainable) {
  for (auto& p : parameters()) p.tensor->set_requires_grad(trainable);
}

void GroupedNetwork::copy_parameters_from(const GroupedNetwork& other) {
  if (!architectural_twins(*this, other)) {
    throw ArchitectureError("copy_parameters_from: networks are not architectural twins");
  }
  auto dst = parameters();
  auto src = other.parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    auto s = src[i].tensor->values();
    std::copy(s.begin(), s.end(), dst[i].tensor->values_mut().begin());
  }
}

ClassifierHead::ClassifierHead(std::size_t embed_dim, std::size_t num_classes, std::uint64_t seed)
    : linear_(embed_dim, num_classes, seed, Activation::none) {
  if (num_classes < 2) throw ContractError("classifier head: need at least 2 classes");
}

TensorPtr ClassifierHead::classify(Tape& tape, const TensorPtr& emb) const {
  if (emb->shape().size() != 2 || emb->cols() != linear_.in_dim()) {
    throw DimensionError("classify: embedding shape " + shape_str(emb->shape()) +
                         " does not match head input width " + std::to_string(linear_.in_dim()));
  }
  return linear_.forward(tape, emb);
}

std::vector<NamedParam> ClassifierHead::parameters(const std::string& prefix) const {
  return linear_.parameters(prefix);
}

void ClassifierHead::set_trainable(bool trainable) {
  for (auto& p : parameters()) p.tensor->set_requires_grad(trainable);
}

bool architectural_twins(const GroupedNetwork& a, const GroupedNetwork& b) {
  if (a.num_groups() != b.num_groups()) return false;
  auto pa = a.parameters();
  auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].tensor->shape() != pb[i].tensor->shape()) return false;
  }
  return true;
}

}  // namespace dgua

#pragma once

#include <cstdint>
#include <vector>

#include "dgua/nn.hpp"

namespace dgua {

// Layer widths for a network split into G contiguous parameter groups. The
// classifier head is separate; embed_dim is the output width of group G.
struct ArchitectureSpec {
  std::size_t input_dim = 8;
  std::vector<std::vector<std::size_t>> group_widths = {{32}, {32}, {16}};
  std::size_t embed_dim = 16;
  std::size_t num_attacks = 2;  // K; head output width is K+1

  std::size_t num_groups() const { return group_widths.size(); }
  std::size_t num_classes() const { return num_attacks + 1; }
  void validate() const;

  bool operator==(const ArchitectureSpec&) const = default;
};

// G groups of linear layers. relu after every layer except the final layer of
// the final group, so embeddings can take any sign and reach the origin.
class GroupedNetwork {
 public:
  GroupedNetwork(const ArchitectureSpec& spec, std::uint64_t seed);

  const ArchitectureSpec& spec() const { return spec_; }
  std::size_t num_groups() const { return groups_.size(); }
  std::size_t embed_dim() const { return spec_.embed_dim; }
  std::size_t group_input_dim(std::size_t g) const;   // 1-based
  std::size_t group_output_dim(std::size_t g) const;  // 1-based

  // Applies groups from_group..to_group (1-based, inclusive) in order.
  TensorPtr forward_groups(Tape& tape, const TensorPtr& x, std::size_t from_group,
                           std::size_t to_group) const;

  // Intermediate output of every group in one pass; element G is the embedding.
  std::vector<TensorPtr> group_outputs(Tape& tape, const TensorPtr& x) const;

  std::vector<NamedParam> parameters(const std::string& prefix = "") const;
  // Parameters of groups 1..last_group only (1-based, inclusive).
  std::vector<NamedParam> parameters_through(std::size_t last_group,
                                             const std::string& prefix = "") const;
  void set_trainable(bool trainable);
  void copy_parameters_from(const GroupedNetwork& other);

  const std::vector<std::vector<LinearLayer>>& groups() const { return groups_; }
  std::vector<std::vector<LinearLayer>>& groups_mut() { return groups_; }

 private:
  ArchitectureSpec spec_;
  std::vector<std::vector<LinearLayer>> groups_;
};

// Single linear map from embeddings to K+1 logits.
class ClassifierHead {
 public:
  ClassifierHead(std::size_t embed_dim, std::size_t num_classes, std::uint64_t seed);

  std::size_t embed_dim() const { return linear_.in_dim(); }
  std::size_t num_classes() const { return linear_.out_dim(); }

  TensorPtr classify(Tape& tape, const TensorPtr& emb) const;

  std::vector<NamedParam> parameters(const std::string& prefix = "head") const;
  void set_trainable(bool trainable);
  const LinearLayer& linear() const { return linear_; }

 private:
  LinearLayer linear_;
};

// Same group count and per-layer parameter shapes.
bool architectural_twins(const GroupedNetwork& a, const GroupedNetwork& b);

}  // namespace dgua

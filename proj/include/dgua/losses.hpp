#pragma once

#include <span>
#include <vector>

#include "dgua/tensor.hpp"

namespace dgua {

// One training step's loss terms. main = cls + lambda*assoc and
// extract = main + sid_cls + sood_cls hold exactly by construction.
struct LossBundle {
  double cls = 0.0;
  double assoc = 0.0;
  double imi = 0.0;
  double sid_cls = 0.0;
  double sood_cls = 0.0;
  double main = 0.0;
  double extract = 0.0;
  double lambda = 1.0;
};

// Mean over the batch of -sum_c target_c * log softmax(logits)_c, computed in
// the log-sum-exp stable form. Target rows must sum to 1 within 1e-6.
TensorPtr cross_entropy(Tape& tape, const TensorPtr& logits, const TensorPtr& targets);

// Mean L1 norm of the embedding rows, pulling them toward the origin.
TensorPtr assoc_loss(Tape& tape, const TensorPtr& embeddings);

// Same, restricted to the given rows; an empty selection yields constant 0.
TensorPtr assoc_loss_rows(Tape& tape, const TensorPtr& embeddings,
                          std::span<const std::size_t> rows);

// (1/N) * sum_i sum_{g in groups} ||f_gen^{g,i} - f_ext^{g,i}||_1 over the
// named groups (1-based). Default covers groups 1..G-1.
TensorPtr imitation_loss(Tape& tape, std::span<const TensorPtr> suasg_feats,
                         std::span<const TensorPtr> extract_feats,
                         std::span<const std::size_t> groups);
TensorPtr imitation_loss(Tape& tape, std::span<const TensorPtr> suasg_feats,
                         std::span<const TensorPtr> extract_feats);

struct ComposedLoss {
  TensorPtr total;  // differentiable extractor objective
  LossBundle bundle;
};

// main = clean_ce + lambda*assoc; sid_cls = mean over the switch-point CE
// terms (empty span contributes 0); sood_ce may be null when disabled;
// total = main + sid_cls + sood_cls.
ComposedLoss compose_extract_loss(Tape& tape, const TensorPtr& clean_ce, const TensorPtr& assoc,
                                  std::span<const TensorPtr> sid_ces, const TensorPtr& sood_ce,
                                  double lambda);

}  // namespace dgua

#pragma once

#include <vector>

#include "dgua/backbone.hpp"

namespace dgua {

// All path outputs produced for one batch: the clean extractor path, one
// in-distribution path per switch point g in 1..G-1 (generator groups 1..g,
// then extractor groups g+1..G), and the out-of-distribution path through the
// generator alone. All logits go through the extractor's head.
struct RoutedBatch {
  TensorPtr clean_logits;               // [B x (K+1)]
  std::vector<TensorPtr> sid_logits;    // G-1 entries; index g-1 is switch point g
  TensorPtr sood_logits;                // [B x (K+1)]
  std::vector<TensorPtr> suasg_group_feats;    // G entries
  std::vector<TensorPtr> extract_group_feats;  // G entries
  std::vector<int> labels;
  double alpha_id = 0.5;
  double alpha_ood = 1.0;
};

RoutedBatch route(Tape& tape, const GroupedNetwork& extractor, const ClassifierHead& head,
                  const GroupedNetwork& suasg, const TensorPtr& x, std::vector<int> labels,
                  double alpha_id = 0.5, double alpha_ood = 1.0);

// Target rows (1-alpha) * onehot(label) + alpha/(K+1) * ones. alpha in [0,1],
// labels in 0..K. The result never requires gradients.
TensorPtr smooth_targets(const std::vector<int>& labels, int k, double alpha);

}  // namespace dgua

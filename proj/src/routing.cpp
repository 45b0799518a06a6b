#include "dgua/routing.hpp"

#include <utility>

namespace dgua {

RoutedBatch route(Tape& tape, const GroupedNetwork& extractor, const ClassifierHead& head,
                  const GroupedNetwork& suasg, const TensorPtr& x, std::vector<int> labels,
                  double alpha_id, double alpha_ood) {
  if (!architectural_twins(extractor, suasg)) {
    throw ArchitectureError("route: extractor and generator are not architectural twins");
  }
  if (x->shape().size() != 2 || x->rows() != labels.size()) {
    throw ContractError("route: batch size does not match label count");
  }
  const int k = static_cast<int>(extractor.spec().num_attacks);
  for (int y : labels) {
    if (y < 0 || y > k) throw ContractError("route: label " + std::to_string(y) + " outside 0.." + std::to_string(k));
  }
  const std::size_t G = extractor.num_groups();

  RoutedBatch out;
  out.labels = std::move(labels);
  out.alpha_id = alpha_id;
  out.alpha_ood = alpha_ood;
  out.extract_group_feats = extractor.group_outputs(tape, x);
  out.suasg_group_feats = suasg.group_outputs(tape, x);

  out.clean_logits = head.classify(tape, out.extract_group_feats[G - 1]);
  for (std::size_t g = 1; g < G; ++g) {
    auto handoff = extractor.forward_groups(tape, out.suasg_group_feats[g - 1], g + 1, G);
    out.sid_logits.push_back(head.classify(tape, handoff));
  }
  out.sood_logits = head.classify(tape, out.suasg_group_feats[G - 1]);
  return out;
}

TensorPtr smooth_targets(const std::vector<int>& labels, int k, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ContractError("smooth_targets: alpha " + std::to_string(alpha) + " outside [0,1]");
  }
  if (k < 1) throw ContractError("smooth_targets: k must be >= 1");
  if (labels.empty()) throw ContractError("smooth_targets: empty label list");
  const std::size_t c = static_cast<std::size_t>(k) + 1;
  std::vector<double> data(labels.size() * c, alpha / static_cast<double>(c));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] > k) {
      throw ContractError("smooth_targets: label " + std::to_string(labels[i]) + " outside 0.." +
                          std::to_string(k));
    }
    data[i * c + static_cast<std::size_t>(labels[i])] += 1.0 - alpha;
  }
  return Tensor::create({labels.size(), c}, std::move(data), false);
}

}  // namespace dgua

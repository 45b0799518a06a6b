#include "dgua/losses.hpp"

#include <cmath>
#include <string>

namespace dgua {

TensorPtr cross_entropy(Tape& tape, const TensorPtr& logits, const TensorPtr& targets) {
  if (logits->shape() != targets->shape()) {
    throw DimensionError("cross_entropy: logits " + shape_str(logits->shape()) + " vs targets " +
                         shape_str(targets->shape()));
  }
  const std::size_t B = targets->rows(), C = targets->cols();
  auto tv = targets->values();
  for (std::size_t i = 0; i < B; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < C; ++j) row_sum += tv[i * C + j];
    if (std::abs(row_sum - 1.0) > 1e-6) {
      throw ContractError("cross_entropy: target row " + std::to_string(i) + " sums to " +
                          std::to_string(row_sum) + ", not 1");
    }
  }
  auto logp = log_softmax_rows(tape, logits);
  return scale(tape, sum(tape, mul(tape, targets, logp)), -1.0 / static_cast<double>(B));
}

TensorPtr assoc_loss(Tape& tape, const TensorPtr& embeddings) {
  const std::size_t R = embeddings->rows();
  return scale(tape, sum(tape, abs(tape, embeddings)), 1.0 / static_cast<double>(R));
}

TensorPtr assoc_loss_rows(Tape& tape, const TensorPtr& embeddings,
                          std::span<const std::size_t> rows) {
  if (rows.empty()) return Tensor::scalar(0.0);
  auto selected = gather_rows(tape, embeddings, {rows.begin(), rows.end()});
  return assoc_loss(tape, selected);
}

TensorPtr imitation_loss(Tape& tape, std::span<const TensorPtr> suasg_feats,
                         std::span<const TensorPtr> extract_feats,
                         std::span<const std::size_t> groups) {
  if (suasg_feats.size() != extract_feats.size()) {
    throw DimensionError("imitation_loss: feature lists differ in length");
  }
  if (groups.empty()) throw ContractError("imitation_loss: empty group set");
  const std::size_t N = suasg_feats.empty() ? 0 : suasg_feats[0]->rows();
  TensorPtr acc;
  for (auto g : groups) {
    if (g < 1 || g > suasg_feats.size()) {
      throw ContractError("imitation_loss: group index " + std::to_string(g) + " out of range");
    }
    const auto& fs = suasg_feats[g - 1];
    const auto& fe = extract_feats[g - 1];
    if (fs->shape() != fe->shape()) {
      throw DimensionError("imitation_loss: group " + std::to_string(g) + " features " +
                           shape_str(fs->shape()) + " vs " + shape_str(fe->shape()));
    }
    auto term = sum(tape, abs(tape, sub(tape, fs, fe)));
    acc = acc ? add(tape, acc, term) : term;
  }
  return scale(tape, acc, 1.0 / static_cast<double>(N));
}

TensorPtr imitation_loss(Tape& tape, std::span<const TensorPtr> suasg_feats,
                         std::span<const TensorPtr> extract_feats) {
  if (suasg_feats.size() < 2) {
    throw ContractError("imitation_loss: need at least 2 groups of features");
  }
  std::vector<std::size_t> groups;
  for (std::size_t g = 1; g < suasg_feats.size(); ++g) groups.push_back(g);
  return imitation_loss(tape, suasg_feats, extract_feats, groups);
}

ComposedLoss compose_extract_loss(Tape& tape, const TensorPtr& clean_ce, const TensorPtr& assoc,
                                  std::span<const TensorPtr> sid_ces, const TensorPtr& sood_ce,
                                  double lambda) {
  auto main = add(tape, clean_ce, scale(tape, assoc, lambda));

  TensorPtr sid_mean;
  if (sid_ces.empty()) {
    sid_mean = Tensor::scalar(0.0);
  } else {
    TensorPtr acc = sid_ces[0];
    for (std::size_t i = 1; i < sid_ces.size(); ++i) acc = add(tape, acc, sid_ces[i]);
    sid_mean = scale(tape, acc, 1.0 / static_cast<double>(sid_ces.size()));
  }
  TensorPtr sood = sood_ce ? sood_ce : Tensor::scalar(0.0);

  auto total = add(tape, add(tape, main, sid_mean), sood);

  ComposedLoss out;
  out.total = total;
  out.bundle.cls = clean_ce->item();
  out.bundle.assoc = assoc->item();
  out.bundle.sid_cls = sid_mean->item();
  out.bundle.sood_cls = sood->item();
  out.bundle.lambda = lambda;
  out.bundle.main = main->item();
  out.bundle.extract = total->item();
  return out;
}

}  // namespace dgua

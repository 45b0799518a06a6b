#include "dgua/nn.hpp"

#include <cmath>
#include <utility>

#include "dgua/rng.hpp"

namespace dgua {

LinearLayer::LinearLayer(std::size_t in, std::size_t out, std::uint64_t seed, Activation activation)
    : activation_(activation) {
  if (in < 1 || out < 1) throw ContractError("linear layer dimensions must be >= 1");
  Rng rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<double> w(in * out);
  for (auto& v : w) v = rng.uniform(-limit, limit);
  weight_ = Tensor::create({in, out}, std::move(w), true);
  bias_ = Tensor::zeros({out}, true);
}

TensorPtr LinearLayer::forward(Tape& tape, const TensorPtr& x) const {
  auto z = add_rowvec(tape, matmul(tape, x, weight_), bias_);
  return activation_ == Activation::relu ? relu(tape, z) : z;
}

std::vector<NamedParam> LinearLayer::parameters(const std::string& prefix) const {
  return {{prefix + ".weight", weight_, true}, {prefix + ".bias", bias_, false}};
}

LinearLayer init_layer(std::size_t in, std::size_t out, std::uint64_t seed, Activation activation) {
  return LinearLayer(in, out, seed, activation);
}

Adam::Adam(std::vector<NamedParam> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor->numel(), 0.0);
    v_.emplace_back(p.tensor->numel(), 0.0);
  }
}

void Adam::step() {
  for (const auto& p : params_) {
    if (!p.tensor->has_grad()) {
      throw ContractError("adam step: parameter '" + p.name + "' has no gradient");
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    auto pv = p.tensor->values_mut();
    auto gv = p.tensor->grad();
    auto& m = m_[i];
    auto& v = v_[i];
    const bool apply_decay = p.weight_decay || cfg_.decay_biases;
    for (std::size_t j = 0; j < pv.size(); ++j) {
      if (apply_decay) pv[j] -= cfg_.lr * cfg_.weight_decay * pv[j];
      const double g = gv[j];
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      pv[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    p.tensor->clear_grad();
  }
}

void Adam::restore_state(std::size_t i, std::vector<double> m, std::vector<double> v) {
  if (i >= params_.size() || m.size() != m_[i].size() || v.size() != v_[i].size()) {
    throw ContractError("adam restore_state: size mismatch");
  }
  m_[i] = std::move(m);
  v_[i] = std::move(v);
}

}  // namespace dgua

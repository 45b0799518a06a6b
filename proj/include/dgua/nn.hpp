#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgua/tensor.hpp"

namespace dgua {

enum class Activation { relu, none };

// A parameter with a stable name for checkpointing and optimizer diagnostics.
// weight_decay marks whether decoupled decay applies (biases opt out).
struct NamedParam {
  std::string name;
  TensorPtr tensor;
  bool weight_decay = true;
};

// Fully connected layer, Xavier-uniform weights, zero bias.
class LinearLayer {
 public:
  LinearLayer(std::size_t in, std::size_t out, std::uint64_t seed,
              Activation activation = Activation::none);

  std::size_t in_dim() const { return weight_->shape()[0]; }
  std::size_t out_dim() const { return weight_->shape()[1]; }
  Activation activation() const { return activation_; }
  void set_activation(Activation a) { activation_ = a; }

  TensorPtr forward(Tape& tape, const TensorPtr& x) const;

  const TensorPtr& weight() const { return weight_; }
  const TensorPtr& bias() const { return bias_; }

  std::vector<NamedParam> parameters(const std::string& prefix) const;

 private:
  TensorPtr weight_;  // [in x out]
  TensorPtr bias_;    // [out]
  Activation activation_;
};

LinearLayer init_layer(std::size_t in, std::size_t out, std::uint64_t seed,
                       Activation activation = Activation::none);

struct AdamConfig {
  double lr = 1e-4;
  double weight_decay = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled decay normally skips biases; flip to include them.
  bool decay_biases = false;
};

// Adam with bias correction and decoupled weight decay. Weight decay is
// applied directly to the parameter before the Adam delta, never folded into
// the gradient. Gradients are zeroed (dropped) after each step.
class Adam {
 public:
  Adam(std::vector<NamedParam> params, AdamConfig cfg);

  void step();

  std::uint64_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<NamedParam>& params() const { return params_; }

  // Checkpoint access.
  const std::vector<double>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<double>& second_moment(std::size_t i) const { return v_[i]; }
  void restore_state(std::size_t i, std::vector<double> m, std::vector<double> v);
  void restore_step_count(std::uint64_t t) { t_ = t; }

 private:
  std::vector<NamedParam> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t t_ = 0;
  AdamConfig cfg_;
};

}  // namespace dgua

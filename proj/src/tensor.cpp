#include "dgua/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace dgua {

std::string shape_str(const Shape& s) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out << "x";
    out << s[i];
  }
  out << "]";
  return out.str();
}

namespace {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

void check_shape(const Shape& s) {
  if (s.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (auto d : s) {
    if (d == 0) throw DimensionError("tensor shape " + shape_str(s) + " has a zero dimension");
  }
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : shape_(std::move(shape)), data_(std::move(data)), requires_grad_(requires_grad) {
  check_shape(shape_);
  if (shape_numel(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_str(shape_) + " does not match data length " +
                         std::to_string(data_.size()));
  }
}

TensorPtr Tensor::create(Shape shape, std::vector<double> data, bool requires_grad) {
  return std::make_shared<Tensor>(std::move(shape), std::move(data), requires_grad);
}

TensorPtr Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> data(shape_numel(shape), 0.0);
  return create(std::move(shape), std::move(data), requires_grad);
}

TensorPtr Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> data(shape_numel(shape), value);
  return create(std::move(shape), std::move(data), requires_grad);
}

TensorPtr Tensor::scalar(double value, bool requires_grad) {
  return create({1}, {value}, requires_grad);
}

std::size_t Tensor::rows() const {
  if (shape_.size() != 2) throw DimensionError("expected a matrix, got shape " + shape_str(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() != 2) throw DimensionError("expected a matrix, got shape " + shape_str(shape_));
  return shape_[1];
}

double Tensor::at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

double Tensor::item() const {
  if (!is_scalar()) throw ContractError("item() requires a scalar tensor, got shape " + shape_str(shape_));
  return data_[0];
}

std::span<const double> Tensor::grad() const {
  if (grad_.empty()) throw ContractError("gradient is absent; run backward() first");
  return grad_;
}

std::span<double> Tensor::grad_mut() {
  ensure_grad();
  return grad_;
}

void Tensor::ensure_grad() {
  if (grad_.empty()) grad_.assign(data_.size(), 0.0);
}

void Tensor::clear_grad() { grad_.clear(); }

void Tape::reset() {
  nodes_.clear();
  backward_done_ = false;
}

void Tape::record(TensorPtr output, std::function<void()> backprop) {
  nodes_.push_back(Node{std::move(output), std::move(backprop)});
}

void Tape::backward(const TensorPtr& root) {
  if (backward_done_) throw ContractError("backward() already invoked on this tape; reset() first");
  if (nodes_.empty()) throw ContractError("backward() on an empty tape");
  if (!root || !root->is_scalar()) {
    throw ContractError("backward() root must be a scalar, got shape " +
                        (root ? shape_str(root->shape()) : std::string("null")));
  }
  backward_done_ = true;
  root->ensure_grad();
  root->grad_mut()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output->has_grad()) it->backprop();
  }
}

namespace {

// An output participates in the gradient flow if any input does.
bool any_grad(std::initializer_list<const TensorPtr*> inputs) {
  for (auto* t : inputs) {
    if ((*t)->requires_grad()) return true;
  }
  return false;
}

enum class Broadcast { none, a_scalar, b_scalar };

Broadcast binary_mode(const char* op, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape() == b->shape()) return Broadcast::none;
  if (a->is_scalar()) return Broadcast::a_scalar;
  if (b->is_scalar()) return Broadcast::b_scalar;
  throw DimensionError(std::string(op) + ": shapes " + shape_str(a->shape()) + " and " +
                       shape_str(b->shape()) + " do not match");
}

}  // namespace

TensorPtr matmul(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape().size() != 2 || b->shape().size() != 2 || a->cols() != b->rows()) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a->shape()) + " and " +
                         shape_str(b->shape()));
  }
  const std::size_t B = a->rows(), D = a->cols(), E = b->cols();
  auto out = Tensor::zeros({B, E}, any_grad({&a, &b}));
  auto av = a->values();
  auto bv = b->values();
  auto ov = out->values_mut();
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t k = 0; k < D; ++k) {
      const double aik = av[i * D + k];
      for (std::size_t j = 0; j < E; ++j) ov[i * E + j] += aik * bv[k * E + j];
    }
  }
  tape.record(out, [a, b, out, B, D, E] {
    auto go = out->grad();
    if (a->requires_grad()) {
      auto ga = a->grad_mut();
      auto bv2 = b->values();
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < E; ++j) {
          const double g = go[i * E + j];
          for (std::size_t k = 0; k < D; ++k) ga[i * D + k] += g * bv2[k * E + j];
        }
    }
    if (b->requires_grad()) {
      auto gb = b->grad_mut();
      auto av2 = a->values();
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t k = 0; k < D; ++k) {
          const double aik = av2[i * D + k];
          for (std::size_t j = 0; j < E; ++j) gb[k * E + j] += aik * go[i * E + j];
        }
    }
  });
  return out;
}

namespace {

template <typename Fwd, typename DA, typename DB>
TensorPtr binary_op(Tape& tape, const char* name, const TensorPtr& a, const TensorPtr& b, Fwd fwd,
                    DA da, DB db) {
  const Broadcast mode = binary_mode(name, a, b);
  const Shape& out_shape = mode == Broadcast::a_scalar ? b->shape() : a->shape();
  const std::size_t n = mode == Broadcast::a_scalar ? b->numel() : a->numel();
  std::vector<double> data(n);
  auto av = a->values();
  auto bv = b->values();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = mode == Broadcast::a_scalar ? av[0] : av[i];
    const double y = mode == Broadcast::b_scalar ? bv[0] : bv[i];
    data[i] = fwd(x, y);
  }
  auto out = Tensor::create(out_shape, std::move(data), any_grad({&a, &b}));
  tape.record(out, [a, b, out, mode, n, da, db] {
    auto go = out->grad();
    auto av2 = a->values();
    auto bv2 = b->values();
    if (a->requires_grad()) {
      auto ga = a->grad_mut();
      for (std::size_t i = 0; i < n; ++i) {
        const double x = mode == Broadcast::a_scalar ? av2[0] : av2[i];
        const double y = mode == Broadcast::b_scalar ? bv2[0] : bv2[i];
        ga[mode == Broadcast::a_scalar ? 0 : i] += da(x, y) * go[i];
      }
    }
    if (b->requires_grad()) {
      auto gb = b->grad_mut();
      for (std::size_t i = 0; i < n; ++i) {
        const double x = mode == Broadcast::a_scalar ? av2[0] : av2[i];
        const double y = mode == Broadcast::b_scalar ? bv2[0] : bv2[i];
        gb[mode == Broadcast::b_scalar ? 0 : i] += db(x, y) * go[i];
      }
    }
  });
  return out;
}

template <typename Fwd, typename Dx>
TensorPtr unary_op(Tape& tape, const TensorPtr& x, Fwd fwd, Dx dx) {
  const std::size_t n = x->numel();
  std::vector<double> data(n);
  auto xv = x->values();
  for (std::size_t i = 0; i < n; ++i) data[i] = fwd(xv[i]);
  auto out = Tensor::create(x->shape(), std::move(data), x->requires_grad());
  tape.record(out, [x, out, n, dx] {
    if (!x->requires_grad()) return;
    auto go = out->grad();
    auto gx = x->grad_mut();
    auto xv2 = x->values();
    for (std::size_t i = 0; i < n; ++i) gx[i] += dx(xv2[i]) * go[i];
  });
  return out;
}

}  // namespace

TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  return binary_op(
      tape, "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

TensorPtr sub(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  return binary_op(
      tape, "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

TensorPtr mul(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  return binary_op(
      tape, "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

TensorPtr relu(Tape& tape, const TensorPtr& x) {
  return unary_op(
      tape, x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

TensorPtr abs(Tape& tape, const TensorPtr& x) {
  return unary_op(
      tape, x, [](double v) { return std::abs(v); },
      [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

TensorPtr log(Tape& tape, const TensorPtr& x) {
  auto xv = x->values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    if (!(xv[i] > 0.0)) {
      throw DomainError("log: non-positive value " + std::to_string(xv[i]) + " at flat index " +
                        std::to_string(i));
    }
  }
  return unary_op(
      tape, x, [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}

TensorPtr exp(Tape& tape, const TensorPtr& x) {
  return unary_op(
      tape, x, [](double v) { return std::exp(v); }, [](double v) { return std::exp(v); });
}

namespace {

void check_softmax_input(const TensorPtr& logits) {
  if (logits->shape().size() != 2) {
    throw DimensionError("softmax_rows: expected a matrix, got shape " + shape_str(logits->shape()));
  }
  if (logits->cols() < 2) throw ContractError("softmax_rows: need at least 2 columns");
  for (double v : logits->values()) {
    if (!std::isfinite(v)) throw NumericError("softmax_rows: non-finite logit");
  }
}

}  // namespace

TensorPtr softmax_rows(Tape& tape, const TensorPtr& logits) {
  check_softmax_input(logits);
  const std::size_t B = logits->rows(), C = logits->cols();
  std::vector<double> data(B * C);
  auto lv = logits->values();
  for (std::size_t i = 0; i < B; ++i) {
    double m = lv[i * C];
    for (std::size_t j = 1; j < C; ++j) m = std::max(m, lv[i * C + j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < C; ++j) {
      data[i * C + j] = std::exp(lv[i * C + j] - m);
      denom += data[i * C + j];
    }
    for (std::size_t j = 0; j < C; ++j) data[i * C + j] /= denom;
  }
  auto out = Tensor::create({B, C}, std::move(data), logits->requires_grad());
  tape.record(out, [logits, out, B, C] {
    if (!logits->requires_grad()) return;
    auto go = out->grad();
    auto sv = out->values();
    auto gx = logits->grad_mut();
    for (std::size_t i = 0; i < B; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < C; ++j) dot += go[i * C + j] * sv[i * C + j];
      for (std::size_t j = 0; j < C; ++j)
        gx[i * C + j] += sv[i * C + j] * (go[i * C + j] - dot);
    }
  });
  return out;
}

TensorPtr log_softmax_rows(Tape& tape, const TensorPtr& logits) {
  check_softmax_input(logits);
  const std::size_t B = logits->rows(), C = logits->cols();
  std::vector<double> data(B * C);
  auto lv = logits->values();
  for (std::size_t i = 0; i < B; ++i) {
    double m = lv[i * C];
    for (std::size_t j = 1; j < C; ++j) m = std::max(m, lv[i * C + j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < C; ++j) denom += std::exp(lv[i * C + j] - m);
    const double lse = m + std::log(denom);
    for (std::size_t j = 0; j < C; ++j) data[i * C + j] = lv[i * C + j] - lse;
  }
  auto out = Tensor::create({B, C}, std::move(data), logits->requires_grad());
  tape.record(out, [logits, out, B, C] {
    if (!logits->requires_grad()) return;
    auto go = out->grad();
    auto logp = out->values();
    auto gx = logits->grad_mut();
    for (std::size_t i = 0; i < B; ++i) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < C; ++j) gsum += go[i * C + j];
      for (std::size_t j = 0; j < C; ++j)
        gx[i * C + j] += go[i * C + j] - std::exp(logp[i * C + j]) * gsum;
    }
  });
  return out;
}

TensorPtr sum(Tape& tape, const TensorPtr& x) {
  double total = 0.0;
  for (double v : x->values()) total += v;
  auto out = Tensor::create({1}, {total}, x->requires_grad());
  tape.record(out, [x, out] {
    if (!x->requires_grad()) return;
    const double g = out->grad()[0];
    auto gx = x->grad_mut();
    for (auto& v : gx) v += g;
  });
  return out;
}

TensorPtr add_rowvec(Tape& tape, const TensorPtr& mat, const TensorPtr& vec) {
  if (mat->shape().size() != 2 || vec->shape().size() != 1 || mat->cols() != vec->shape()[0]) {
    throw DimensionError("add_rowvec: shapes " + shape_str(mat->shape()) + " and " +
                         shape_str(vec->shape()) + " do not match");
  }
  const std::size_t B = mat->rows(), E = mat->cols();
  std::vector<double> data(B * E);
  auto mv = mat->values();
  auto vv = vec->values();
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t j = 0; j < E; ++j) data[i * E + j] = mv[i * E + j] + vv[j];
  auto out = Tensor::create({B, E}, std::move(data), any_grad({&mat, &vec}));
  tape.record(out, [mat, vec, out, B, E] {
    auto go = out->grad();
    if (mat->requires_grad()) {
      auto gm = mat->grad_mut();
      for (std::size_t i = 0; i < B * E; ++i) gm[i] += go[i];
    }
    if (vec->requires_grad()) {
      auto gv = vec->grad_mut();
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < E; ++j) gv[j] += go[i * E + j];
    }
  });
  return out;
}

TensorPtr gather_rows(Tape& tape, const TensorPtr& mat, std::vector<std::size_t> rows) {
  if (mat->shape().size() != 2) {
    throw DimensionError("gather_rows: expected a matrix, got shape " + shape_str(mat->shape()));
  }
  if (rows.empty()) throw ContractError("gather_rows: empty row selection");
  const std::size_t E = mat->cols();
  for (auto r : rows) {
    if (r >= mat->rows()) {
      throw ContractError("gather_rows: row " + std::to_string(r) + " out of range for " +
                          shape_str(mat->shape()));
    }
  }
  std::vector<double> data(rows.size() * E);
  auto mv = mat->values();
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < E; ++j) data[i * E + j] = mv[rows[i] * E + j];
  auto out = Tensor::create({rows.size(), E}, std::move(data), mat->requires_grad());
  tape.record(out, [mat, out, rows = std::move(rows), E] {
    if (!mat->requires_grad()) return;
    auto go = out->grad();
    auto gm = mat->grad_mut();
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < E; ++j) gm[rows[i] * E + j] += go[i * E + j];
  });
  return out;
}

TensorPtr scale(Tape& tape, const TensorPtr& x, double c) {
  const std::size_t n = x->numel();
  std::vector<double> data(n);
  auto xv = x->values();
  for (std::size_t i = 0; i < n; ++i) data[i] = c * xv[i];
  auto out = Tensor::create(x->shape(), std::move(data), x->requires_grad());
  tape.record(out, [x, out, n, c] {
    if (!x->requires_grad()) return;
    auto go = out->grad();
    auto gx = x->grad_mut();
    for (std::size_t i = 0; i < n; ++i) gx[i] += c * go[i];
  });
  return out;
}

}  // namespace dgua

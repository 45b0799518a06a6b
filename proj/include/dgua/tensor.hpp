#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dgua/error.hpp"

namespace dgua {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense 64-bit tensor, row-major flat storage. The gradient buffer is absent
// until a backward pass populates it; an empty buffer means "no gradient".
class Tensor {
 public:
  static TensorPtr create(Shape shape, std::vector<double> data, bool requires_grad = false);
  static TensorPtr zeros(Shape shape, bool requires_grad = false);
  static TensorPtr full(Shape shape, double value, bool requires_grad = false);
  static TensorPtr scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }
  bool is_scalar() const { return data_.size() == 1; }

  // 2-d accessors; throw DimensionError when the tensor is not a matrix.
  std::size_t rows() const;
  std::size_t cols() const;
  double at(std::size_t r, std::size_t c) const;

  std::span<const double> values() const { return data_; }
  std::span<double> values_mut() { return data_; }
  double item() const;

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool flag) { requires_grad_ = flag; }

  bool has_grad() const { return !grad_.empty(); }
  std::span<const double> grad() const;
  std::span<double> grad_mut();
  // Allocates a zero gradient buffer if absent.
  void ensure_grad();
  // Drops the gradient buffer entirely (back to "absent").
  void clear_grad();

  Tensor(Shape shape, std::vector<double> data, bool requires_grad);

 private:
  Shape shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
  bool requires_grad_;
};

// Define-by-run gradient tape. Records one node per operation in execution
// order; backward() replays them in exact reverse order. A tape is meant to
// live for a single forward/backward pass and is single-threaded.
class Tape {
 public:
  struct Node {
    TensorPtr output;
    std::function<void()> backprop;
  };

  std::size_t size() const { return nodes_.size(); }
  bool backward_called() const { return backward_done_; }
  void reset();

  // Seeds d(root)/d(root) = 1 and accumulates gradients into every reachable
  // tensor that requires them. root must be scalar; a second call without
  // reset() is an error.
  void backward(const TensorPtr& root);

  void record(TensorPtr output, std::function<void()> backprop);

 private:
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// --- recorded operations ---------------------------------------------------

// [B x D] . [D x E] -> [B x E]
TensorPtr matmul(Tape& tape, const TensorPtr& a, const TensorPtr& b);

// Elementwise binary ops; operands must have equal shapes, or one of them may
// be scalar (scalar-vs-tensor is the only supported broadcast).
TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(Tape& tape, const TensorPtr& a, const TensorPtr& b);

// Elementwise unary ops.
TensorPtr relu(Tape& tape, const TensorPtr& x);  // relu'(0) = 0
TensorPtr abs(Tape& tape, const TensorPtr& x);
TensorPtr log(Tape& tape, const TensorPtr& x);
TensorPtr exp(Tape& tape, const TensorPtr& x);

// Row-wise softmax / log-softmax with max subtraction. Requires >= 2 columns.
TensorPtr softmax_rows(Tape& tape, const TensorPtr& logits);
TensorPtr log_softmax_rows(Tape& tape, const TensorPtr& logits);

// Sum of all entries -> scalar.
TensorPtr sum(Tape& tape, const TensorPtr& x);

// [B x E] plus a length-E bias row added to every row.
TensorPtr add_rowvec(Tape& tape, const TensorPtr& mat, const TensorPtr& vec);

// Select rows of a matrix; backward scatter-adds into the source rows.
TensorPtr gather_rows(Tape& tape, const TensorPtr& mat, std::vector<std::size_t> rows);

// Multiply by a compile-time constant (not a differentiable operand).
TensorPtr scale(Tape& tape, const TensorPtr& x, double c);

}  // namespace dgua

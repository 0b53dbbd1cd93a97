#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tddmn/error.hpp"
#include "tddmn/rng.hpp"

namespace tddmn {

// Extents of a dense rank-1/2/3 array, row-major.
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense 64-bit tensor with an optional gradient slot. Copying a Tensor copies
// the handle, not the storage; parameters stay aliased across forward passes
// so their gradients accumulate in place.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->values.size(); }

  std::vector<double>& values() { return node_->values; }
  const std::vector<double>& values() const { return node_->values; }
  double* data() { return node_->values.data(); }
  const double* data() const { return node_->values.data(); }

  // Value of a single-element tensor.
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }

  bool has_grad() const { return !node_->grad.empty(); }
  // Allocates (zero-filled) on first touch.
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void ensure_grad() { grad(); }
  void zero_grad();
  void drop_grad() { node_->grad.clear(); }

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }
  bool all_finite() const;

 private:
  struct Node {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Node> node_;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
};

// Record of one forward pass. Operations append their backward rules while
// `recording()` is true; backward() replays them in reverse, exactly once.
// Rebuilt per forward pass (define-by-run), so sequence lengths may vary
// freely between documents.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t num_steps() const { return steps_.size(); }

  // Appends a backward rule. Public so test doubles can inject custom ops.
  void record(std::function<void()> backward_step) { steps_.push_back(std::move(backward_step)); }

  // Seeds d(loss)/d(loss) = 1 and replays all recorded rules in reverse.
  // loss must be a single-element tensor produced through this tape.
  void backward(Tensor loss);

 private:
  std::vector<std::function<void()>> steps_;
  bool recording_ = true;
  bool used_ = false;
};

namespace ops {

// a[m,k] * b[k,n] -> [m,n]. Rank-1 operands are treated as a row (lhs) or a
// column (rhs); the collapsed axis is dropped from the result.
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// Element-wise binary ops. Operands must have equal shapes, or one operand
// may be a scalar, or a row vector ([n] or [1,n]) broadcast over the other's
// rows. Backward sums gradients over broadcast axes.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);

Tensor abs(Tape& tape, const Tensor& a);
Tensor tanh(Tape& tape, const Tensor& a);
Tensor sigmoid(Tape& tape, const Tensor& a);
Tensor relu(Tape& tape, const Tensor& a);

// Row-wise stable softmax (max subtraction). Rank-1 input is one row.
Tensor softmax_rows(Tape& tape, const Tensor& a);

// Concatenation along `axis`. Rank-1 tensors concatenate along axis 0. All
// non-concatenated extents must match. Backward splits the gradient.
Tensor concat(Tape& tape, std::size_t axis, std::span<const Tensor> parts);
Tensor concat(Tape& tape, std::size_t axis, std::initializer_list<Tensor> parts);

// Same data, new extents (sizes must match).
Tensor reshape(Tape& tape, const Tensor& a, Shape shape);

// Gathers rows of a [V,D] table -> [n,D]. Backward scatter-adds into the
// table gradient (skipped entirely for frozen tables).
Tensor rows(Tape& tape, const Tensor& table, std::span<const int> indices);

// Row i of a matrix as a rank-1 vector.
Tensor row(Tape& tape, const Tensor& a, std::size_t i);

// Element i of a rank-1 vector as a scalar tensor.
Tensor pick(Tape& tape, const Tensor& a, std::size_t i);

// Repeats a vector [n] (or [1,n]) as m identical rows -> [m,n].
Tensor tile_rows(Tape& tape, const Tensor& v, std::size_t m);

// Stacks rank-1 vectors of equal length into a matrix [k,n].
Tensor stack_rows(Tape& tape, std::span<const Tensor> rows_in);

// Column-wise mean of [m,n] -> [n].
Tensor mean_rows(Tape& tape, const Tensor& a);

// Sum of all elements -> scalar.
Tensor sum(Tape& tape, const Tensor& a);

// a * c for a compile-time-known constant c.
Tensor scale(Tape& tape, const Tensor& a, double c);

// Inverted dropout: zeroes each element with probability rate and rescales
// the rest by 1/(1-rate). Deterministic given the generator state. Callers
// apply it in training mode only.
Tensor dropout(Tape& tape, const Tensor& a, double rate, Rng& rng);

// -sum over masked-in rows j of log p[j, labels[j]], for p of shape [n,O]
// whose rows are probability distributions.
Tensor masked_nll(Tape& tape, const Tensor& p, std::span<const int> labels,
                  std::span<const std::uint8_t> mask);

}  // namespace ops
}  // namespace tddmn

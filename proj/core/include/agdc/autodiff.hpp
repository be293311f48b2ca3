#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agdc/rng.hpp"

namespace agdc::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// A named trainable tensor with a gradient buffer of identical shape.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

/// Contiguous block of rows belonging to one sequence in a packed batch.
struct Segment {
  Index start = 0;
  Index length = 0;
};

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode automatic differentiation over dense row-major matrices.
///
/// Every op appends a node holding its value and, when any input needs a
/// gradient, a closure that pushes the output gradient into its inputs.
/// `backward` runs the closures in reverse order and accumulates leaf
/// gradients into the referenced Parameters. A tape is single-use.
class Tape {
 public:
  /// `dropout_rng` enables dropout; a null pointer makes dropout the identity.
  explicit Tape(Rng* dropout_rng = nullptr) : dropout_rng_(dropout_rng) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix m);
  /// Leaf whose gradient is added to `p.grad` by backward().
  Var param(Parameter& p);
  /// Read-only view of a parameter; no gradient, no copy.
  Var frozen(const Parameter& p);

  /// Fill gradients from a 1x1 loss node.
  void backward(Var loss);

  bool empty() const { return nodes_.empty(); }
  std::size_t size() const { return nodes_.size(); }
  Rng* dropout_rng() const { return dropout_rng_; }

  const Matrix& value(std::size_t id) const;
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  /// Gradient buffer of a node, zero-allocated on first touch.
  Matrix& grad(Var v);

  /// Receives the gradient of the node's output during backward().
  using Backward = std::function<void(const Matrix& out_grad)>;

  /// Record an op result. `back` runs only if `requires_grad` is set.
  Var push(Matrix value, bool requires_grad, Backward back = {});

 private:
  struct Node {
    Matrix owned;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    Backward back;
  };

  std::vector<Node> nodes_;
  Rng* dropout_rng_ = nullptr;
  bool consumed_ = false;
};

// --- linear algebra -------------------------------------------------------

Var matmul(Var a, Var b);
/// x * w + b (b is a 1 x out row broadcast over rows).
Var linear(Var x, Var w, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// a + row, row broadcast over every row of a.
Var add_row(Var a, Var row);
/// a * row elementwise, row broadcast over every row of a.
Var mul_row(Var a, Var row);

// --- nonlinearities -------------------------------------------------------

/// Exact GELU, x * Phi(x).
Var gelu(Var a);
Var silu(Var a);
Var exp(Var a);
Var square(Var a);
/// Zeroes entries with probability `rate` and rescales survivors; identity
/// when the tape has no dropout RNG.
Var dropout(Var a, double rate);

/// Row-wise layer normalization without affine terms.
Var layer_norm(Var a, double eps = 1e-5);
/// Row-wise log-softmax.
Var log_softmax_rows(Var a);

// --- shape ----------------------------------------------------------------

Var concat_cols(Var a, Var b);
Var slice_cols(Var a, Index start, Index count);
/// Output row r is a.row(idx[r]); gradients scatter-add back.
Var gather_rows(Var a, std::span<const Index> idx);
Var column(Var a, Index col);
/// a with `v` (rows x 1) added into column `col`.
Var add_to_column(Var a, Index col, Var v);

// --- reductions -----------------------------------------------------------

Var sum(Var a);
/// sum_r weight[r] * a(r, idx[r]).
Var pick_sum(Var a, std::span<const Index> idx, std::span<const double> weight);
/// sum_r weight[r] * ||a.row(r)||^2.
Var weighted_sum_squares(Var a, std::span<const double> weight);

// --- fused model ops ------------------------------------------------------

/// Multi-head causal self-attention. q, k, v are N x D with heads laid out
/// as contiguous column blocks; attention never crosses segment borders.
Var causal_attention(Var q, Var k, Var v, std::span<const Segment> segments, int heads);

/// For each segment of the column vector p (stop probabilities at steps
/// 1..T), sum_t t * p_t * prod_{i<t} (1 - p_i). Output is S x 1.
Var expected_length(Var p, std::span<const Segment> segments);

}  // namespace agdc::ad

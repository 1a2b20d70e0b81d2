#pragma once

// Reverse-mode differentiation over a small, fixed op vocabulary.
//
// A Tape records every op of one forward pass. Values live on the tape and
// are addressed through lightweight Var handles; calling backward() on a
// scalar walks the tape in reverse and accumulates gradients into every
// tracked leaf. Parameters bound with Tape::parameter() receive their
// gradients in Parameter::grad, summed over all uses.

#include "disamgnn/matrix.hpp"
#include "disamgnn/sparse.hpp"

#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace disamgnn::ad {

/// Raised when an op produces NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A trainable array together with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad = Matrix::Zero(value.rows(), value.cols()); }
};

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  /// Gradient after backward(); zeros when the node was not reached.
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;

  Tape* tape() const { return tape_; }
  std::size_t index() const { return index_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Tape-owned leaf that requires a gradient.
  Var input(Matrix value);
  /// Leaf bound to `p`; backward() adds this node's gradient into p.grad.
  Var parameter(Parameter& p);

  /// Appends an op result. `fn` receives d(loss)/d(output) and must push
  /// gradients to the parents through accumulate(). Throws NumericError if
  /// `value` is not finite.
  Var record(Matrix value, std::initializer_list<Var> parents, BackwardFn fn, const char* op);

  void accumulate(Var target, const Matrix& g);
  bool requires_grad(Var v) const { return nodes_[v.index()].requires_grad; }

  /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be 1x1.
  void backward(Var loss);

  const Matrix& value(std::size_t index) const { return nodes_[index].value; }
  const Matrix& grad(std::size_t index) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  mutable Matrix empty_grad_;
  bool backward_done_ = false;
};

// Tracked ops. All operands must live on the same tape.

Var matmul(Var a, Var b);
/// s * x, differentiable in x. The sparse operand is shared with the tape
/// until backward has run.
Var spmm(std::shared_ptr<const SparseMatrix> s, Var x);
Var relu(Var x);
Var add(Var a, Var b);
/// Adds a 1 x cols bias row to each row of x.
Var add_row(Var x, Var bias);
Var scale(Var x, double factor);
/// Multiplies x by a tracked 1x1 scalar.
Var scale_by(Var x, Var factor);
/// Each row divided by its L2 norm; zero rows pass through as zero.
Var row_l2_normalize(Var x);
Var concat_cols(Var a, Var b);
/// Inverted dropout. rate == 0 returns x itself.
Var dropout(Var x, double rate, Rng& rng);
Var sum(Var x);
/// Mean over `mask` of -log softmax(logits)[v, labels[v]].
Var masked_cross_entropy(Var logits, std::span<const ClassId> labels, std::span<const NodeId> mask);

/// One term weight * softplus(sign * <z_a, z_b>) of a pairwise objective.
struct SignedPair {
  NodeId a;
  NodeId b;
  double sign;
  double weight;
};
/// Sum of weight * softplus(sign * <z_a, z_b>) over `pairs`.
Var pair_softplus(Var z, std::vector<SignedPair> pairs);

// Untracked helpers.

/// ln(1 + e^x) in the form max(x, 0) + ln(1 + e^-|x|).
double softplus(double x);
double sigmoid(double x);
Matrix softmax_rows(const Matrix& x);
Matrix log_softmax_rows(const Matrix& x);

}  // namespace disamgnn::ad

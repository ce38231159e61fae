#ifndef PWNN_TAPE_HPP
#define PWNN_TAPE_HPP

// Reverse-mode accumulation over dense matrices.
//
// Every node on the tape holds a full Eigen matrix, so one recorded operation is
// a whole GEMM or a whole element-wise map over a batch of points. The per-node
// bookkeeping is negligible next to the arithmetic, which keeps the network and
// the weak-form assembly on the same tape without a scalar-level graph.

#include "pwnn/common.hpp"

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace pwnn {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
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

class Tape {
 public:
  /// Called once during backward() with the adjoint of the node's output.
  using Pullback = std::function<void(Tape&, const Matrix&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// A value that gradients never flow into.
  Var constant(Matrix value);
  /// A differentiable input; its adjoint survives backward() and is read with grad().
  Var leaf(Matrix value);
  /// Records the result of an operation. The pullback is dropped when no parent
  /// requires a gradient.
  Var record(Matrix value, std::span<const Var> parents, Pullback pullback);
  Var record(Matrix value, std::initializer_list<Var> parents, Pullback pullback) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(pullback));
  }

  const Matrix& value(const Var& v) const;
  bool requires_grad(const Var& v) const;

  /// Adds `adjoint` into the adjoint of `v`. Intended for use inside pullbacks.
  template <typename Derived>
  void accumulate(const Var& v, const Eigen::MatrixBase<Derived>& adjoint) {
    Node& node = nodes_[check(v)];
    if (!node.requires_grad) return;
    if (node.adjoint.size() == 0) {
      node.adjoint = adjoint;
    } else {
      node.adjoint += adjoint;
    }
  }

  void accumulate(const Var& v, Matrix&& adjoint) {
    Node& node = nodes_[check(v)];
    if (!node.requires_grad) return;
    if (node.adjoint.size() == 0) {
      node.adjoint = std::move(adjoint);
    } else {
      node.adjoint += adjoint;
    }
  }

  /// Runs the reverse sweep from a 1x1 node. A tape can be swept once; values of
  /// intermediate nodes are released as the sweep passes them.
  void backward(const Var& loss);
  bool consumed() const { return consumed_; }

  /// Adjoint of a leaf after backward(). Zero when the loss does not depend on it.
  Matrix grad(const Var& leaf) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix adjoint;
    Pullback pullback;
    bool requires_grad = false;
    bool is_leaf = false;
  };

  std::size_t check(const Var& v) const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

/// Convenience: a 1x1 matrix.
inline Matrix scalar_matrix(double x) { return Matrix::Constant(1, 1, x); }

namespace ad {

// Element-wise operations require equal shapes unless stated otherwise.

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator*(double s, const Var& a);
inline Var operator*(const Var& a, double s) { return s * a; }

/// a + c for a constant matrix c.
Var add(const Var& a, const Matrix& c);
Var add_scalar(const Var& a, double c);
/// Hadamard product.
Var cmul(const Var& a, const Var& b);
/// Hadamard product with a constant matrix.
Var cmul(const Var& a, const Matrix& c);
Var square(const Var& a);
Var cube(const Var& a);

/// Matrix product a * b.
Var matmul(const Var& a, const Var& b);

/// Sum of all entries (1x1).
Var sum(const Var& a);
/// Mean of all entries (1x1).
Var mean(const Var& a);
/// Column sums (1 x cols).
Var colsum(const Var& a);
/// Sums each run of `width` consecutive columns: rows x (cols / width).
Var segment_sum(const Var& a, Index width);
/// Columns [start, start + count).
Var cols(const Var& a, Index start, Index count);
/// Columns in the given order (repeats allowed).
Var gather_cols(const Var& a, const std::vector<Index>& indices);
/// [a_0 | a_1 | ...]; all parts need the same row count.
Var hcat(const std::vector<Var>& parts);

}  // namespace ad
}  // namespace pwnn

#endif  // PWNN_TAPE_HPP

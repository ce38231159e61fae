#include "pwnn/tape.hpp"

#include <algorithm>
#include <utility>

namespace pwnn {

const Matrix& Var::value() const {
  if (tape_ == nullptr) throw StateError("Var: empty handle");
  return tape_->value(*this);
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("Var::scalar: node is " + shape_str(v.rows(), v.cols()));
  }
  return v(0, 0);
}

std::size_t Tape::check(const Var& v) const {
  if (v.tape_ != this) throw StateError("Tape: variable belongs to a different tape");
  if (v.id_ >= nodes_.size()) throw StateError("Tape: dangling variable");
  return v.id_;
}

Var Tape::constant(Matrix value) {
  if (consumed_) throw StateError("Tape: cannot record after backward()");
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, false, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Matrix value) {
  if (consumed_) throw StateError("Tape: cannot record after backward()");
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, true, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::span<const Var> parents, Pullback pullback) {
  if (consumed_) throw StateError("Tape: cannot record after backward()");
  bool needs = false;
  for (const Var& p : parents) needs = needs || nodes_[check(p)].requires_grad;
  nodes_.push_back(Node{std::move(value), Matrix(), needs ? std::move(pullback) : nullptr, needs, false});
  return Var(this, nodes_.size() - 1);
}

const Matrix& Tape::value(const Var& v) const { return nodes_[check(v)].value; }

bool Tape::requires_grad(const Var& v) const { return nodes_[check(v)].requires_grad; }

void Tape::backward(const Var& loss) {
  const std::size_t root = check(loss);
  if (consumed_) throw StateError("Tape: backward() already ran on this tape");
  const Matrix& v = nodes_[root].value;
  if (v.rows() != 1 || v.cols() != 1) {
    throw ContractError("Tape::backward: loss must be 1x1, got " + shape_str(v.rows(), v.cols()));
  }
  consumed_ = true;
  if (!nodes_[root].requires_grad) return;
  nodes_[root].adjoint = Matrix::Ones(1, 1);

  for (std::size_t i = root + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.pullback && node.adjoint.size() != 0) {
      Matrix adjoint = std::move(node.adjoint);
      node.pullback(*this, adjoint);
    }
    if (!node.is_leaf) {
      node.pullback = nullptr;
      node.adjoint.resize(0, 0);
      if (i != root) node.value.resize(0, 0);
    }
  }
}

Matrix Tape::grad(const Var& leaf) const {
  const Node& node = nodes_[check(leaf)];
  if (!node.is_leaf) throw ContractError("Tape::grad: node is not a leaf");
  if (!consumed_) throw StateError("Tape::grad: backward() has not run");
  if (node.adjoint.size() == 0) return Matrix::Zero(node.value.rows(), node.value.cols());
  return node.adjoint;
}

namespace ad {
namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": " + shape_str(a.rows(), a.cols()) + " vs " +
                     shape_str(b.rows(), b.cols()));
  }
}

void require_same_shape(const Var& a, const Matrix& c, const char* op) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) {
    throw ShapeError(std::string(op) + ": " + shape_str(a.rows(), a.cols()) + " vs constant " +
                     shape_str(c.rows(), c.cols()));
  }
}

}  // namespace

Var operator+(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tape& t = *a.tape();
  return t.record(a.value() + b.value(), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g);
    tape.accumulate(b, g);
  });
}

Var operator-(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tape& t = *a.tape();
  return t.record(a.value() - b.value(), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g);
    tape.accumulate(b, -g);
  });
}

Var operator-(const Var& a) {
  Tape& t = *a.tape();
  return t.record(-a.value(), {a}, [a](Tape& tape, const Matrix& g) { tape.accumulate(a, -g); });
}

Var operator*(double s, const Var& a) {
  Tape& t = *a.tape();
  return t.record(s * a.value(), {a}, [a, s](Tape& tape, const Matrix& g) { tape.accumulate(a, s * g); });
}

Var add(const Var& a, const Matrix& c) {
  require_same_shape(a, c, "add");
  Tape& t = *a.tape();
  return t.record(a.value() + c, {a}, [a](Tape& tape, const Matrix& g) { tape.accumulate(a, g); });
}

Var add_scalar(const Var& a, double c) {
  Tape& t = *a.tape();
  return t.record((a.value().array() + c).matrix(), {a},
                  [a](Tape& tape, const Matrix& g) { tape.accumulate(a, g); });
}

Var cmul(const Var& a, const Var& b) {
  require_same_shape(a, b, "cmul");
  Tape& t = *a.tape();
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    if (tape.requires_grad(a)) tape.accumulate(a, g.cwiseProduct(b.value()));
    if (tape.requires_grad(b)) tape.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var cmul(const Var& a, const Matrix& c) {
  require_same_shape(a, c, "cmul");
  Tape& t = *a.tape();
  return t.record(a.value().cwiseProduct(c), {a},
                  [a, c](Tape& tape, const Matrix& g) { tape.accumulate(a, g.cwiseProduct(c)); });
}

Var square(const Var& a) {
  Tape& t = *a.tape();
  return t.record(a.value().array().square().matrix(), {a}, [a](Tape& tape, const Matrix& g) {
    tape.accumulate(a, (2.0 * g.array() * a.value().array()).matrix());
  });
}

Var cube(const Var& a) {
  Tape& t = *a.tape();
  return t.record(a.value().array().cube().matrix(), {a}, [a](Tape& tape, const Matrix& g) {
    tape.accumulate(a, (3.0 * g.array() * a.value().array().square()).matrix());
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a.rows(), a.cols()) + " * " + shape_str(b.rows(), b.cols()));
  }
  Tape& t = *a.tape();
  Matrix out = a.value() * b.value();
  return t.record(std::move(out), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    if (tape.requires_grad(a)) tape.accumulate(a, g * b.value().transpose());
    if (tape.requires_grad(b)) tape.accumulate(b, a.value().transpose() * g);
  });
}

Var sum(const Var& a) {
  Tape& t = *a.tape();
  const Index r = a.rows(), c = a.cols();
  return t.record(scalar_matrix(a.value().sum()), {a}, [a, r, c](Tape& tape, const Matrix& g) {
    tape.accumulate(a, Matrix::Constant(r, c, g(0, 0)));
  });
}

Var mean(const Var& a) {
  const Index n = a.rows() * a.cols();
  if (n == 0) throw ShapeError("mean: empty matrix");
  return (1.0 / static_cast<double>(n)) * sum(a);
}

Var colsum(const Var& a) {
  Tape& t = *a.tape();
  const Index r = a.rows();
  return t.record(a.value().colwise().sum(), {a}, [a, r](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g.replicate(r, 1));
  });
}

Var segment_sum(const Var& a, Index width) {
  if (width <= 0 || a.cols() % width != 0) {
    throw ShapeError("segment_sum: " + std::to_string(a.cols()) + " columns not divisible by " +
                     std::to_string(width));
  }
  Tape& t = *a.tape();
  const Index groups = a.cols() / width;
  Matrix out(a.rows(), groups);
  const Matrix& v = a.value();
  for (Index i = 0; i < groups; ++i) out.col(i) = v.middleCols(i * width, width).rowwise().sum();
  return t.record(std::move(out), {a}, [a, width, groups](Tape& tape, const Matrix& g) {
    Matrix adj(g.rows(), groups * width);
    for (Index i = 0; i < groups; ++i) adj.middleCols(i * width, width) = g.col(i).replicate(1, width);
    tape.accumulate(a, adj);
  });
}

Var cols(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw ShapeError("cols: range [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") outside " + std::to_string(a.cols()) + " columns");
  }
  Tape& t = *a.tape();
  const Index r = a.rows(), c = a.cols();
  return t.record(a.value().middleCols(start, count), {a}, [a, start, count, r, c](Tape& tape, const Matrix& g) {
    Matrix adj = Matrix::Zero(r, c);
    adj.middleCols(start, count) = g;
    tape.accumulate(a, adj);
  });
}

Var gather_cols(const Var& a, const std::vector<Index>& indices) {
  const Matrix& v = a.value();
  Matrix out(v.rows(), static_cast<Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Index j = indices[k];
    if (j < 0 || j >= v.cols()) throw ShapeError("gather_cols: index " + std::to_string(j) + " out of range");
    out.col(static_cast<Index>(k)) = v.col(j);
  }
  Tape& t = *a.tape();
  const Index r = v.rows(), c = v.cols();
  return t.record(std::move(out), {a}, [a, indices, r, c](Tape& tape, const Matrix& g) {
    Matrix adj = Matrix::Zero(r, c);
    for (std::size_t k = 0; k < indices.size(); ++k) adj.col(indices[k]) += g.col(static_cast<Index>(k));
    tape.accumulate(a, adj);
  });
}

Var hcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("hcat: no parts");
  Tape& t = *parts.front().tape();
  const Index r = parts.front().rows();
  Index total = 0;
  for (const Var& p : parts) {
    if (p.rows() != r) throw ShapeError("hcat: row mismatch");
    total += p.cols();
  }
  Matrix out(r, total);
  std::vector<Index> offsets;
  Index at = 0;
  for (const Var& p : parts) {
    offsets.push_back(at);
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return t.record(std::move(out), parts, [parts, offsets](Tape& tape, const Matrix& g) {
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (tape.requires_grad(parts[k])) tape.accumulate(parts[k], g.middleCols(offsets[k], parts[k].cols()));
    }
  });
}

}  // namespace ad
}  // namespace pwnn

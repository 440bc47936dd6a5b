#pragma once

// Minimal reverse-mode automatic differentiation over dense matrices.
//
// A Tape records every operation as a node holding its forward value and a
// closure that pushes the node's gradient into its inputs. Parameters enter
// as leaves that reference caller-owned storage and, on backward, add their
// gradient into a caller-owned sink.

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "evolmpnn/matrix.hpp"

namespace evolmpnn::ad {

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  /// Receives the node's gradient and its forward output.
  using BackwardFn = std::function<void(Tape&, const Matrix& grad, const Matrix& out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf referencing `value` (must outlive the tape). A null sink makes it a constant.
  Var parameter(const Matrix& value, Matrix* grad_sink);
  Var record(Matrix value, bool requires_grad, BackwardFn backward);

  const Matrix& value(int id) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  bool requires_grad(const Var& v) const { return requires_grad(v.id()); }

  /// Gradient buffer of a node, zero-initialised on first access.
  Matrix& grad(int id);
  void accumulate(int id, const Matrix& g);

  /// Reverse sweep from `root` seeded with `seed` (same shape as root).
  void backward(const Var& root, const Matrix& seed);
  /// Reverse sweep from a 1x1 root seeded with 1.
  void backward(const Var& scalar_root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix own;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
};

/// Row-sparse constant matrix used by graph aggregation.
struct SparseRows {
  std::size_t cols = 0;
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
};

Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scale(const Var& a, double s);

// Broadcast a 1 x c row over every row of a.
Var add_row(const Var& a, const Var& row);
Var sub_row(const Var& a, const Var& row);
Var mul_row(const Var& a, const Var& row);

// Multiply row i of a by the constant weights[i].
Var scale_rows(const Var& a, std::span<const double> weights);

Var softmax_rows(const Var& a);
Var elu(const Var& a);
Var sigmoid(const Var& a);
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

Var mean_rows(const Var& a);  // 1 x c
Var concat_cols(const Var& a, const Var& b);
Var stack_rows(std::span<const Var> rows);
Var gather_rows(const Var& table, std::span<const std::size_t> indices);
// Row j is the mean of a's rows listed in groups[j]; an empty group yields zeros.
Var group_mean(const Var& a, const std::vector<std::vector<std::size_t>>& groups);
Var sparse_matmul(const SparseRows& s, const Var& x);

/// Mean squared error over the listed rows of pred, against target rows at the same index.
Var mse(const Var& pred, const Matrix& target, std::span<const std::size_t> rows);

}  // namespace evolmpnn::ad

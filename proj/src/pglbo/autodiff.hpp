/*
 * Copyright 2026 The pglbo Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef PGLBO_AUTODIFF_HPP
#define PGLBO_AUTODIFF_HPP

#include <functional>
#include <vector>

#include "pglbo/numcore.hpp"

namespace pglbo {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

struct DiffNode {
  Matrix value;
  Matrix grad;  // same shape as value; populated by Tape::backward
  std::vector<int> inputs;
  std::function<void(Tape&, int)> backward;
  bool requires_grad = false;
};

/// Single-threaded reverse-mode gradient tape. Nodes are appended in
/// evaluation order, so reverse creation order is a valid topological order.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  /// Leaf whose gradient is wanted.
  Var variable(Matrix value);
  /// Leaf excluded from differentiation.
  Var constant(Matrix value);
  /// Interior node; backward receives the tape and this node's id and should
  /// call accumulate() for each input.
  Var record(Matrix value, const std::vector<Var>& inputs, BackwardFn backward);

  /// Seeds d(root)/d(root) = 1 for a 1x1 root and propagates.
  void backward(const Var& root);

  const DiffNode& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  const Matrix& value(int id) const { return node(id).value; }
  const Matrix& grad(int id) const { return node(id).grad; }
  bool requires_grad(int id) const { return node(id).requires_grad; }
  void accumulate(int id, const Matrix& g);

  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<DiffNode> nodes_;
  bool backward_done_ = false;
};

namespace ad {

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
/// a (r x c) plus a 1 x c row broadcast over rows.
Var add_row(const Var& a, const Var& row);
/// a (r x c) with row i multiplied by col(i, 0); col is r x 1.
Var mul_col(const Var& a, const Var& col);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
/// Elementwise clamp; gradient passes only where lo < a < hi.
Var clamp(const Var& a, double lo, double hi);
Var sum(const Var& a);      // 1 x 1
Var row_sum(const Var& a);  // r x 1
Var cols(const Var& a, Eigen::Index start, Eigen::Index count);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(double c, const Var& a) { return scale(a, c); }

}  // namespace ad

/// Tape-driven variant of grad_check: `build` maps parameter leaves to a 1x1
/// loss on a fresh tape. Analytic gradients come from Tape::backward.
double grad_check(const std::function<Var(Tape&, const std::vector<Var>&)>& build,
                  const std::vector<Matrix>& params, double eps);

}  // namespace pglbo

#endif  // PGLBO_AUTODIFF_HPP

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

#include "pglbo/autodiff.hpp"

#include <cmath>

namespace pglbo {

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

double Var::scalar() const {
  require(rows() == 1 && cols() == 1, ErrorCode::Shape, "Var::scalar: not 1x1");
  return value()(0, 0);
}

Var Tape::variable(Matrix value) {
  DiffNode n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Matrix value) {
  DiffNode n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Matrix value, const std::vector<Var>& inputs, BackwardFn backward) {
  DiffNode n;
  n.value = std::move(value);
  for (const Var& v : inputs) {
    require(v.tape() == this, ErrorCode::State, "Tape::record: input from another tape");
    n.inputs.push_back(v.id());
    n.requires_grad = n.requires_grad || requires_grad(v.id());
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::accumulate(int id, const Matrix& g) {
  DiffNode& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad) return;
  require(g.rows() == n.value.rows() && g.cols() == n.value.cols(), ErrorCode::Shape,
          "Tape::accumulate: gradient shape mismatch");
  n.grad += g;
}

void Tape::backward(const Var& root) {
  require(root.tape() == this, ErrorCode::State, "Tape::backward: root from another tape");
  require(!backward_done_, ErrorCode::State, "Tape::backward: already run");
  require(root.rows() == 1 && root.cols() == 1, ErrorCode::Shape, "Tape::backward: root not scalar");
  for (auto& n : nodes_) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  nodes_[static_cast<std::size_t>(root.id())].grad(0, 0) = 1.0;
  for (int i = root.id(); i >= 0; --i) {
    const DiffNode& n = nodes_[static_cast<std::size_t>(i)];
    if (n.backward) n.backward(*this, i);
  }
  backward_done_ = true;
}

namespace ad {
namespace {

Tape& tape_of(const Var& a) {
  require(a.tape() != nullptr, ErrorCode::State, "autodiff: uninitialized Var");
  return *a.tape();
}

void same_shape(const Var& a, const Var& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::Shape,
          std::string("autodiff ") + op + ": shape mismatch");
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), ErrorCode::Shape, "autodiff matmul: inner dimension mismatch");
  const int ia = a.id(), ib = b.id();
  return tape_of(a).record(a.value() * b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

Var add(const Var& a, const Var& b) {
  same_shape(a, b, "add");
  const int ia = a.id(), ib = b.id();
  return tape_of(a).record(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

Var sub(const Var& a, const Var& b) {
  same_shape(a, b, "sub");
  const int ia = a.id(), ib = b.id();
  return tape_of(a).record(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.grad(self));
    if (t.requires_grad(ib)) t.accumulate(ib, -t.grad(self));
  });
}

Var mul(const Var& a, const Var& b) {
  same_shape(a, b, "mul");
  const int ia = a.id(), ib = b.id();
  return tape_of(a).record(a.value().cwiseProduct(b.value()), {a, b},
                           [ia, ib](Tape& t, int self) {
                             const Matrix& g = t.grad(self);
                             if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
                             if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
                           });
}

Var scale(const Var& a, double c) {
  const int ia = a.id();
  return tape_of(a).record(c * a.value(), {a},
                           [ia, c](Tape& t, int self) { t.accumulate(ia, c * t.grad(self)); });
}

Var add_scalar(const Var& a, double c) {
  const int ia = a.id();
  Matrix v = a.value().array() + c;
  return tape_of(a).record(std::move(v), {a},
                           [ia](Tape& t, int self) { t.accumulate(ia, t.grad(self)); });
}

Var add_row(const Var& a, const Var& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), ErrorCode::Shape,
          "autodiff add_row: row shape mismatch");
  const int ia = a.id(), ir = row.id();
  Matrix v = a.value().rowwise() + row.value().row(0);
  return tape_of(a).record(std::move(v), {a, row}, [ia, ir](Tape& t, int self) {
    t.accumulate(ia, t.grad(self));
    if (t.requires_grad(ir)) t.accumulate(ir, t.grad(self).colwise().sum());
  });
}

Var mul_col(const Var& a, const Var& col) {
  require(col.cols() == 1 && col.rows() == a.rows(), ErrorCode::Shape,
          "autodiff mul_col: column shape mismatch");
  const int ia = a.id(), ic = col.id();
  Matrix v = a.value().array().colwise() * col.value().col(0).array();
  return tape_of(a).record(std::move(v), {a, col}, [ia, ic](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) {
      Matrix ga = g.array().colwise() * t.value(ic).col(0).array();
      t.accumulate(ia, ga);
    }
    if (t.requires_grad(ic)) {
      Matrix gc = g.cwiseProduct(t.value(ia)).rowwise().sum();
      t.accumulate(ic, gc);
    }
  });
}

Var tanh(const Var& a) {
  const int ia = a.id();
  Matrix v = a.value().array().tanh();
  return tape_of(a).record(std::move(v), {a}, [ia](Tape& t, int self) {
    const Matrix& y = t.value(self);
    Matrix g = t.grad(self).array() * (1.0 - y.array().square());
    t.accumulate(ia, g);
  });
}

Var sigmoid(const Var& a) {
  const int ia = a.id();
  Matrix v = a.value().unaryExpr([](double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  return tape_of(a).record(std::move(v), {a}, [ia](Tape& t, int self) {
    const Matrix& y = t.value(self);
    Matrix g = t.grad(self).array() * y.array() * (1.0 - y.array());
    t.accumulate(ia, g);
  });
}

Var exp(const Var& a) {
  const int ia = a.id();
  Matrix v = a.value().array().exp();
  return tape_of(a).record(std::move(v), {a}, [ia](Tape& t, int self) {
    t.accumulate(ia, t.grad(self).cwiseProduct(t.value(self)));
  });
}

Var log(const Var& a) {
  const int ia = a.id();
  Matrix v = a.value().array().log();
  return tape_of(a).record(std::move(v), {a}, [ia](Tape& t, int self) {
    t.accumulate(ia, t.grad(self).cwiseQuotient(t.value(ia)));
  });
}

Var square(const Var& a) {
  const int ia = a.id();
  Matrix v = a.value().array().square();
  return tape_of(a).record(std::move(v), {a}, [ia](Tape& t, int self) {
    t.accumulate(ia, 2.0 * t.grad(self).cwiseProduct(t.value(ia)));
  });
}

Var clamp(const Var& a, double lo, double hi) {
  const int ia = a.id();
  Matrix v = a.value().cwiseMax(lo).cwiseMin(hi);
  return tape_of(a).record(std::move(v), {a}, [ia, lo, hi](Tape& t, int self) {
    const Matrix& x = t.value(ia);
    Matrix g = t.grad(self);
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < g.cols(); ++j)
        if (!(x(i, j) > lo && x(i, j) < hi)) g(i, j) = 0.0;
    t.accumulate(ia, g);
  });
}

Var sum(const Var& a) {
  const int ia = a.id();
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return tape_of(a).record(std::move(v), {a}, [ia](Tape& t, int self) {
    const Matrix& x = t.value(ia);
    t.accumulate(ia, Matrix::Constant(x.rows(), x.cols(), t.grad(self)(0, 0)));
  });
}

Var row_sum(const Var& a) {
  const int ia = a.id();
  Matrix v = a.value().rowwise().sum();
  return tape_of(a).record(std::move(v), {a}, [ia](Tape& t, int self) {
    const Matrix& x = t.value(ia);
    Matrix g = t.grad(self).col(0).replicate(1, x.cols());
    t.accumulate(ia, g);
  });
}

Var cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), ErrorCode::Shape,
          "autodiff cols: range out of bounds");
  const int ia = a.id();
  Matrix v = a.value().middleCols(start, count);
  return tape_of(a).record(std::move(v), {a}, [ia, start, count](Tape& t, int self) {
    const Matrix& x = t.value(ia);
    Matrix g = Matrix::Zero(x.rows(), x.cols());
    g.middleCols(start, count) = t.grad(self);
    t.accumulate(ia, g);
  });
}

}  // namespace ad

double grad_check(const std::function<Var(Tape&, const std::vector<Var>&)>& build,
                  const std::vector<Matrix>& params, double eps) {
  std::vector<Matrix> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& p : params) leaves.push_back(tape.variable(p));
    Var loss = build(tape, leaves);
    tape.backward(loss);
    for (const auto& v : leaves) analytic.push_back(v.grad());
  }
  LossFn value = [&build](const std::vector<Matrix>& ps) {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& p : ps) leaves.push_back(tape.variable(p));
    return build(tape, leaves).scalar();
  };
  return grad_check(value, params, analytic, eps);
}

}  // namespace pglbo

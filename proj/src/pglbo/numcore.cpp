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

#include "pglbo/numcore.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace pglbo {

bool all_finite(const Matrix& m) { return m.allFinite(); }
bool all_finite(const Vector& v) { return v.allFinite(); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n) {
  require(n > 0, ErrorCode::InvalidArgument, "Rng::index: empty range");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

std::size_t Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    require(w >= 0.0 && std::isfinite(w), ErrorCode::InvalidArgument,
            "Rng::categorical: weights must be finite and nonnegative");
    total += w;
  }
  require(total > 0.0, ErrorCode::InvalidArgument, "Rng::categorical: zero total weight");
  const double u = uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  // Roundoff: return the last index with positive weight.
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return i;
  return weights.size() - 1;
}

Matrix Rng::normal_matrix(Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal();
  return m;
}

void Rng::shuffle(std::vector<std::size_t>& idx) {
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[index(i)]);
}

Rng Rng::substream(std::uint64_t id) const {
  return Rng(splitmix64(seed_ ^ splitmix64(id + 0x632be59bd9b4e019ULL)));
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

Rng Rng::from_state(std::uint64_t seed, const std::string& state) {
  Rng r(seed);
  std::istringstream is(state);
  is >> r.engine_;
  require(!is.fail(), ErrorCode::Io, "Rng::from_state: malformed engine state");
  return r;
}

namespace {

// Unblocked factorization used to locate the failing pivot.
long first_bad_pivot(const Matrix& a) {
  const Eigen::Index n = a.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) return static_cast<long>(j);
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return -1;
}

bool try_llt(const Matrix& a, Matrix& lower) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return false;
  lower = llt.matrixL();
  // LLT can "succeed" with a non-finite factor on badly scaled input.
  return lower.allFinite() && (lower.diagonal().array() > 0.0).all();
}

}  // namespace

Matrix cholesky(const Matrix& a) {
  require(a.rows() == a.cols(), ErrorCode::Shape, "cholesky: matrix not square");
  Matrix lower;
  if (try_llt(a, lower)) return lower;
  long pivot = first_bad_pivot(a);
  if (pivot < 0) pivot = static_cast<long>(a.rows()) - 1;
  throw DecompositionError(pivot, "cholesky: matrix not positive definite (pivot " +
                                      std::to_string(pivot) + ")");
}

CholeskyFactor cholesky_jittered(const Matrix& a) {
  require(a.rows() == a.cols(), ErrorCode::Shape, "cholesky: matrix not square");
  CholeskyFactor f;
  if (try_llt(a, f.lower)) return f;
  for (double jitter = 1e-10; jitter <= 1e-4 * 1.0000001; jitter *= 10.0) {
    Matrix aj = a;
    aj.diagonal().array() += jitter;
    if (try_llt(aj, f.lower)) {
      f.jitter = jitter;
      return f;
    }
  }
  Matrix aj = a;
  aj.diagonal().array() += 1e-4;
  long pivot = first_bad_pivot(aj);
  if (pivot < 0) pivot = static_cast<long>(a.rows()) - 1;
  throw DecompositionError(pivot, "cholesky: not positive definite after jitter 1e-4 (pivot " +
                                      std::to_string(pivot) + ")");
}

Matrix solve_with_factor(const Matrix& lower, const Matrix& b) {
  Matrix y = lower.triangularView<Eigen::Lower>().solve(b);
  return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

Vector solve_with_factor(const Matrix& lower, const Vector& b) {
  Vector y = lower.triangularView<Eigen::Lower>().solve(b);
  return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix cholesky_solve(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), ErrorCode::Shape, "cholesky_solve: row mismatch");
  require((a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, a.cwiseAbs().maxCoeff()),
          ErrorCode::InvalidArgument, "cholesky_solve: matrix not symmetric");
  return solve_with_factor(cholesky(a), b);
}

double log_det_from_factor(const Matrix& lower) {
  return 2.0 * lower.diagonal().array().log().sum();
}

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(std::vector<Matrix>& params, const std::vector<Matrix>& grads) {
  require(params.size() == grads.size(), ErrorCode::Shape, "Adam: gradient count mismatch");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Matrix::Zero(p.rows(), p.cols()));
      v_.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseProduct(grads[i]);
    params[i].array() -=
        lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

double grad_check(const LossFn& loss, const std::vector<Matrix>& params,
                  const std::vector<Matrix>& analytic, double eps) {
  require(eps > 0.0, ErrorCode::InvalidArgument, "grad_check: eps must be positive");
  require(params.size() == analytic.size(), ErrorCode::Shape, "grad_check: gradient count mismatch");
  std::vector<Matrix> p = params;
  double worst = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    require(analytic[k].rows() == p[k].rows() && analytic[k].cols() == p[k].cols(),
            ErrorCode::Shape, "grad_check: gradient shape mismatch");
    for (Eigen::Index i = 0; i < p[k].rows(); ++i) {
      for (Eigen::Index j = 0; j < p[k].cols(); ++j) {
        const double orig = p[k](i, j);
        p[k](i, j) = orig + eps;
        const double up = loss(p);
        p[k](i, j) = orig - eps;
        const double down = loss(p);
        p[k](i, j) = orig;
        if (!std::isfinite(up) || !std::isfinite(down))
          fail(ErrorCode::Evaluation, "grad_check: non-finite loss at perturbed point");
        const double fd = (up - down) / (2.0 * eps);
        const double an = analytic[k](i, j);
        const double denom = std::max({std::abs(an), std::abs(fd), 1e-12});
        worst = std::max(worst, std::abs(an - fd) / denom);
      }
    }
  }
  return worst;
}

}  // namespace pglbo

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

#ifndef PGLBO_NUMCORE_HPP
#define PGLBO_NUMCORE_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pglbo/error.hpp"

namespace pglbo {

/// Row-major dense matrix. Rows index data points throughout the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

bool all_finite(const Matrix& m);
bool all_finite(const Vector& v);

/// Seeded pseudo-random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Uniform and normal variates are derived here rather than through
/// std:: distributions, whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller (one variate per call, no caching).
  double normal();
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  /// Draw an index with probability proportional to weights.
  std::size_t categorical(std::span<const double> weights);

  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols);
  void shuffle(std::vector<std::size_t>& idx);

  /// Independent stream derived from this stream's seed and an id; does not
  /// depend on (or advance) the current position.
  Rng substream(std::uint64_t id) const;

  /// Serialized engine position (portable text).
  std::string state() const;
  static Rng from_state(std::uint64_t seed, const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.seed_ == b.seed_ && a.engine_ == b.engine_;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

struct CholeskyFactor {
  Matrix lower;
  double jitter = 0.0;  // diagonal term added to make the factorization succeed
};

/// Plain Cholesky; throws DecompositionError naming the failing pivot.
Matrix cholesky(const Matrix& a);

/// Cholesky with jitter escalation: tries 0, then 1e-10, 1e-9, ..., 1e-4 on
/// the diagonal before failing.
CholeskyFactor cholesky_jittered(const Matrix& a);

/// Solve A X = B for symmetric positive-definite A.
Matrix cholesky_solve(const Matrix& a, const Matrix& b);

/// Solve (L L^T) X = B given the lower factor.
Matrix solve_with_factor(const Matrix& lower, const Matrix& b);
Vector solve_with_factor(const Matrix& lower, const Vector& b);

double log_det_from_factor(const Matrix& lower);

/// Adaptive-moment optimizer over a list of parameter matrices.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(std::vector<Matrix>& params, const std::vector<Matrix>& grads);
  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

using LossFn = std::function<double(const std::vector<Matrix>&)>;

/// Compare analytic gradients against central finite differences.
/// Returns max over all entries of |analytic - fd| / max(|analytic|, |fd|, 1e-12).
double grad_check(const LossFn& loss, const std::vector<Matrix>& params,
                  const std::vector<Matrix>& analytic, double eps);

}  // namespace pglbo

#endif  // PGLBO_NUMCORE_HPP

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

#ifndef PGLBO_TASKS_HPP
#define PGLBO_TASKS_HPP

#include <functional>
#include <optional>
#include <string>

#include "pglbo/numcore.hpp"
#include "pglbo/vae.hpp"

namespace pglbo::tasks {

/// Outcome of one objective call. ok = false means the evaluation failed and
/// the point is dropped; a note marks a scored but unusual evaluation.
struct EvalResult {
  double value = 0.0;
  bool ok = true;
  std::string note;
};

/// Black-box problem over flat input vectors.
struct Task {
  std::string name;
  std::size_t input_dim = 0;
  bool maximize = true;
  vae::Likelihood likelihood = vae::Likelihood::Bernoulli;
  /// Deterministic objective.
  std::function<EvalResult(const Vector&)> evaluate;
  /// Maps a decoder output to a valid input. Idempotent on valid inputs.
  std::function<Vector(const Vector&)> codec;
  /// Draws n inputs (rows) for the unlabeled pool or the initial labeled set.
  std::function<Matrix(std::size_t, Rng&)> generate;
  /// Known optimal value, when there is one.
  std::optional<double> optimum;
};

inline constexpr int kGrid = 16;

/// x . t / (|x| |t|). Throws Evaluation on a zero vector.
double topology_objective(const Vector& image, const Vector& target);

/// The fixed 16 x 16 cross-shaped target (row-major, values in {0, 1}).
Vector topology_target();

/// Random filled rectangles and ellipses (1 to 3 per image), row-major.
Matrix generate_unlabeled_topology(std::size_t n, Rng& rng);

/// Thresholds at 0.5.
Vector binarize(const Vector& probs);

Task topology_task();

inline constexpr std::size_t kSynthDim = 4;
inline constexpr double kSynthRange = 3.0;  // unlabeled pool is U(-range, range)^d
/// Hidden optimum of the synthetic task.
Vector synth_optimum();
/// f(x) = -|x - x*|^2 over continuous inputs with the identity codec.
Task synth_oracle_task();

/// "topology" or "synthetic".
Task make_task(const std::string& name);

}  // namespace pglbo::tasks

#endif  // PGLBO_TASKS_HPP

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

#ifndef PGLBO_WEIGHTING_HPP
#define PGLBO_WEIGHTING_HPP

#include <cstddef>
#include <limits>
#include <vector>

#include "pglbo/numcore.hpp"

namespace pglbo::weighting {

/// Rank-smoothing parameter k. `infinity()` selects exact uniform weights.
struct WeightConfig {
  double k = 1e-3;

  static WeightConfig infinity() { return {std::numeric_limits<double>::infinity()}; }
  bool is_infinite() const { return k == std::numeric_limits<double>::infinity(); }
};

/// rank(x) = number of points with a strictly better score. Ties share a rank.
std::vector<std::size_t> ranks(const Vector& scores, bool maximize = true);

/// Normalized weights proportional to 1 / (k N + rank).
///
/// k = infinity gives 1/N exactly. k = 0 puts all mass on rank-0 points,
/// split evenly among ties.
Vector rank_weights(const Vector& scores, const WeightConfig& cfg, bool maximize = true);

}  // namespace pglbo::weighting

#endif  // PGLBO_WEIGHTING_HPP

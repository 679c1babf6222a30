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

#ifndef PGLBO_CMAES_HPP
#define PGLBO_CMAES_HPP

#include <functional>

#include "pglbo/numcore.hpp"

namespace pglbo::cmaes {

/// (mu/mu_w, lambda) CMA-ES with cumulative step-size adaptation and
/// rank-one plus rank-mu covariance updates. Maximizes.
struct CmaesState {
  Vector mean;
  double sigma = 0.0;
  Matrix covariance;
  std::size_t population = 0;
  std::size_t generation = 0;
  Vector path_sigma;
  Vector path_c;

  Eigen::Index dim() const { return mean.size(); }
  void validate() const;
};

/// Default population 4 + floor(3 ln d).
std::size_t default_population(Eigen::Index dim);

/// population == 0 selects the default.
CmaesState init(const Vector& mean, double sigma0, std::size_t population = 0);

/// Draws one generation (population x d).
Matrix ask(const CmaesState& state, Rng& rng);

/// Updates the state from a generation and its fitness values (higher is better).
void tell(CmaesState& state, const Matrix& samples, const Vector& fitness);

using Objective = std::function<Vector(const Matrix&)>;

struct Trajectory {
  Matrix samples;              // every generated point, generation-major
  std::vector<Vector> means;   // mean before each generation and after the last
  CmaesState final_state;
};

/// Runs `iters` generations of ask/evaluate/tell on a batch objective.
Trajectory maximize(const Objective& f, const Vector& mean0, double sigma0, std::size_t iters, Rng& rng,
                    std::size_t population = 0);

}  // namespace pglbo::cmaes

#endif  // PGLBO_CMAES_HPP

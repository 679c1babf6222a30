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

#ifndef PGLBO_SAMPLER_HPP
#define PGLBO_SAMPLER_HPP

#include <optional>
#include <string>
#include <vector>

#include "pglbo/gp.hpp"
#include "pglbo/numcore.hpp"

namespace pglbo::sampler {

enum class Provenance { Noise, Cmaes, Random };

std::string to_string(Provenance p);
Provenance parse_provenance(const std::string& s);

/// Unlabeled latent candidates.
struct SampleBatch {
  Matrix latents;
  Provenance provenance = Provenance::Noise;
  /// Row i was derived from labeled point seed_indices[i] (noise sampling only).
  std::optional<std::vector<std::size_t>> seed_indices;
  /// Number of candidates generated before any cap was applied.
  std::size_t generated = 0;
  bool capped = false;

  Eigen::Index size() const { return latents.rows(); }
};

/// Axis-aligned latent search region.
struct Box {
  Vector lower;
  Vector upper;

  Eigen::Index dim() const { return lower.size(); }
  /// Rejects empty, mismatched, non-finite, or inverted boxes. Equal bounds
  /// are allowed when `allow_degenerate` is set.
  void validate(bool allow_degenerate = false) const;
  Vector clamp(const Vector& z) const { return z.cwiseMax(lower).cwiseMin(upper); }
};

/// Encoded training means +/- one standard deviation of those means, per dimension.
Box latent_box(const Matrix& encoded_means);

/// Indices of the seed pool: the `top` heaviest points when there are at
/// least `top`, otherwise every point. Ties keep index order.
std::vector<std::size_t> seed_pool(const Vector& weights, std::size_t top = 100);

/// Draws n seeds from the pool in proportion to their weights and adds
/// N(0, noise_sigma^2 I) noise.
SampleBatch noisy_sample(const Matrix& labeled_latents, const Vector& weights, std::size_t n, double noise_sigma,
                         Rng& rng, std::size_t top = 100);

struct CmaesOptions {
  std::size_t population = 0;   // 0 selects 4 + floor(3 ln d)
  std::size_t group_size = 10;  // seeds per CMA-ES run; 1 runs one instance per seed
  std::size_t burn_in = 0;      // generations whose points are discarded
  std::size_t cap = 0;          // maximum number of returned points; 0 keeps all
};

/// CMA-ES on the GP posterior mean, started from seed groups. Returns the
/// points generated in every kept generation of every run.
SampleBatch cmaes_sample(const gp::GpState& gp, const Matrix& seeds, std::size_t iters, double sigma0, Rng& rng,
                         const CmaesOptions& opt = {});

/// Uniform draws in the box.
SampleBatch random_sample(const Box& bounds, std::size_t n, Rng& rng);

}  // namespace pglbo::sampler

#endif  // PGLBO_SAMPLER_HPP

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

#include "pglbo/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pglbo/cmaes.hpp"
#include "pglbo/datasets.hpp"

namespace pglbo::sampler {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Noise: return "noise";
    case Provenance::Cmaes: return "cmaes";
    case Provenance::Random: return "random";
  }
  return "unknown";
}

Provenance parse_provenance(const std::string& s) {
  if (s == "noise") return Provenance::Noise;
  if (s == "cmaes") return Provenance::Cmaes;
  if (s == "random") return Provenance::Random;
  fail(ErrorCode::Config, "unknown sampler '" + s + "' (expected noise, cmaes or random)");
}

void Box::validate(bool allow_degenerate) const {
  require(lower.size() >= 1 && lower.size() == upper.size(), ErrorCode::Config, "box: bounds must be nonempty and aligned");
  require(lower.allFinite() && upper.allFinite(), ErrorCode::Config, "box: bounds must be finite");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (allow_degenerate)
      require(lower[i] <= upper[i], ErrorCode::Config, "box: lower bound above upper bound");
    else
      require(lower[i] < upper[i], ErrorCode::Config, "box: degenerate interval in dimension " + std::to_string(i));
  }
}

Box latent_box(const Matrix& encoded_means) {
  require(encoded_means.rows() >= 1, ErrorCode::InvalidArgument, "latent_box: no encoded points");
  const Vector mean = encoded_means.colwise().mean().transpose();
  const Vector sd = ((encoded_means.rowwise() - mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
  Box b;
  b.lower = encoded_means.colwise().minCoeff().transpose() - sd;
  b.upper = encoded_means.colwise().maxCoeff().transpose() + sd;
  // A single point (or a constant coordinate) still needs a searchable interval.
  for (Eigen::Index i = 0; i < b.dim(); ++i) {
    if (!(b.upper[i] > b.lower[i])) {
      b.lower[i] -= 1.0;
      b.upper[i] += 1.0;
    }
  }
  return b;
}

std::vector<std::size_t> seed_pool(const Vector& weights, std::size_t top) {
  const auto n = static_cast<std::size_t>(weights.size());
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n < top || top == 0) return idx;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return weights[static_cast<Eigen::Index>(a)] > weights[static_cast<Eigen::Index>(b)];
  });
  idx.resize(top);
  return idx;
}

SampleBatch noisy_sample(const Matrix& labeled_latents, const Vector& weights, std::size_t n, double noise_sigma,
                         Rng& rng, std::size_t top) {
  require(labeled_latents.rows() >= 1, ErrorCode::InvalidArgument, "noisy_sample: labeled set is empty");
  require(weights.size() == labeled_latents.rows(), ErrorCode::Shape, "noisy_sample: weights/latents mismatch");
  require(noise_sigma > 0.0 && std::isfinite(noise_sigma), ErrorCode::Config, "noisy_sample: noise_sigma must be > 0");
  SampleBatch out;
  out.provenance = Provenance::Noise;
  out.generated = n;
  const std::vector<std::size_t> pool = seed_pool(weights, top);
  std::vector<double> pw(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pw[i] = weights[static_cast<Eigen::Index>(pool[i])];
  if (std::accumulate(pw.begin(), pw.end(), 0.0) <= 0.0) std::fill(pw.begin(), pw.end(), 1.0);
  std::vector<std::size_t> seeds(n);
  for (std::size_t i = 0; i < n; ++i) seeds[i] = pool[rng.categorical(pw)];
  out.latents = take_rows(labeled_latents, seeds);
  out.latents += noise_sigma * rng.normal_matrix(static_cast<Eigen::Index>(n), labeled_latents.cols());
  out.seed_indices = std::move(seeds);
  return out;
}

SampleBatch cmaes_sample(const gp::GpState& gp, const Matrix& seeds, std::size_t iters, double sigma0, Rng& rng,
                         const CmaesOptions& opt) {
  require(seeds.rows() >= 1, ErrorCode::InvalidArgument, "cmaes_sample: no seeds");
  require(iters >= 1, ErrorCode::InvalidArgument, "cmaes_sample: iters must be >= 1");
  require(seeds.cols() == gp.dim(), ErrorCode::Shape, "cmaes_sample: seed dimension does not match the GP");
  require(sigma0 > 0.0, ErrorCode::Config, "cmaes_sample: sigma0 must be > 0");
  require(opt.group_size >= 1, ErrorCode::Config, "cmaes_sample: group size must be >= 1");
  require(opt.burn_in < iters, ErrorCode::Config, "cmaes_sample: burn-in must be below the iteration count");

  const auto n_seeds = static_cast<std::size_t>(seeds.rows());
  const std::size_t groups = (n_seeds + opt.group_size - 1) / opt.group_size;
  // One stream per group, fixed before any run so results do not depend on run order.
  std::vector<std::uint64_t> group_seeds(groups);
  for (auto& s : group_seeds) s = rng.next_u64();

  const cmaes::Objective f = [&gp](const Matrix& zs) { return gp::posterior_batch(gp, zs).mean; };
  std::vector<Matrix> parts;
  Eigen::Index total = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t lo = g * opt.group_size;
    const std::size_t hi = std::min(n_seeds, lo + opt.group_size);
    const Vector mean0 = seeds.middleRows(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi - lo))
                             .colwise().mean().transpose();
    Rng grng(group_seeds[g]);
    cmaes::Trajectory t = cmaes::maximize(f, mean0, sigma0, iters, grng, opt.population);
    const Eigen::Index per_gen = t.samples.rows() / static_cast<Eigen::Index>(iters);
    const Eigen::Index skip = per_gen * static_cast<Eigen::Index>(opt.burn_in);
    parts.push_back(t.samples.bottomRows(t.samples.rows() - skip));
    total += parts.back().rows();
  }
  SampleBatch out;
  out.provenance = Provenance::Cmaes;
  out.generated = static_cast<std::size_t>(total);
  out.latents.resize(total, seeds.cols());
  Eigen::Index row = 0;
  for (const Matrix& p : parts) {
    out.latents.middleRows(row, p.rows()) = p;
    row += p.rows();
  }
  if (opt.cap > 0 && out.generated > opt.cap) {
    // Uniform subset without replacement, kept in generation order.
    std::vector<std::size_t> idx(out.generated);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.shuffle(idx);
    idx.resize(opt.cap);
    std::sort(idx.begin(), idx.end());
    out.latents = take_rows(out.latents, idx);
    out.capped = true;
  }
  return out;
}

SampleBatch random_sample(const Box& bounds, std::size_t n, Rng& rng) {
  bounds.validate();
  SampleBatch out;
  out.provenance = Provenance::Random;
  out.generated = n;
  out.latents.resize(static_cast<Eigen::Index>(n), bounds.dim());
  for (Eigen::Index i = 0; i < out.latents.rows(); ++i)
    for (Eigen::Index j = 0; j < bounds.dim(); ++j) out.latents(i, j) = rng.uniform(bounds.lower[j], bounds.upper[j]);
  return out;
}

}  // namespace pglbo::sampler

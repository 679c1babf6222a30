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

#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "pglbo/cmaes.hpp"
#include "pglbo/sampler.hpp"

using namespace pglbo;
using namespace pglbo::sampler;

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Dense samples of -|z - z*|^2 on a grid, fitted with fixed hyperparameters.
gp::GpState quadratic_gp(const Vector& zstar) {
  std::vector<Vector> pts;
  for (double a = -3.0; a <= 3.0 + 1e-9; a += 0.5)
    for (double b = -3.0; b <= 3.0 + 1e-9; b += 0.5) {
      Vector z(2);
      z << a, b;
      pts.push_back(z);
    }
  Matrix x(static_cast<Eigen::Index>(pts.size()), 2);
  Vector y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x.row(i) = pts[static_cast<std::size_t>(i)].transpose();
    y[i] = -(pts[static_cast<std::size_t>(i)] - zstar).squaredNorm();
  }
  gp::GpHyper h;
  h.lengthscale = 2.0;
  h.signal_variance = 100.0;
  h.noise_variance = 1e-6;
  h.prior_mean = y.mean();
  return gp::condition(x, y, h);
}

}  // namespace

TEST_CASE("noisy_sample: vanishing noise returns the seeds") {
  Rng rng(1);
  Matrix z = rng.normal_matrix(5, 3);
  Vector w = Vector::Constant(5, 0.2);
  SampleBatch b = noisy_sample(z, w, 20, 1e-12, rng);
  REQUIRE(b.size() == 20);
  REQUIRE(b.seed_indices.has_value());
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    const auto s = static_cast<Eigen::Index>((*b.seed_indices)[static_cast<std::size_t>(i)]);
    CHECK((b.latents.row(i) - z.row(s)).cwiseAbs().maxCoeff() <= 1e-6);
  }
  CHECK(b.provenance == Provenance::Noise);
}

TEST_CASE("noisy_sample: per-coordinate std is 0.1 within 5 percent") {
  Rng rng(2);
  Matrix z(1, 4);
  z << 0.5, -1.0, 2.0, 0.0;
  SampleBatch b = noisy_sample(z, Vector::Ones(1), 10000, 0.1, rng);
  for (Eigen::Index j = 0; j < 4; ++j) {
    const Vector c = b.latents.col(j);
    const double m = c.mean();
    const double sd = std::sqrt((c.array() - m).square().sum() / static_cast<double>(c.size() - 1));
    CHECK(std::abs(sd - 0.1) <= 0.005);
  }
}

TEST_CASE("noisy_sample: single point, tail bound, empty request") {
  Rng rng(3);
  Matrix z(1, 3);
  z << 1.0, 2.0, 3.0;
  SampleBatch b = noisy_sample(z, Vector::Ones(1), 3, 0.1, rng);
  CHECK(b.size() == 3);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK((b.latents.row(i) - z.row(0)).norm() <= 8.0 * 0.1 * std::sqrt(3.0));
  CHECK(noisy_sample(z, Vector::Ones(1), 0, 0.1, rng).size() == 0);
  CHECK_THROWS_AS(noisy_sample(Matrix(0, 3), Vector(0), 2, 0.1, rng), Error);
  CHECK_THROWS_AS(noisy_sample(z, Vector::Ones(1), 2, 0.0, rng), Error);
}

TEST_CASE("noisy_sample: seed frequencies follow the weights") {
  Rng rng(4);
  Matrix z = rng.normal_matrix(3, 2);
  Vector w(3);
  w << 0.1, 0.2, 0.7;
  const int n = 10000;
  SampleBatch b = noisy_sample(z, w, n, 0.1, rng);
  std::vector<double> counts(3, 0.0);
  for (std::size_t s : *b.seed_indices) counts[s] += 1.0;
  double chi2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double e = n * w[i];
    chi2 += (counts[static_cast<std::size_t>(i)] - e) * (counts[static_cast<std::size_t>(i)] - e) / e;
  }
  CHECK(chi2 < 9.21);  // chi-square, 2 dof, p = 0.01
  CHECK(counts[2] >= counts[1]);
  CHECK(counts[1] >= counts[0]);
}

TEST_CASE("seed_pool keeps the heaviest when the set is large") {
  Rng rng(5);
  Vector w(150);
  for (Eigen::Index i = 0; i < 150; ++i) w[i] = rng.uniform();
  std::vector<std::size_t> pool = seed_pool(w, 100);
  CHECK(pool.size() == 100);
  double min_in = 1.0;
  for (std::size_t i : pool) min_in = std::min(min_in, w[static_cast<Eigen::Index>(i)]);
  int heavier_outside = 0;
  for (Eigen::Index i = 0; i < 150; ++i)
    if (std::find(pool.begin(), pool.end(), static_cast<std::size_t>(i)) == pool.end() && w[i] > min_in)
      ++heavier_outside;
  CHECK(heavier_outside == 0);
  CHECK(seed_pool(w.head(40), 100).size() == 40);
}

TEST_CASE("cmaes_sample: one generation of one point with tiny sigma stays on the seeds") {
  Vector zstar(2);
  zstar << 0.5, -0.5;
  gp::GpState g = quadratic_gp(zstar);
  Rng rng(6);
  Matrix seeds = rng.normal_matrix(4, 2);
  CmaesOptions opt;
  opt.population = 1;
  opt.group_size = 1;
  SampleBatch b = cmaes_sample(g, seeds, 1, 1e-9, rng, opt);
  REQUIRE(b.size() == 4);
  CHECK((b.latents - seeds).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(b.provenance == Provenance::Cmaes);
}

TEST_CASE("cmaes_sample: final-generation mean approaches the surrogate optimum") {
  Vector zstar(2);
  zstar << 0.5, -0.5;
  gp::GpState g = quadratic_gp(zstar);
  Rng rng(7);
  Matrix seeds(20, 2);
  for (Eigen::Index i = 0; i < 20; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) seeds(i, j) = rng.uniform(-2.5, 2.5);
  CmaesOptions opt;
  opt.group_size = 1;
  const std::size_t iters = 15;
  SampleBatch b = cmaes_sample(g, seeds, iters, 0.3, rng, opt);
  const auto pop = static_cast<Eigen::Index>(cmaes::default_population(2));
  REQUIRE(b.size() == 20 * pop * static_cast<Eigen::Index>(iters));
  int closer = 0;
  for (Eigen::Index s = 0; s < 20; ++s) {
    const Eigen::Index last = (s + 1) * pop * static_cast<Eigen::Index>(iters) - pop;
    const Vector m = b.latents.middleRows(last, pop).colwise().mean().transpose();
    if ((m - zstar).norm() < (seeds.row(s).transpose() - zstar).norm()) ++closer;
  }
  CHECK(closer >= 18);
}

TEST_CASE("cmaes_sample: deterministic, burn-in and cap") {
  Vector zstar = Vector::Zero(2);
  gp::GpState g = quadratic_gp(zstar);
  Rng seeds_rng(8);
  Matrix seeds = seeds_rng.normal_matrix(25, 2);
  Rng r1(9), r2(9);
  SampleBatch a = cmaes_sample(g, seeds, 5, 0.25, r1);
  SampleBatch b = cmaes_sample(g, seeds, 5, 0.25, r2);
  CHECK(a.latents == b.latents);
  const auto pop = static_cast<Eigen::Index>(cmaes::default_population(2));
  CHECK(a.size() == 3 * pop * 5);  // three groups of at most ten seeds

  CmaesOptions opt;
  opt.burn_in = 2;
  Rng r3(9);
  CHECK(cmaes_sample(g, seeds, 5, 0.25, r3, opt).size() == 3 * pop * 3);

  opt.burn_in = 0;
  opt.cap = 10;
  Rng r4(9);
  SampleBatch c = cmaes_sample(g, seeds, 5, 0.25, r4, opt);
  CHECK(c.size() == 10);
  CHECK(c.capped);
  CHECK(c.generated == static_cast<std::size_t>(3 * pop * 5));
  CHECK(c.latents.allFinite());
}

// Per-generation medians over 10 runs fluctuate for any standard CMA-ES, so the
// decrease is checked over 5-generation windows.
TEST_CASE("cmaes on a sphere: median distance of the mean shrinks over 20 generations") {
  Vector opt = Vector::Zero(4);
  const std::size_t gens = 20;
  std::vector<std::vector<double>> dist(gens + 1);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    Vector m0 = Vector::Constant(4, 3.0);
    cmaes::Objective sphere = [&](const Matrix& zs) {
      Vector f(zs.rows());
      for (Eigen::Index i = 0; i < zs.rows(); ++i) f[i] = -(zs.row(i).transpose() - opt).squaredNorm();
      return f;
    };
    cmaes::Trajectory t = cmaes::maximize(sphere, m0, 1.0, gens, rng);
    REQUIRE(t.means.size() == gens + 1);
    for (std::size_t g = 0; g <= gens; ++g) dist[g].push_back((t.means[g] - opt).norm());
    t.final_state.validate();
  }
  for (std::size_t g = 5; g <= gens; g += 5) CHECK(median(dist[g]) < median(dist[g - 5]));
  CHECK(median(dist[gens]) < 0.1 * median(dist[0]));
}

TEST_CASE("cmaes state checks") {
  CHECK(cmaes::default_population(1) == 4);
  CHECK(cmaes::default_population(8) == 10);
  CHECK_THROWS_AS(cmaes::init(Vector::Zero(2), 0.0), Error);
  cmaes::CmaesState s = cmaes::init(Vector::Zero(2), 0.5);
  Rng rng(10);
  Matrix pts = cmaes::ask(s, rng);
  CHECK(pts.rows() == static_cast<Eigen::Index>(s.population));
  CHECK_THROWS_AS(cmaes::tell(s, pts.topRows(1), Vector::Zero(1)), Error);
}

TEST_CASE("random_sample: bounds, moments, determinism") {
  Box box;
  box.lower = Vector::Zero(3);
  box.upper = Vector::Ones(3);
  Rng r1(11), r2(11);
  SampleBatch a = random_sample(box, 10000, r1);
  CHECK(random_sample(box, 10000, r2).latents == a.latents);
  CHECK(a.provenance == Provenance::Random);
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(std::abs(a.latents.col(j).mean() - 0.5) <= 0.02);
  CHECK((a.latents.array() >= 0.0).all());
  CHECK((a.latents.array() < 1.0).all());
  CHECK(random_sample(box, 0, r1).size() == 0);
  box.upper[1] = 0.0;
  CHECK_THROWS_AS(random_sample(box, 5, r1), Error);
}

TEST_CASE("latent_box spans the means plus one standard deviation") {
  Matrix m(4, 2);
  m << 0, 1, 1, 1, 2, 1, 3, 1;
  Box b = latent_box(m);
  const double sd = std::sqrt(1.25);
  CHECK(b.lower[0] == doctest::Approx(-sd).epsilon(1e-14));
  CHECK(b.upper[0] == doctest::Approx(3.0 + sd).epsilon(1e-14));
  // Constant coordinate is widened so the box stays searchable.
  CHECK(b.lower[1] == 0.0);
  CHECK(b.upper[1] == 2.0);
  b.validate();
  CHECK(parse_provenance(to_string(Provenance::Cmaes)) == Provenance::Cmaes);
  CHECK_THROWS_AS(parse_provenance("grid"), Error);
}

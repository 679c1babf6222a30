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

#include <cmath>

#include "oracles.hpp"
#include "pglbo/numcore.hpp"

using namespace pglbo;

TEST_CASE("cholesky_solve: identity returns the right-hand side") {
  Rng rng(3);
  Matrix b = rng.normal_matrix(3, 2);
  Matrix x = cholesky_solve(Matrix::Identity(3, 3), b);
  CHECK((x - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cholesky_solve: 2x2 system matches elimination") {
  Matrix a(2, 2);
  a << 4, 2, 2, 3;
  Matrix b(2, 1);
  b << 1, 1;
  Matrix x = cholesky_solve(a, b);
  // Gaussian elimination by hand: x = [1/8, 1/4].
  CHECK(x(0, 0) == doctest::Approx(0.125).epsilon(1e-14));
  CHECK(x(1, 0) == doctest::Approx(0.25).epsilon(1e-14));
  Matrix ref = oracle::gauss_solve(a, b);
  CHECK((x - ref).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("cholesky_solve: indefinite matrix names the failing pivot") {
  Matrix a(2, 2);
  a << 1, 2, 2, 1;
  try {
    (void)cholesky_solve(a, Matrix::Ones(2, 1));
    FAIL("expected DecompositionError");
  } catch (const DecompositionError& e) {
    CHECK(e.pivot() == 1);
    CHECK(e.code() == ErrorCode::Decomposition);
  }
}

TEST_CASE("cholesky_solve: residual bound and A unmodified on random SPD systems") {
  Rng rng(11);
  for (int n : {1, 2, 5, 17, 50}) {
    Matrix a = oracle::random_spd(n, rng);
    const Matrix a_copy = a;
    Matrix x0 = rng.normal_matrix(n, 3);
    Matrix b = a * x0;
    Matrix x = cholesky_solve(a, b);
    CHECK((a * x - b).cwiseAbs().maxCoeff() <= 1e-8 * b.cwiseAbs().maxCoeff());
    CHECK((x - x0).norm() / x0.norm() <= 1e-7);
    CHECK(a == a_copy);
  }
}

TEST_CASE("cholesky_jittered escalates on a singular kernel-like matrix") {
  Matrix a = Matrix::Ones(3, 3);  // rank one, PSD
  CholeskyFactor f = cholesky_jittered(a);
  CHECK(f.jitter > 0.0);
  CHECK(f.jitter <= 1e-4);
  Matrix recon = f.lower * f.lower.transpose();
  Matrix target = a;
  target.diagonal().array() += f.jitter;
  CHECK((recon - target).cwiseAbs().maxCoeff() < 1e-10);

  Matrix neg(2, 2);
  neg << 1, 0, 0, -1;
  CHECK_THROWS_AS(cholesky_jittered(neg), DecompositionError);
}

TEST_CASE("Rng: equal seeds give identical streams") {
  Rng a(42), b(42), c(43);
  bool all_equal = true;
  bool differs = false;
  for (int i = 0; i < 1000000; ++i) {
    const auto x = a.next_u64();
    all_equal = all_equal && (x == b.next_u64());
    differs = differs || (x != c.next_u64());
  }
  CHECK(all_equal);
  CHECK(differs);
}

TEST_CASE("Rng: state round-trips and substreams are position independent") {
  Rng a(7);
  for (int i = 0; i < 100; ++i) a.normal();
  Rng b = Rng::from_state(a.seed(), a.state());
  CHECK(a == b);
  for (int i = 0; i < 10; ++i) CHECK(a.normal() == b.normal());

  Rng fresh(7);
  CHECK(fresh.substream(3) == a.substream(3));
  CHECK(!(fresh.substream(3) == fresh.substream(4)));
}

TEST_CASE("Rng: uniform and normal moments") {
  Rng r(5);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK_FALSE(u < 0.0);
    CHECK(u < 1.0);
    su += u;
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(std::abs(su / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(sn / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(sn2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("Rng: categorical follows weights") {
  Rng r(9);
  std::vector<double> w{0.0, 1.0, 3.0};
  std::vector<int> counts(3, 0);
  for (int i = 0; i < 40000; ++i) ++counts[r.categorical(w)];
  CHECK(counts[0] == 0);
  CHECK(std::abs(counts[2] / 40000.0 - 0.75) < 0.01);
  std::vector<double> zeros{0.0, 0.0};
  CHECK_THROWS_AS(r.categorical(zeros), Error);
}

TEST_CASE("grad_check: quadratic and linear losses") {
  Rng rng(1);
  std::vector<Matrix> params{rng.normal_matrix(3, 4), rng.normal_matrix(1, 5)};
  LossFn sumsq = [](const std::vector<Matrix>& p) {
    double s = 0;
    for (const auto& m : p) s += m.squaredNorm();
    return s;
  };
  std::vector<Matrix> grad;
  for (const auto& m : params) grad.push_back(2.0 * m);
  CHECK(grad_check(sumsq, params, grad, 1e-4) <= 1e-7);

  Matrix c = rng.normal_matrix(3, 4);
  LossFn linear = [&c](const std::vector<Matrix>& p) { return c.cwiseProduct(p[0]).sum(); };
  CHECK(grad_check(linear, {params[0]}, {c}, 1e-3) <= 1e-9);

  LossFn bad = [](const std::vector<Matrix>& p) { return p[0](0, 0) > 0 ? std::log(-1.0) : 0.0; };
  Matrix one = Matrix::Ones(1, 1);
  CHECK_THROWS_AS(grad_check(bad, {one}, {one}, 1e-3), Error);
}

TEST_CASE("Adam with zero learning rate leaves parameters unchanged") {
  Rng rng(2);
  std::vector<Matrix> p{rng.normal_matrix(2, 2)};
  const Matrix before = p[0];
  Adam adam(0.0);
  adam.step(p, {Matrix::Ones(2, 2)});
  CHECK(p[0] == before);
}

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

#include "pglbo/tasks.hpp"

using namespace pglbo;
using namespace pglbo::tasks;

TEST_CASE("topology objective: self, disjoint, half subset") {
  const Vector t = topology_target();
  CHECK(t.sum() == 80.0);  // two 4 x 12 bars sharing a 4 x 4 square
  CHECK(topology_objective(t, t) == doctest::Approx(1.0).epsilon(1e-15));
  Vector disjoint = (1.0 - t.array()).matrix();
  CHECK(topology_objective(disjoint, t) == 0.0);

  // Half of the target's pixels: cos = 40 / (sqrt(40) sqrt(80)) = sqrt(1/2).
  Vector half = Vector::Zero(t.size());
  int kept = 0;
  for (Eigen::Index i = 0; i < t.size() && kept < 40; ++i)
    if (t[i] == 1.0) {
      half[i] = 1.0;
      ++kept;
    }
  CHECK(topology_objective(half, t) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));

  CHECK_THROWS_AS(topology_objective(Vector::Zero(t.size()), t), Error);
  CHECK_THROWS_AS(topology_objective(Vector::Ones(3), t), Error);
}

TEST_CASE("topology task: empty image scores -1 with a note, malformed input fails") {
  Task task = topology_task();
  CHECK(task.input_dim == 256);
  EvalResult zero = task.evaluate(Vector::Zero(256));
  CHECK(zero.ok);
  CHECK(zero.value == -1.0);
  CHECK_FALSE(zero.note.empty());
  CHECK_FALSE(task.evaluate(Vector::Ones(10)).ok);
  CHECK(task.evaluate(topology_target()).value == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(task.optimum == 1.0);
}

TEST_CASE("generate_unlabeled_topology: binary, calibrated fill, deterministic") {
  Rng r1(1), r2(1);
  Matrix a = generate_unlabeled_topology(1000, r1);
  CHECK(a == generate_unlabeled_topology(1000, r2));
  CHECK((a.array() * (1.0 - a.array()) == 0.0).all());
  const double fill = a.mean();
  CHECK(fill >= 0.1);
  CHECK(fill <= 0.6);
  for (Eigen::Index i = 0; i < a.rows(); ++i) CHECK(a.row(i).sum() > 0.0);
}

TEST_CASE("codecs round-trip valid inputs") {
  Task topo = topology_task();
  Rng rng(2);
  Matrix imgs = topo.generate(50, rng);
  for (Eigen::Index i = 0; i < imgs.rows(); ++i) {
    const Vector x = imgs.row(i).transpose();
    CHECK(topo.codec(x) == x);
  }
  Vector probs(4);
  probs << 0.1, 0.5, 0.49, 0.9;
  Vector expect(4);
  expect << 0, 1, 0, 1;
  CHECK(binarize(probs) == expect);

  Task synth = synth_oracle_task();
  Matrix xs = synth.generate(50, rng);
  for (Eigen::Index i = 0; i < xs.rows(); ++i) CHECK(synth.codec(xs.row(i).transpose()) == xs.row(i).transpose());
}

TEST_CASE("synthetic oracle: optimum, strict concavity, unique maximizer") {
  Task t = synth_oracle_task();
  const Vector xs = synth_optimum();
  CHECK(t.input_dim == kSynthDim);
  CHECK(t.evaluate(xs).value == 0.0);
  CHECK(t.optimum == 0.0);
  CHECK(t.likelihood == vae::Likelihood::Gaussian);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    Vector a(kSynthDim), b(kSynthDim);
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      a[j] = rng.uniform(-kSynthRange, kSynthRange);
      b[j] = rng.uniform(-kSynthRange, kSynthRange);
    }
    const double fa = t.evaluate(a).value, fb = t.evaluate(b).value;
    CHECK(t.evaluate(0.5 * (a + b)).value > 0.5 * (fa + fb));
    CHECK(fa < 0.0);
  }
  Matrix pool = t.generate(500, rng);
  CHECK(pool.cwiseAbs().maxCoeff() <= kSynthRange);
  CHECK_FALSE(t.evaluate(Vector::Zero(3)).ok);
}

TEST_CASE("make_task") {
  CHECK(make_task("topology").name == "topology");
  CHECK(make_task("synthetic").name == "synthetic");
  CHECK_THROWS_AS(make_task("molecule"), Error);
}

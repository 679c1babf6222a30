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

#include "pglbo/tasks.hpp"

#include <cmath>

namespace pglbo::tasks {

double topology_objective(const Vector& image, const Vector& target) {
  require(image.size() == target.size(), ErrorCode::Shape, "topology objective: size mismatch");
  const double ni = image.norm(), nt = target.norm();
  if (ni == 0.0 || nt == 0.0) fail(ErrorCode::Evaluation, "topology objective: zero image");
  return image.dot(target) / (ni * nt);
}

Vector topology_target() {
  Vector t = Vector::Zero(kGrid * kGrid);
  for (int r = 0; r < kGrid; ++r)
    for (int c = 0; c < kGrid; ++c) {
      const bool bar = r >= 6 && r < 10 && c >= 2 && c < 14;
      const bool post = c >= 6 && c < 10 && r >= 2 && r < 14;
      if (bar || post) t[r * kGrid + c] = 1.0;
    }
  return t;
}

Matrix generate_unlabeled_topology(std::size_t n, Rng& rng) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n), kGrid * kGrid);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    while (out.row(i).sum() == 0.0) {
      const int shapes = 1 + static_cast<int>(rng.index(3));
      for (int s = 0; s < shapes; ++s) {
        const bool ellipse = rng.uniform() < 0.5;
        const double cr = rng.uniform(2.0, kGrid - 2.0), cc = rng.uniform(2.0, kGrid - 2.0);
        const double hr = rng.uniform(1.0, 5.0), hc = rng.uniform(1.0, 5.0);
        for (int r = 0; r < kGrid; ++r)
          for (int c = 0; c < kGrid; ++c) {
            const double dr = (r + 0.5 - cr) / hr, dc = (c + 0.5 - cc) / hc;
            const bool in = ellipse ? dr * dr + dc * dc <= 1.0 : std::abs(dr) <= 1.0 && std::abs(dc) <= 1.0;
            if (in) out(i, r * kGrid + c) = 1.0;
          }
      }
    }
  }
  return out;
}

Vector binarize(const Vector& probs) { return (probs.array() >= 0.5).cast<double>().matrix(); }

Task topology_task() {
  Task t;
  t.name = "topology";
  t.input_dim = kGrid * kGrid;
  t.likelihood = vae::Likelihood::Bernoulli;
  const Vector target = topology_target();
  t.evaluate = [target](const Vector& x) {
    EvalResult r;
    if (x.size() != target.size() || !x.allFinite()) {
      r.ok = false;
      r.note = "malformed image";
      return r;
    }
    if (x.norm() == 0.0) {
      r.value = -1.0;
      r.note = "empty image scored -1";
      return r;
    }
    r.value = topology_objective(x, target);
    return r;
  };
  t.codec = binarize;
  t.generate = generate_unlabeled_topology;
  t.optimum = 1.0;
  return t;
}

Vector synth_optimum() {
  Vector x(kSynthDim);
  x << 0.6, -0.9, 0.375, 1.125;
  return x;
}

Task synth_oracle_task() {
  Task t;
  t.name = "synthetic";
  t.input_dim = kSynthDim;
  t.likelihood = vae::Likelihood::Gaussian;
  const Vector opt = synth_optimum();
  t.evaluate = [opt](const Vector& x) {
    EvalResult r;
    if (x.size() != opt.size() || !x.allFinite()) {
      r.ok = false;
      r.note = "malformed input";
      return r;
    }
    r.value = -(x - opt).squaredNorm();
    return r;
  };
  t.codec = [](const Vector& x) { return x; };
  t.generate = [](std::size_t n, Rng& rng) {
    Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kSynthDim));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-kSynthRange, kSynthRange);
    return m;
  };
  t.optimum = 0.0;
  return t;
}

Task make_task(const std::string& name) {
  if (name == "topology") return topology_task();
  if (name == "synthetic") return synth_oracle_task();
  fail(ErrorCode::Config, "unknown task '" + name + "' (expected topology or synthetic)");
}

}  // namespace pglbo::tasks

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

#ifndef PGLBO_DATASETS_HPP
#define PGLBO_DATASETS_HPP

#include "pglbo/numcore.hpp"

namespace pglbo {

/// Evaluated points: one input row per score.
struct LabeledDataset {
  Matrix inputs;  // N x D
  Vector scores;  // N

  Eigen::Index size() const { return inputs.rows(); }
  bool empty() const { return size() == 0; }

  void append(const Vector& x, double score) {
    if (inputs.size() == 0) inputs.resize(0, x.size());
    require(x.size() == inputs.cols(), ErrorCode::Shape, "LabeledDataset: input dimension mismatch");
    inputs.conservativeResize(inputs.rows() + 1, Eigen::NoChange);
    inputs.row(inputs.rows() - 1) = x.transpose();
    scores.conservativeResize(scores.size() + 1);
    scores[scores.size() - 1] = score;
  }
};

/// Decoded sample points with GP-mean pseudo-labels and rank weights.
struct PseudoDataset {
  Matrix inputs;   // N_P x D (decoded)
  Matrix latents;  // N_P x d
  Vector labels;   // N_P
  Vector weights;  // N_P, sums to 1 when nonempty

  Eigen::Index size() const { return inputs.rows(); }
  bool empty() const { return size() == 0; }
};

/// Rows of `m` at `idx`, in order.
inline Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

inline Vector take(const Vector& v, const std::vector<std::size_t>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(idx[i])];
  return out;
}

}  // namespace pglbo

#endif  // PGLBO_DATASETS_HPP

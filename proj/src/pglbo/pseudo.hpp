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

#ifndef PGLBO_PSEUDO_HPP
#define PGLBO_PSEUDO_HPP

#include <limits>
#include <string>
#include <vector>

#include "pglbo/datasets.hpp"
#include "pglbo/gp.hpp"
#include "pglbo/vae.hpp"
#include "pglbo/weighting.hpp"

namespace pglbo::pseudo {

enum class ThresholdMode { Dynamic, Fixed, None };

std::string to_string(ThresholdMode m);
ThresholdMode parse_threshold_mode(const std::string& s);

/// Variance threshold with its moving-average decay.
struct ThresholdState {
  double tau = 0.0;
  double lambda = 0.9;
  std::size_t step = 0;

  void validate() const;
  /// tau = +inf; keeps every candidate.
  static ThresholdState unbounded();
  friend bool operator==(const ThresholdState&, const ThresholdState&) = default;
};

struct Labels {
  Vector labels;     // GP posterior means
  Vector variances;  // GP posterior variances
};

Labels assign_pseudo_labels(const gp::GpState& gp, const Matrix& latents);

/// Arithmetic mean summed in index order.
double ordered_mean(const Vector& v);

/// tau_0 = mean posterior variance over the presample.
ThresholdState init_threshold(const gp::GpState& gp, const Matrix& presample, double lambda = 0.9);

/// tau_t = lambda * tau_{t-1} + (1 - lambda) * mean(variances). An empty
/// batch leaves the state unchanged and reports applied = false.
ThresholdState update_threshold(const ThresholdState& state, const Vector& variances, bool* applied = nullptr);

/// Indices with variance <= tau, ascending.
std::vector<std::size_t> filter_by_uncertainty(const Matrix& latents, const Vector& variances,
                                               const ThresholdState& state);

/// Up to `n` of `candidates`, lowest variance first; ties keep index order.
/// Result is sorted ascending by index.
std::vector<std::size_t> lowest_variance(const std::vector<std::size_t>& candidates, const Vector& variances,
                                         std::size_t n);

/// Decodes the kept latents and attaches rank weights over the labels.
PseudoDataset build_pseudo_dataset(const vae::VaeState& vae, const Matrix& kept_latents, const Vector& labels,
                                   const weighting::WeightConfig& weight_cfg);

}  // namespace pglbo::pseudo

#endif  // PGLBO_PSEUDO_HPP

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

#include "pglbo/pseudo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pglbo::pseudo {

std::string to_string(ThresholdMode m) {
  switch (m) {
    case ThresholdMode::Dynamic: return "dynamic";
    case ThresholdMode::Fixed: return "fixed";
    case ThresholdMode::None: return "none";
  }
  return "unknown";
}

ThresholdMode parse_threshold_mode(const std::string& s) {
  if (s == "dynamic") return ThresholdMode::Dynamic;
  if (s == "fixed") return ThresholdMode::Fixed;
  if (s == "none") return ThresholdMode::None;
  fail(ErrorCode::Config, "unknown threshold mode '" + s + "' (expected dynamic, fixed or none)");
}

void ThresholdState::validate() const {
  require(tau >= 0.0 && !std::isnan(tau), ErrorCode::InvalidArgument, "threshold: tau must be >= 0");
  require(lambda > 0.0 && lambda < 1.0, ErrorCode::Config, "threshold: lambda must lie in (0, 1)");
}

ThresholdState ThresholdState::unbounded() {
  ThresholdState s;
  s.tau = std::numeric_limits<double>::infinity();
  return s;
}

Labels assign_pseudo_labels(const gp::GpState& gp, const Matrix& latents) {
  gp::BatchPosterior p = gp::posterior_batch(gp, latents);
  return {std::move(p.mean), std::move(p.variance)};
}

double ordered_mean(const Vector& v) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += v[i];
  return s / static_cast<double>(v.size());
}

ThresholdState init_threshold(const gp::GpState& gp, const Matrix& presample, double lambda) {
  require(presample.rows() >= 1, ErrorCode::Config, "init_threshold: presample is empty");
  ThresholdState s;
  s.lambda = lambda;
  s.tau = ordered_mean(assign_pseudo_labels(gp, presample).variances);
  s.step = 0;
  s.validate();
  return s;
}

ThresholdState update_threshold(const ThresholdState& state, const Vector& variances, bool* applied) {
  state.validate();
  if (applied) *applied = variances.size() > 0;
  if (variances.size() == 0) return state;
  ThresholdState next = state;
  next.tau = state.lambda * state.tau + (1.0 - state.lambda) * ordered_mean(variances);
  next.step = state.step + 1;
  return next;
}

std::vector<std::size_t> filter_by_uncertainty(const Matrix& latents, const Vector& variances,
                                               const ThresholdState& state) {
  require(latents.rows() == variances.size(), ErrorCode::Shape, "filter_by_uncertainty: length mismatch");
  std::vector<std::size_t> kept;
  for (Eigen::Index i = 0; i < variances.size(); ++i)
    if (variances[i] <= state.tau) kept.push_back(static_cast<std::size_t>(i));
  return kept;
}

std::vector<std::size_t> lowest_variance(const std::vector<std::size_t>& candidates, const Vector& variances,
                                         std::size_t n) {
  std::vector<std::size_t> order = candidates;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return variances[static_cast<Eigen::Index>(a)] < variances[static_cast<Eigen::Index>(b)];
  });
  if (order.size() > n) order.resize(n);
  std::sort(order.begin(), order.end());
  return order;
}

PseudoDataset build_pseudo_dataset(const vae::VaeState& vae, const Matrix& kept_latents, const Vector& labels,
                                   const weighting::WeightConfig& weight_cfg) {
  require(kept_latents.rows() == labels.size(), ErrorCode::Shape, "build_pseudo_dataset: length mismatch");
  PseudoDataset d;
  d.latents = kept_latents;
  d.labels = labels;
  if (kept_latents.rows() == 0) {
    d.inputs.resize(0, static_cast<Eigen::Index>(vae.arch.input_dim));
    return d;
  }
  d.inputs = vae::decode_batch(vae, kept_latents);
  d.weights = weighting::rank_weights(labels, weight_cfg);
  return d;
}

}  // namespace pglbo::pseudo

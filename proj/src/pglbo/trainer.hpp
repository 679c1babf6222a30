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

#ifndef PGLBO_TRAINER_HPP
#define PGLBO_TRAINER_HPP

#include <string>
#include <vector>

#include "pglbo/datasets.hpp"
#include "pglbo/gp.hpp"
#include "pglbo/vae.hpp"
#include "pglbo/weighting.hpp"

namespace pglbo::trainer {

/// Loss weight that is either constant or rises linearly over the
/// retraining rounds.
struct Schedule {
  double start = 0.0;
  double end = 0.0;
  bool linear = false;

  static Schedule fixed(double v) { return {v, v, false}; }
  static Schedule linear_increase(double start, double end) { return {start, end, true}; }

  /// "0.5" or "linear:0.5,0.75".
  static Schedule parse(const std::string& s);
  std::string to_string() const;
  void validate() const;
  friend bool operator==(const Schedule&, const Schedule&) = default;
};

/// start + (end - start) * round / max(total_rounds - 1, 1).
double schedule_value(const Schedule& s, std::size_t round, std::size_t total_rounds);

struct LossWeights {
  Schedule lambda_p;
  double lambda_g = 0.0;

  void validate() const;
};

/// Loss weights resolved for one round.
struct RoundLambdas {
  double lambda_p = 0.0;
  double lambda_g = 0.0;
};

/// Minibatch of labeled points with the frozen noise for one latent draw each.
struct LabeledBatch {
  Matrix xs;
  Vector targets;
  Vector weights;
  Matrix eps;
};

struct PseudoBatch {
  Matrix xs;
  Vector weights;
  Matrix eps;

  bool empty() const { return xs.rows() == 0; }
};

/// sum_i w_i (f_i - mu(z_i))^2 + sum_j w_j var(z_j) with the GP held fixed.
/// Only encoder parameters receive gradient.
vae::LossGrad guidance_loss(const vae::VaeState& vae, const gp::GpState& gp, const LabeledBatch& labeled,
                            const PseudoBatch& pseudo);

/// Same loss with one fresh reparameterization sample per point.
vae::LossGrad guidance_loss_LG(const vae::VaeState& vae, const gp::GpState& gp, const Matrix& labeled_xs,
                               const Vector& targets, const Vector& weights, const Matrix& pseudo_xs,
                               const Vector& pseudo_weights, Rng& rng);

struct LossBreakdown {
  double labeled = 0.0;
  double pseudo = 0.0;
  double guidance = 0.0;
  double total = 0.0;
};

struct TotalLoss {
  LossBreakdown parts;
  vae::LossGrad grad;  // grad.loss == parts.total
};

/// L_L + lambda_p L_P + lambda_g L_G. The labeled latent sample is shared by
/// L_L and the supervised part of L_G; likewise for the pseudo batch. Terms
/// with a zero weight are not built, so gp may be null when lambda_g == 0.
TotalLoss total_loss(const vae::VaeState& vae, const gp::GpState* gp, const LabeledBatch& labeled,
                     const PseudoBatch& pseudo, const RoundLambdas& lambdas);

struct RetrainConfig {
  int epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  weighting::WeightConfig weights;         // labeled rank weights
  weighting::WeightConfig pseudo_weights;  // pseudo-label rank weights
};

struct EpochRecord {
  std::size_t round = 0;
  std::size_t epoch = 0;
  LossBreakdown loss;  // batch means
  double lambda_p = 0.0;
  double lambda_g = 0.0;
};

/// Weighted retraining on D_L and D_P. Each step draws a labeled minibatch
/// with indices sampled in proportion to the rank weights (uniform 1/B
/// batch weights, an unbiased estimate of the weighted loss) and, when a
/// pseudo term is active, a pseudo minibatch drawn the same way. A fresh
/// Adam state is used per call. gp is required when lambda_g > 0.
vae::VaeState retrain_vae(const vae::VaeState& vae, const gp::GpState* gp, const LabeledDataset& labeled,
                          const PseudoDataset& pseudo, const LossWeights& weights, std::size_t round,
                          std::size_t total_rounds, const RetrainConfig& cfg, Rng& rng,
                          std::vector<EpochRecord>* log = nullptr);

/// Encoder means of every labeled input.
Matrix encode_means(const vae::VaeState& vae, const Matrix& inputs);

/// Fits the GP on the encoder means of D_L.
gp::GpState refit_gp_on_reencoded(const vae::VaeState& vae, const LabeledDataset& labeled, const gp::GpHyper& init,
                                  const gp::FitOptions& opt, Rng& rng);

}  // namespace pglbo::trainer

#endif  // PGLBO_TRAINER_HPP

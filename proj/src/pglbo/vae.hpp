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

#ifndef PGLBO_VAE_HPP
#define PGLBO_VAE_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "pglbo/autodiff.hpp"
#include "pglbo/numcore.hpp"

namespace pglbo::vae {

enum class Likelihood { Bernoulli, Gaussian };

/// MLP encoder/decoder shape. The decoder mirrors the encoder's hidden widths.
struct VaeArch {
  std::size_t input_dim = 0;
  std::size_t latent_dim = 0;
  std::vector<std::size_t> hidden;
  Likelihood likelihood = Likelihood::Bernoulli;

  void validate() const;
  friend bool operator==(const VaeArch&, const VaeArch&) = default;
};

inline constexpr double kLogvarMin = -10.0;
inline constexpr double kLogvarMax = 10.0;
inline constexpr double kProbClamp = 1e-7;

/// Parameters as alternating [weight, bias] matrices per layer. Weights are
/// in x out; biases are 1 x out. The last encoder layer emits [mu | logvar].
struct VaeState {
  VaeArch arch;
  std::vector<Matrix> encoder;
  std::vector<Matrix> decoder;

  /// Glorot-uniform weights, zero biases.
  static VaeState init(const VaeArch& arch, Rng& rng);

  /// FNV-1a hash over the raw parameter bits.
  std::uint64_t fingerprint() const;
  std::size_t parameter_count() const;
  void validate() const;
};

struct EncodedPosterior {
  Vector mu;
  Vector logvar;  // clamped to [kLogvarMin, kLogvarMax]
};

EncodedPosterior encode(const VaeState& state, const Vector& x);
/// Rowwise encoder means and log-variances.
void encode_batch(const VaeState& state, const Matrix& xs, Matrix* mu, Matrix* logvar);

/// z = mu + exp(logvar / 2) * eps, eps ~ N(0, I).
Vector reparameterize(const EncodedPosterior& post, Rng& rng);

/// Decoder output: Bernoulli probabilities or Gaussian means.
Vector decode(const VaeState& state, const Vector& z);
Matrix decode_batch(const VaeState& state, const Matrix& zs);

struct ElboTerms {
  double recon_loglik = 0.0;
  double kl = 0.0;
};

/// Reconstruction log-likelihood of x at z and the closed-form KL of x's
/// encoder posterior from the standard normal prior.
ElboTerms elbo_terms(const VaeState& state, const Vector& x, const Vector& z);

// Graph builders used by the loss functions here and by the trainer.

struct Params {
  std::vector<Var> encoder;
  std::vector<Var> decoder;
};

/// Places the parameters on the tape; a side marked false is recorded as a
/// constant and receives no gradient.
Params bind(Tape& tape, const VaeState& state, bool encoder_grad = true, bool decoder_grad = true);

struct EncoderOut {
  Var mu;
  Var logvar;
};

EncoderOut encoder_forward(const VaeArch& arch, const std::vector<Var>& enc, const Var& xs);
Var sample_latent(const EncoderOut& enc, const Matrix& eps);
/// Logits for Bernoulli, means for Gaussian.
Var decoder_forward(const VaeArch& arch, const std::vector<Var>& dec, const Var& zs);
/// Per-row reconstruction log-likelihood (B x 1).
Var recon_loglik_rows(const VaeArch& arch, const Var& decoder_out, const Var& xs);
/// Per-row KL(q || N(0, I)) (B x 1).
Var kl_rows(const EncoderOut& enc);

/// sum_i w_i (-recon_i + kl_i) with z_i = mu_i + sigma_i * eps_i.
Var weighted_elbo_graph(Tape& tape, const VaeArch& arch, const Params& params, const Matrix& xs,
                        const Vector& weights, const Matrix& eps);

struct LossGrad {
  double loss = 0.0;
  std::vector<Matrix> encoder_grad;
  std::vector<Matrix> decoder_grad;
};

LossGrad zero_grad(const VaeState& state);

/// Weighted negative ELBO with frozen noise. Empty batch gives zero loss and
/// zero gradients; a nonempty batch with all-zero weights is rejected.
LossGrad weighted_elbo(const VaeState& state, const Matrix& xs, const Vector& weights,
                       const Matrix& eps);

/// Weighted labeled loss; draws one reparameterization sample per point.
LossGrad labeled_loss(const VaeState& state, const Matrix& xs, const Vector& weights, Rng& rng);
/// Pseudo-labeled loss; same functional form as labeled_loss.
LossGrad pseudo_loss(const VaeState& state, const Matrix& xs, const Vector& weights, Rng& rng);

struct PretrainConfig {
  int epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
};

/// Uniform-weight ELBO training from a fresh initialization.
VaeState pretrain(const VaeArch& arch, const Matrix& unlabeled, const PretrainConfig& config, Rng& rng,
                  std::vector<double>* epoch_losses = nullptr);

/// Mean uniform-weight negative ELBO over a dataset using the given noise.
double mean_negative_elbo(const VaeState& state, const Matrix& xs, const Matrix& eps);

}  // namespace pglbo::vae

#endif  // PGLBO_VAE_HPP

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

#ifndef PGLBO_GP_HPP
#define PGLBO_GP_HPP

#include "pglbo/autodiff.hpp"
#include "pglbo/numcore.hpp"

namespace pglbo::gp {

/// RBF-kernel hyperparameters with a constant prior mean.
struct GpHyper {
  double lengthscale = 1.0;
  double signal_variance = 1.0;
  double noise_variance = 1e-2;
  double prior_mean = 0.0;

  /// (log lengthscale, log signal variance, log noise variance, prior mean)
  Eigen::Vector4d to_params() const;
  static GpHyper from_params(const Eigen::Vector4d& p);
  void validate() const;

  friend bool operator==(const GpHyper&, const GpHyper&) = default;
};

/// Exact GP conditioned on (latents, targets). Immutable once built.
struct GpState {
  GpHyper hyper;
  Matrix latents;   // N x d
  Vector targets;   // N
  Matrix chol;      // lower factor of K + (noise + jitter) I
  Vector alpha;     // (K + noise I)^-1 (y - m)
  double jitter = 0.0;

  Eigen::Index size() const { return latents.rows(); }
  Eigen::Index dim() const { return latents.cols(); }
};

double rbf_kernel(const Vector& z1, const Vector& z2, const GpHyper& hyper);
Matrix kernel_matrix(const Matrix& a, const Matrix& b, const GpHyper& hyper);

/// Builds the cached factorization; throws Fit on Cholesky failure after
/// jitter escalation.
GpState condition(const Matrix& latents, const Vector& targets, const GpHyper& hyper);

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

Posterior posterior(const GpState& state, const Vector& z);

struct BatchPosterior {
  Vector mean;
  Vector variance;
  Matrix mean_grad;      // B x d, d mean / d z (filled when requested)
  Matrix variance_grad;  // B x d
};

/// Posterior for every row of zs. Variances slightly below zero from
/// roundoff (> -1e-12) clamp to 0; anything lower throws Numerical.
BatchPosterior posterior_batch(const GpState& state, const Matrix& zs, bool with_grad = false);

/// Differentiable posterior mean / variance of latent rows for use in loss
/// graphs. The GP itself is held fixed; only the latents receive gradient.
Var posterior_mean_var(const GpState& state, const Var& zs);
Var posterior_variance_var(const GpState& state, const Var& zs);

struct Nlml {
  double value = 0.0;
  Eigen::Vector4d gradient = Eigen::Vector4d::Zero();  // w.r.t. GpHyper::to_params()
};

/// Negative log marginal likelihood and its analytic gradient.
Nlml nlml(const GpHyper& hyper, const Matrix& latents, const Vector& targets);

struct FitOptions {
  int restarts = 3;
  int max_iters = 200;
  double grad_tol = 1e-6;
  double value_tol = 1e-10;  // stop when a step improves NLML by less (relative)
  double min_lengthscale = 1e-3;
  double max_lengthscale = 1e3;
  double min_noise_variance = 1e-8;
  double min_signal_variance = 1e-12;
  double max_variance = 1e8;
};

struct FitReport {
  double initial_nlml = 0.0;
  double final_nlml = 0.0;
  int iterations = 0;
  int failed_restarts = 0;
};

/// Minimizes NLML from `init` (restart 0) and restarts-1 perturbed copies.
/// The prior mean is profiled out in closed form at every evaluation.
GpState fit(const Matrix& latents, const Vector& targets, const GpHyper& init,
            const FitOptions& opt, Rng& rng, FitReport* report = nullptr);

/// Data-driven starting point: m = mean(y), s = var(y), noise = s/100.
GpHyper default_init(const Vector& targets);

}  // namespace pglbo::gp

#endif  // PGLBO_GP_HPP

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

#ifndef PGLBO_BOLOOP_HPP
#define PGLBO_BOLOOP_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pglbo/datasets.hpp"
#include "pglbo/gp.hpp"
#include "pglbo/pseudo.hpp"
#include "pglbo/sampler.hpp"
#include "pglbo/tasks.hpp"
#include "pglbo/trainer.hpp"
#include "pglbo/vae.hpp"

namespace pglbo::boloop {

enum class Variant { Lsbo, Lbo, Plbo, Glbo, Pglbo };

std::string to_string(Variant v);
/// lsbo, lbo, plbo, glbo or pglbo.
Variant parse_variant(const std::string& s);

/// Only EI is implemented; the other names are reserved.
enum class Acquisition { Ei, Pi, Ucb };

std::string to_string(Acquisition a);
Acquisition parse_acquisition(const std::string& s);

enum class PseudoSizeRule { HalfLabeled, TenTimesLabeled };

std::string to_string(PseudoSizeRule r);
PseudoSizeRule parse_size_rule(const std::string& s);
std::size_t pseudo_size(PseudoSizeRule r, std::size_t labeled);

struct BoConfig {
  std::size_t budget = 200;        // M
  std::size_t retrain_every = 25;  // r
  Acquisition acquisition = Acquisition::Ei;
  int acq_restarts = 32;
  int acq_steps = 100;
  double acq_lr = 0.05;  // fraction of the box width per step

  trainer::LossWeights loss{trainer::Schedule::linear_increase(0.5, 0.75), 1.0};
  trainer::RetrainConfig retrain;

  PseudoSizeRule size_rule = PseudoSizeRule::HalfLabeled;
  double oversample = 3.0;
  sampler::Provenance sampler = sampler::Provenance::Noise;
  double noise_sigma = 0.1;
  std::size_t top_seeds = 100;
  std::size_t cmaes_iters = 100;
  double cmaes_sigma0 = 0.25;
  sampler::CmaesOptions cmaes;

  pseudo::ThresholdMode threshold = pseudo::ThresholdMode::Dynamic;
  double fixed_tau = 0.0015;
  double ema_lambda = 0.9;

  gp::FitOptions gp_fit;        // first fit of every round and the guidance refit
  int gp_inner_restarts = 1;    // warm-started refits inside a round
  int gp_inner_max_iters = 50;

  void validate() const;
  std::size_t rounds() const { return (budget + retrain_every - 1) / retrain_every; }
};

/// EI for a Gaussian with mean mu and standard deviation sigma.
double ei_from_moments(double mu, double sigma, double best_y);
double expected_improvement(const gp::GpState& gp, const Vector& z, double best_y);

struct AcqOptions {
  int steps = 100;
  double lr = 0.05;
};

struct AcqResult {
  Vector z;
  double ei = 0.0;
  bool fallback = false;  // every start had EI = 0; returned the max-variance start
};

/// Multi-start projected ascent on EI with analytic gradients. Starts are the
/// incumbent (when given) and uniform draws in the box.
AcqResult optimize_acquisition(const gp::GpState& gp, const sampler::Box& bounds, int restarts, Rng& rng,
                               const AcqOptions& opt = {}, const Vector* incumbent = nullptr);

struct IterationRecord {
  std::size_t iteration = 0;
  std::size_t round = 0;
  bool ok = true;
  double value = 0.0;         // objective value (NaN when the evaluation failed)
  double best_so_far = 0.0;
  double ei = 0.0;
  bool fallback = false;
  double tau = 0.0;           // threshold in force (NaN without one)
  double lambda_p = 0.0;
  double lambda_g = 0.0;
  std::string note;
  Vector latent;
  Vector input;
};

struct PseudoRecord {
  std::size_t round = 0;
  std::size_t target = 0;      // N_P
  std::size_t candidates = 0;
  std::size_t passed = 0;      // candidates with variance <= tau
  std::size_t used = 0;
  double tau_used = 0.0;
  double tau_next = 0.0;
  double mean_variance = 0.0;  // over all candidates
  double mean_variance_used = 0.0;
  double mean_label = 0.0;     // over used points
  bool capped = false;
};

/// Everything needed to continue a run from a round boundary.
struct RunState {
  Variant variant = Variant::Pglbo;
  std::uint64_t seed = 0;
  std::size_t next_round = 0;
  std::size_t initial_size = 0;
  LabeledDataset labeled;
  PseudoDataset pseudo;
  vae::VaeState vae;
  std::optional<gp::GpState> guide;
  std::optional<gp::GpHyper> warm;
  std::optional<pseudo::ThresholdState> threshold;
  std::vector<IterationRecord> iterations;
  std::vector<trainer::EpochRecord> epochs;
  std::vector<PseudoRecord> pseudo_log;
  std::vector<std::uint64_t> vae_fingerprints;  // after each round's retraining
  std::size_t skipped = 0;
  std::size_t fallbacks = 0;

  bool finished(const BoConfig& cfg) const { return next_round >= cfg.rounds(); }
};

struct PhaseTimes {
  double retrain = 0.0;
  double gp = 0.0;
  double acquisition = 0.0;
  double pseudo = 0.0;
};

struct RunResult {
  Vector best_input;
  double best_value = 0.0;
  RunState state;
  PhaseTimes times;
  bool completed = false;  // false when a hook stopped the run early
};

struct RunHooks {
  /// Called after every completed round; returning false stops the run.
  std::function<bool(const RunState&)> on_round_end;
};

/// Evaluates the initial inputs; failed evaluations are dropped.
LabeledDataset initial_dataset(const tasks::Task& task, const Matrix& inputs);

RunState start_run(const BoConfig& cfg, Variant variant, const tasks::Task& task, const vae::VaeState& vae0,
                   const LabeledDataset& initial, std::uint64_t seed);

/// Continues a run from its next round.
RunResult resume(const BoConfig& cfg, const tasks::Task& task, RunState state, const RunHooks& hooks = {});

RunResult run_variant(Variant variant, const BoConfig& cfg, const tasks::Task& task, const vae::VaeState& vae0,
                      const LabeledDataset& initial, std::uint64_t seed, const RunHooks& hooks = {});

RunResult run_pg_lbo(const BoConfig& cfg, const tasks::Task& task, const vae::VaeState& vae0,
                     const LabeledDataset& initial, std::uint64_t seed, const RunHooks& hooks = {});

/// Best value so far in task units for a run state.
double best_value(const RunState& state, const tasks::Task& task);

}  // namespace pglbo::boloop

#endif  // PGLBO_BOLOOP_HPP

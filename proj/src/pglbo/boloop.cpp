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

#include "pglbo/boloop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include "pglbo/weighting.hpp"

namespace pglbo::boloop {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Lsbo: return "lsbo";
    case Variant::Lbo: return "lbo";
    case Variant::Plbo: return "plbo";
    case Variant::Glbo: return "glbo";
    case Variant::Pglbo: return "pglbo";
  }
  return "unknown";
}

Variant parse_variant(const std::string& s) {
  if (s == "lsbo") return Variant::Lsbo;
  if (s == "lbo") return Variant::Lbo;
  if (s == "plbo") return Variant::Plbo;
  if (s == "glbo") return Variant::Glbo;
  if (s == "pglbo") return Variant::Pglbo;
  fail(ErrorCode::Config, "unknown variant '" + s + "' (expected lsbo, lbo, plbo, glbo or pglbo)");
}

std::string to_string(PseudoSizeRule r) { return r == PseudoSizeRule::HalfLabeled ? "half" : "tenfold"; }

PseudoSizeRule parse_size_rule(const std::string& s) {
  if (s == "half") return PseudoSizeRule::HalfLabeled;
  if (s == "tenfold") return PseudoSizeRule::TenTimesLabeled;
  fail(ErrorCode::Config, "unknown pseudo size rule '" + s + "' (expected half or tenfold)");
}

std::size_t pseudo_size(PseudoSizeRule r, std::size_t labeled) {
  return r == PseudoSizeRule::HalfLabeled ? std::max<std::size_t>(1, labeled / 2) : 10 * labeled;
}

std::string to_string(Acquisition a) {
  switch (a) {
    case Acquisition::Ei: return "ei";
    case Acquisition::Pi: return "pi";
    case Acquisition::Ucb: return "ucb";
  }
  return "unknown";
}

Acquisition parse_acquisition(const std::string& s) {
  if (s == "ei") return Acquisition::Ei;
  if (s == "pi") return Acquisition::Pi;
  if (s == "ucb") return Acquisition::Ucb;
  fail(ErrorCode::Config, "unknown acquisition '" + s + "' (expected ei)");
}

void BoConfig::validate() const {
  require(acquisition == Acquisition::Ei, ErrorCode::Config,
          "acquisition '" + to_string(acquisition) + "' is reserved but not implemented");
  require(budget >= 1, ErrorCode::Config, "budget must be >= 1");
  require(retrain_every >= 1 && retrain_every <= budget, ErrorCode::Config,
          "retrain frequency must satisfy 1 <= r <= budget");
  require(acq_restarts >= 1 && acq_steps >= 0 && acq_lr >= 0.0, ErrorCode::Config, "invalid acquisition settings");
  loss.validate();
  require(retrain.epochs >= 0 && retrain.batch_size >= 1 && retrain.learning_rate >= 0.0, ErrorCode::Config,
          "invalid retraining settings");
  require(retrain.weights.k >= 0.0 && retrain.pseudo_weights.k >= 0.0, ErrorCode::Config, "weight k must be >= 0");
  require(oversample >= 1.0, ErrorCode::Config, "pseudo oversampling factor must be >= 1");
  require(noise_sigma > 0.0, ErrorCode::Config, "sampler noise sigma must be > 0");
  require(top_seeds >= 1, ErrorCode::Config, "seed pool size must be >= 1");
  require(cmaes_iters >= 1 && cmaes_sigma0 > 0.0, ErrorCode::Config, "invalid CMA-ES settings");
  require(cmaes.group_size >= 1 && cmaes.burn_in < cmaes_iters, ErrorCode::Config, "invalid CMA-ES grouping");
  require(fixed_tau >= 0.0, ErrorCode::Config, "fixed threshold must be >= 0");
  require(ema_lambda > 0.0 && ema_lambda < 1.0, ErrorCode::Config, "threshold decay must lie in (0, 1)");
  require(gp_fit.restarts >= 1 && gp_fit.max_iters >= 0, ErrorCode::Config, "invalid GP fit settings");
  require(gp_inner_restarts >= 1 && gp_inner_max_iters >= 0, ErrorCode::Config, "invalid inner GP fit settings");
}

// ---------------------------------------------------------------------------
// Acquisition

namespace {

double norm_cdf(double u) { return 0.5 * std::erfc(-u / std::numbers::sqrt2); }
double norm_pdf(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); }

constexpr double kSigmaFloor = 1e-12;

// Posterior through an explicit inverse: one GEMM per batch, which keeps the
// many small ascent steps cheap. Final candidates are re-scored with the
// factor-based posterior.
struct FastPosterior {
  const gp::GpState& gp;
  Matrix ainv;

  explicit FastPosterior(const gp::GpState& g)
      : gp(g), ainv(solve_with_factor(g.chol, Matrix(Matrix::Identity(g.size(), g.size())))) {}

  void eval(const Matrix& zs, Vector& mean, Vector& var, Matrix& mean_grad, Matrix& var_grad) const {
    const Matrix ks = gp::kernel_matrix(zs, gp.latents, gp.hyper);  // B x N
    mean = (ks * gp.alpha).array() + gp.hyper.prior_mean;
    const Matrix kb = ks * ainv;  // B x N
    var = (gp.hyper.signal_variance - ks.cwiseProduct(kb).rowwise().sum().array()).cwiseMax(0.0);
    const double inv_l2 = 1.0 / (gp.hyper.lengthscale * gp.hyper.lengthscale);
    const Matrix w = ks.array().rowwise() * gp.alpha.transpose().array();
    mean_grad = inv_l2 * (w * gp.latents - (zs.array().colwise() * w.rowwise().sum().array()).matrix());
    const Matrix u = ks.cwiseProduct(kb);
    var_grad = -2.0 * inv_l2 * (u * gp.latents - (zs.array().colwise() * u.rowwise().sum().array()).matrix());
  }
};

}  // namespace

double ei_from_moments(double mu, double sigma, double best_y) {
  if (!(sigma > kSigmaFloor)) return std::max(mu - best_y, 0.0);
  const double u = (mu - best_y) / sigma;
  return std::max(0.0, (mu - best_y) * norm_cdf(u) + sigma * norm_pdf(u));
}

double expected_improvement(const gp::GpState& gp, const Vector& z, double best_y) {
  const gp::Posterior p = gp::posterior(gp, z);
  return ei_from_moments(p.mean, std::sqrt(p.variance), best_y);
}

AcqResult optimize_acquisition(const gp::GpState& gp, const sampler::Box& bounds, int restarts, Rng& rng,
                               const AcqOptions& opt, const Vector* incumbent) {
  bounds.validate(true);
  require(bounds.dim() == gp.dim(), ErrorCode::Shape, "acquisition: bounds do not match the latent dimension");
  require(restarts >= 1, ErrorCode::Config, "acquisition: restarts must be >= 1");
  const double best_y = gp.targets.maxCoeff();
  const Eigen::Index d = bounds.dim();
  const auto b = static_cast<Eigen::Index>(restarts);

  Matrix z(b, d);
  Eigen::Index first_random = 0;
  if (incumbent) {
    require(incumbent->size() == d, ErrorCode::Shape, "acquisition: incumbent dimension mismatch");
    z.row(0) = bounds.clamp(*incumbent).transpose();
    first_random = 1;
  }
  for (Eigen::Index i = first_random; i < b; ++i)
    for (Eigen::Index j = 0; j < d; ++j) z(i, j) = rng.uniform(bounds.lower[j], bounds.upper[j]);
  const Matrix starts = z;

  const FastPosterior fp(gp);
  const Vector width = bounds.upper - bounds.lower;
  Vector mean, var;
  Matrix mg, vg;
  Matrix m1 = Matrix::Zero(b, d), m2 = Matrix::Zero(b, d);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-12;

  Matrix best_z = z;
  Vector best_ei = Vector::Constant(b, -1.0);
  Vector start_var;
  for (int step = 0; step <= opt.steps; ++step) {
    fp.eval(z, mean, var, mg, vg);
    if (step == 0) start_var = var;
    Matrix grad(b, d);
    for (Eigen::Index i = 0; i < b; ++i) {
      const double sigma = std::sqrt(var[i]);
      const double ei = ei_from_moments(mean[i], sigma, best_y);
      if (ei > best_ei[i]) {
        best_ei[i] = ei;
        best_z.row(i) = z.row(i);
      }
      if (sigma > kSigmaFloor) {
        const double u = (mean[i] - best_y) / sigma;
        grad.row(i) = norm_cdf(u) * mg.row(i) + (norm_pdf(u) / (2.0 * sigma)) * vg.row(i);
      } else {
        grad.row(i) = (mean[i] > best_y ? 1.0 : 0.0) * mg.row(i);
      }
    }
    if (step == opt.steps) break;
    // Adam ascent with a linearly decaying step, projected onto the box.
    const double t = static_cast<double>(step + 1);
    const double lr = opt.lr * (1.0 - static_cast<double>(step) / static_cast<double>(opt.steps));
    m1 = beta1 * m1 + (1.0 - beta1) * grad;
    m2 = beta2 * m2 + (1.0 - beta2) * grad.cwiseProduct(grad);
    const Matrix mhat = m1 / (1.0 - std::pow(beta1, t));
    const Matrix vhat = m2 / (1.0 - std::pow(beta2, t));
    Matrix delta = mhat.array() / (vhat.array().sqrt() + eps);
    delta = delta.array().rowwise() * (lr * width.transpose().array());
    z += delta;
    for (Eigen::Index i = 0; i < b; ++i) z.row(i) = bounds.clamp(z.row(i).transpose()).transpose();
  }

  // Re-score the per-start best points with the factor-based posterior.
  const gp::BatchPosterior exact = gp::posterior_batch(gp, best_z);
  AcqResult out;
  out.ei = -1.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double ei = ei_from_moments(exact.mean[i], std::sqrt(exact.variance[i]), best_y);
    if (ei > out.ei) {
      out.ei = ei;
      out.z = best_z.row(i).transpose();
    }
  }
  if (out.ei <= 0.0) {
    Eigen::Index arg = 0;
    start_var.maxCoeff(&arg);
    out.z = starts.row(arg).transpose();
    out.ei = 0.0;
    out.fallback = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run loop

namespace {

enum Stream : std::uint64_t { kTrain = 1, kBo = 2, kGuide = 3, kSampler = 4 };

Rng stream(std::uint64_t seed, Stream kind, std::size_t round) {
  return Rng(seed).substream((static_cast<std::uint64_t>(kind) << 32) + round);
}

double sign(const tasks::Task& t) { return t.maximize ? 1.0 : -1.0; }

bool uses_pseudo(Variant v) { return v == Variant::Plbo || v == Variant::Glbo || v == Variant::Pglbo; }

trainer::LossWeights effective_weights(Variant v, const trainer::LossWeights& w) {
  trainer::LossWeights out = w;
  if (v == Variant::Lsbo || v == Variant::Lbo) {
    out.lambda_p = trainer::Schedule::fixed(0.0);
    out.lambda_g = 0.0;
  } else if (v == Variant::Plbo) {
    out.lambda_g = 0.0;
  } else if (v == Variant::Glbo) {
    out.lambda_p = trainer::Schedule::fixed(0.0);
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Timer {
  double& acc;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  ~Timer() { acc += seconds_since(t0); }
};

double current_best(const RunState& s) {
  return s.labeled.empty() ? -std::numeric_limits<double>::infinity() : s.labeled.scores.maxCoeff();
}

void build_pseudo(const BoConfig& cfg, RunState& s, const tasks::Task& task, std::size_t round) {
  Rng rng = stream(s.seed, kSampler, round);
  const gp::GpState& g = *s.guide;
  const std::size_t target = pseudo_size(cfg.size_rule, static_cast<std::size_t>(s.labeled.size()));
  const auto n_cand = static_cast<std::size_t>(std::ceil(cfg.oversample * static_cast<double>(target)));
  const Vector w = weighting::rank_weights(s.labeled.scores, cfg.retrain.weights);

  sampler::SampleBatch batch;
  switch (cfg.sampler) {
    case sampler::Provenance::Noise:
      batch = sampler::noisy_sample(g.latents, w, n_cand, cfg.noise_sigma, rng, cfg.top_seeds);
      break;
    case sampler::Provenance::Cmaes: {
      sampler::CmaesOptions opt = cfg.cmaes;
      opt.cap = opt.cap ? std::min(opt.cap, n_cand) : n_cand;
      const Matrix seeds = take_rows(g.latents, sampler::seed_pool(w, cfg.top_seeds));
      batch = sampler::cmaes_sample(g, seeds, cfg.cmaes_iters, cfg.cmaes_sigma0, rng, opt);
      break;
    }
    case sampler::Provenance::Random:
      batch = sampler::random_sample(sampler::latent_box(g.latents), n_cand, rng);
      break;
  }
  const pseudo::Labels lab = pseudo::assign_pseudo_labels(g, batch.latents);

  PseudoRecord rec;
  rec.round = round;
  rec.target = target;
  rec.candidates = static_cast<std::size_t>(batch.size());
  rec.capped = batch.capped;
  rec.mean_variance = batch.size() ? pseudo::ordered_mean(lab.variances) : 0.0;

  std::vector<std::size_t> passed;
  switch (cfg.threshold) {
    case pseudo::ThresholdMode::Dynamic: {
      if (!s.threshold) {
        // Presample of ceil(N_P / 10) candidates sets the initial threshold.
        const auto n0 = std::min<Eigen::Index>(batch.size(), static_cast<Eigen::Index>((target + 9) / 10));
        s.threshold = pseudo::init_threshold(g, batch.latents.topRows(std::max<Eigen::Index>(n0, 1)), cfg.ema_lambda);
      }
      rec.tau_used = s.threshold->tau;
      passed = pseudo::filter_by_uncertainty(batch.latents, lab.variances, *s.threshold);
      s.threshold = pseudo::update_threshold(*s.threshold, lab.variances);
      rec.tau_next = s.threshold->tau;
      break;
    }
    case pseudo::ThresholdMode::Fixed: {
      pseudo::ThresholdState fixed;
      fixed.tau = cfg.fixed_tau;
      fixed.lambda = cfg.ema_lambda;
      rec.tau_used = rec.tau_next = fixed.tau;
      passed = pseudo::filter_by_uncertainty(batch.latents, lab.variances, fixed);
      break;
    }
    case pseudo::ThresholdMode::None:
      rec.tau_used = rec.tau_next = std::numeric_limits<double>::infinity();
      passed = pseudo::filter_by_uncertainty(batch.latents, lab.variances, pseudo::ThresholdState::unbounded());
      break;
  }
  rec.passed = passed.size();
  const std::vector<std::size_t> used = pseudo::lowest_variance(passed, lab.variances, target);
  rec.used = used.size();
  const Vector used_labels = take(lab.labels, used);
  s.pseudo = pseudo::build_pseudo_dataset(s.vae, take_rows(batch.latents, used), used_labels,
                                          cfg.retrain.pseudo_weights);
  for (Eigen::Index i = 0; i < s.pseudo.inputs.rows(); ++i)
    s.pseudo.inputs.row(i) = task.codec(s.pseudo.inputs.row(i).transpose()).transpose();
  if (!used.empty()) {
    rec.mean_label = sign(task) * pseudo::ordered_mean(used_labels);
    rec.mean_variance_used = pseudo::ordered_mean(take(lab.variances, used));
  }
  s.pseudo_log.push_back(rec);
}

}  // namespace

LabeledDataset initial_dataset(const tasks::Task& task, const Matrix& inputs) {
  LabeledDataset d;
  d.inputs.resize(0, inputs.cols());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    const Vector x = inputs.row(i).transpose();
    const tasks::EvalResult r = task.evaluate(x);
    if (r.ok) d.append(x, sign(task) * r.value);
  }
  return d;
}

RunState start_run(const BoConfig& cfg, Variant variant, const tasks::Task& task, const vae::VaeState& vae0,
                   const LabeledDataset& initial, std::uint64_t seed) {
  cfg.validate();
  vae0.validate();
  require(initial.size() >= 2, ErrorCode::InvalidArgument, "run: need at least two initial labeled points");
  require(static_cast<std::size_t>(initial.inputs.cols()) == task.input_dim &&
              vae0.arch.input_dim == task.input_dim,
          ErrorCode::Shape, "run: task, data and VAE input dimensions differ");
  RunState s;
  s.variant = variant;
  s.seed = seed;
  s.labeled = initial;
  s.initial_size = static_cast<std::size_t>(initial.size());
  s.vae = vae0;
  s.pseudo.inputs.resize(0, initial.inputs.cols());
  s.pseudo.latents.resize(0, static_cast<Eigen::Index>(vae0.arch.latent_dim));
  return s;
}

RunResult resume(const BoConfig& cfg, const tasks::Task& task, RunState s, const RunHooks& hooks) {
  cfg.validate();
  const std::size_t rounds = cfg.rounds();
  const trainer::LossWeights lw = effective_weights(s.variant, cfg.loss);
  const double sg = sign(task);
  RunResult res;

  while (s.next_round < rounds) {
    const std::size_t round = s.next_round;
    const double lambda_p = trainer::schedule_value(lw.lambda_p, round, rounds);

    // Guidance needs a GP before any pseudo data exists.
    if (lw.lambda_g > 0.0 && !s.guide) {
      Timer tm{res.times.gp};
      Rng rng = stream(s.seed, kGuide, rounds);
      s.guide = trainer::refit_gp_on_reencoded(s.vae, s.labeled, gp::default_init(s.labeled.scores), cfg.gp_fit, rng);
    }
    if (s.variant != Variant::Lsbo) {
      Timer tm{res.times.retrain};
      Rng rng = stream(s.seed, kTrain, round);
      s.vae = trainer::retrain_vae(s.vae, s.guide ? &*s.guide : nullptr, s.labeled, s.pseudo, lw, round, rounds,
                                   cfg.retrain, rng, &s.epochs);
    }
    s.vae_fingerprints.push_back(s.vae.fingerprint());

    Matrix dz = trainer::encode_means(s.vae, s.labeled.inputs);
    const sampler::Box box = sampler::latent_box(dz);
    Rng bo = stream(s.seed, kBo, round);
    const std::size_t first = round * cfg.retrain_every;
    const std::size_t last = std::min(cfg.budget, first + cfg.retrain_every);
    gp::GpHyper hyper = s.warm ? *s.warm : gp::default_init(s.labeled.scores);
    for (std::size_t it = first; it < last; ++it) {
      gp::FitOptions fo = cfg.gp_fit;
      if (it != first) {
        fo.restarts = cfg.gp_inner_restarts;
        fo.max_iters = cfg.gp_inner_max_iters;
      }
      gp::GpState g;
      {
        Timer tm{res.times.gp};
        g = gp::fit(dz, s.labeled.scores, hyper, fo, bo);
      }
      hyper = g.hyper;
      s.warm = g.hyper;

      AcqResult acq;
      {
        Timer tm{res.times.acquisition};
        Eigen::Index arg = 0;
        s.labeled.scores.maxCoeff(&arg);
        const Vector inc = dz.row(arg).transpose();
        acq = optimize_acquisition(g, box, cfg.acq_restarts, bo, AcqOptions{cfg.acq_steps, cfg.acq_lr}, &inc);
      }
      const Vector x = task.codec(vae::decode(s.vae, acq.z));
      const tasks::EvalResult ev = task.evaluate(x);

      IterationRecord rec;
      rec.iteration = it;
      rec.round = round;
      rec.ok = ev.ok;
      rec.note = ev.note;
      rec.ei = acq.ei;
      rec.fallback = acq.fallback;
      rec.lambda_p = lambda_p;
      rec.lambda_g = lw.lambda_g;
      rec.tau = s.threshold && cfg.threshold == pseudo::ThresholdMode::Dynamic ? s.threshold->tau
                : cfg.threshold == pseudo::ThresholdMode::Fixed && uses_pseudo(s.variant)
                    ? cfg.fixed_tau
                    : std::numeric_limits<double>::quiet_NaN();
      rec.latent = acq.z;
      rec.input = x;
      if (ev.ok) {
        rec.value = ev.value;
        s.labeled.append(x, sg * ev.value);
        dz.conservativeResize(dz.rows() + 1, Eigen::NoChange);
        dz.row(dz.rows() - 1) = acq.z.transpose();
      } else {
        rec.value = std::numeric_limits<double>::quiet_NaN();
        ++s.skipped;
      }
      if (acq.fallback) ++s.fallbacks;
      rec.best_so_far = sg * current_best(s);
      s.iterations.push_back(std::move(rec));
    }

    if (uses_pseudo(s.variant) && round + 1 < rounds) {
      Timer tm{res.times.pseudo};
      Rng rng = stream(s.seed, kGuide, round);
      const gp::GpHyper init = s.warm ? *s.warm : gp::default_init(s.labeled.scores);
      gp::FitOptions fo = cfg.gp_fit;
      fo.restarts = cfg.gp_inner_restarts;
      s.guide = trainer::refit_gp_on_reencoded(s.vae, s.labeled, init, fo, rng);
      build_pseudo(cfg, s, task, round);
    }
    s.next_round = round + 1;
    if (hooks.on_round_end && !hooks.on_round_end(s)) break;
  }

  Eigen::Index arg = 0;
  s.labeled.scores.maxCoeff(&arg);
  res.best_input = s.labeled.inputs.row(arg).transpose();
  res.best_value = sg * s.labeled.scores[arg];
  res.completed = s.finished(cfg);
  res.state = std::move(s);
  return res;
}

RunResult run_variant(Variant variant, const BoConfig& cfg, const tasks::Task& task, const vae::VaeState& vae0,
                      const LabeledDataset& initial, std::uint64_t seed, const RunHooks& hooks) {
  return resume(cfg, task, start_run(cfg, variant, task, vae0, initial, seed), hooks);
}

RunResult run_pg_lbo(const BoConfig& cfg, const tasks::Task& task, const vae::VaeState& vae0,
                     const LabeledDataset& initial, std::uint64_t seed, const RunHooks& hooks) {
  return run_variant(Variant::Pglbo, cfg, task, vae0, initial, seed, hooks);
}

double best_value(const RunState& state, const tasks::Task& task) { return sign(task) * current_best(state); }

}  // namespace pglbo::boloop

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

#include "pglbo/trainer.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "pglbo/autodiff.hpp"

namespace pglbo::trainer {

Schedule Schedule::parse(const std::string& s) {
  auto number = [&](const std::string& t) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    require(pos == t.size() && !t.empty(), ErrorCode::Config, "schedule: cannot parse '" + s + "'");
    return v;
  };
  Schedule out;
  const std::string prefix = "linear:";
  if (s.rfind(prefix, 0) == 0) {
    const std::string rest = s.substr(prefix.size());
    const auto comma = rest.find(',');
    require(comma != std::string::npos, ErrorCode::Config, "schedule: expected linear:<start>,<end>");
    out = linear_increase(number(rest.substr(0, comma)), number(rest.substr(comma + 1)));
  } else {
    out = fixed(number(s));
  }
  out.validate();
  return out;
}

std::string Schedule::to_string() const {
  auto num = [](double v) {
    char buf[64];
    return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
  };
  return linear ? "linear:" + num(start) + "," + num(end) : num(start);
}

void Schedule::validate() const {
  require(std::isfinite(start) && std::isfinite(end) && start >= 0.0 && end >= 0.0, ErrorCode::Config,
          "schedule: values must be finite and >= 0");
  require(start <= end, ErrorCode::Config, "schedule: start must not exceed end");
  require(linear || start == end, ErrorCode::Config, "schedule: fixed schedule with differing endpoints");
}

double schedule_value(const Schedule& s, std::size_t round, std::size_t total_rounds) {
  require(total_rounds >= 1, ErrorCode::InvalidArgument, "schedule: total rounds must be >= 1");
  require(round < total_rounds, ErrorCode::InvalidArgument, "schedule: round out of range");
  if (!s.linear || total_rounds == 1) return s.start;
  const double frac = static_cast<double>(round) / static_cast<double>(std::max<std::size_t>(total_rounds - 1, 1));
  return s.start + (s.end - s.start) * frac;
}

void LossWeights::validate() const {
  lambda_p.validate();
  require(std::isfinite(lambda_g) && lambda_g >= 0.0, ErrorCode::Config, "lambda_g must be finite and >= 0");
}

namespace {

void check_batch(const LabeledBatch& b, std::size_t latent_dim) {
  require(b.weights.size() == b.xs.rows() && b.targets.size() == b.xs.rows(), ErrorCode::Shape,
          "labeled batch: inputs, targets and weights must align");
  require(b.eps.rows() == b.xs.rows() && b.eps.cols() == static_cast<Eigen::Index>(latent_dim), ErrorCode::Shape,
          "labeled batch: noise shape mismatch");
}

void check_batch(const PseudoBatch& b, std::size_t latent_dim) {
  require(b.weights.size() == b.xs.rows(), ErrorCode::Shape, "pseudo batch: inputs and weights must align");
  require(b.eps.rows() == b.xs.rows() && b.eps.cols() == static_cast<Eigen::Index>(latent_dim), ErrorCode::Shape,
          "pseudo batch: noise shape mismatch");
}

vae::LossGrad collect(const Var& loss, const vae::Params& p) {
  vae::LossGrad g;
  g.loss = loss.scalar();
  for (const auto& v : p.encoder) g.encoder_grad.push_back(v.grad());
  for (const auto& v : p.decoder) g.decoder_grad.push_back(v.grad());
  return g;
}

Var weighted_sum(Tape& t, const Var& rows, const Vector& w) { return ad::sum(ad::mul(rows, t.constant(Matrix(w)))); }

}  // namespace

vae::LossGrad guidance_loss(const vae::VaeState& vae, const gp::GpState& gp, const LabeledBatch& labeled,
                            const PseudoBatch& pseudo) {
  const auto& arch = vae.arch;
  check_batch(labeled, arch.latent_dim);
  check_batch(pseudo, arch.latent_dim);
  require(gp.size() >= 1, ErrorCode::State, "guidance loss: GP is not fitted");
  require(gp.dim() == static_cast<Eigen::Index>(arch.latent_dim), ErrorCode::Shape,
          "guidance loss: GP dimension does not match the latent space");
  Tape t;
  vae::Params p = vae::bind(t, vae, true, false);
  Var loss = t.constant(Matrix::Zero(1, 1));
  if (labeled.xs.rows() > 0) {
    vae::EncoderOut e = vae::encoder_forward(arch, p.encoder, t.constant(labeled.xs));
    Var mu = gp::posterior_mean_var(gp, vae::sample_latent(e, labeled.eps));
    Var err = ad::square(ad::sub(t.constant(Matrix(labeled.targets)), mu));
    loss = ad::add(loss, weighted_sum(t, err, labeled.weights));
  }
  if (!pseudo.empty()) {
    vae::EncoderOut e = vae::encoder_forward(arch, p.encoder, t.constant(pseudo.xs));
    Var var = gp::posterior_variance_var(gp, vae::sample_latent(e, pseudo.eps));
    loss = ad::add(loss, weighted_sum(t, var, pseudo.weights));
  }
  if (!t.requires_grad(loss.id())) return vae::zero_grad(vae);
  t.backward(loss);
  return collect(loss, p);
}

vae::LossGrad guidance_loss_LG(const vae::VaeState& vae, const gp::GpState& gp, const Matrix& labeled_xs,
                               const Vector& targets, const Vector& weights, const Matrix& pseudo_xs,
                               const Vector& pseudo_weights, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(vae.arch.latent_dim);
  LabeledBatch l{labeled_xs, targets, weights, rng.normal_matrix(labeled_xs.rows(), d)};
  PseudoBatch ps{pseudo_xs, pseudo_weights, rng.normal_matrix(pseudo_xs.rows(), d)};
  return guidance_loss(vae, gp, l, ps);
}

TotalLoss total_loss(const vae::VaeState& vae, const gp::GpState* gp, const LabeledBatch& labeled,
                     const PseudoBatch& pseudo, const RoundLambdas& lambdas) {
  const auto& arch = vae.arch;
  check_batch(labeled, arch.latent_dim);
  check_batch(pseudo, arch.latent_dim);
  require(lambdas.lambda_p >= 0.0 && lambdas.lambda_g >= 0.0, ErrorCode::Config, "loss weights must be >= 0");
  require(labeled.xs.rows() > 0, ErrorCode::InvalidArgument, "total loss: labeled batch is empty");
  const bool guide = lambdas.lambda_g > 0.0;
  if (guide) {
    require(gp != nullptr && gp->size() >= 1, ErrorCode::State, "total loss: GP guidance requires a fitted GP");
    require(gp->dim() == static_cast<Eigen::Index>(arch.latent_dim), ErrorCode::Shape,
            "total loss: GP dimension does not match the latent space");
  }
  const bool use_pseudo = !pseudo.empty() && (lambdas.lambda_p > 0.0 || guide);

  Tape t;
  vae::Params p = vae::bind(t, vae);
  TotalLoss out;

  Var xl = t.constant(labeled.xs);
  vae::EncoderOut el = vae::encoder_forward(arch, p.encoder, xl);
  Var zl = vae::sample_latent(el, labeled.eps);
  Var recon_l = vae::recon_loglik_rows(arch, vae::decoder_forward(arch, p.decoder, zl), xl);
  Var l_l = weighted_sum(t, ad::sub(vae::kl_rows(el), recon_l), labeled.weights);
  Var total = l_l;
  out.parts.labeled = l_l.scalar();

  Var l_g;
  if (guide) {
    Var mu = gp::posterior_mean_var(*gp, zl);
    l_g = weighted_sum(t, ad::square(ad::sub(t.constant(Matrix(labeled.targets)), mu)), labeled.weights);
  }
  if (use_pseudo) {
    Var xp = t.constant(pseudo.xs);
    vae::EncoderOut ep = vae::encoder_forward(arch, p.encoder, xp);
    Var zp = vae::sample_latent(ep, pseudo.eps);
    if (lambdas.lambda_p > 0.0) {
      Var recon_p = vae::recon_loglik_rows(arch, vae::decoder_forward(arch, p.decoder, zp), xp);
      Var l_p = weighted_sum(t, ad::sub(vae::kl_rows(ep), recon_p), pseudo.weights);
      out.parts.pseudo = l_p.scalar();
      total = ad::add(total, ad::scale(l_p, lambdas.lambda_p));
    }
    if (guide) l_g = ad::add(l_g, weighted_sum(t, gp::posterior_variance_var(*gp, zp), pseudo.weights));
  }
  if (guide) {
    out.parts.guidance = l_g.scalar();
    total = ad::add(total, ad::scale(l_g, lambdas.lambda_g));
  }
  t.backward(total);
  out.grad = collect(total, p);
  out.parts.total = out.grad.loss;
  return out;
}

namespace {

std::vector<std::size_t> weighted_indices(const Vector& w, std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  const std::span<const double> ws(w.data(), static_cast<std::size_t>(w.size()));
  for (auto& i : idx) i = rng.categorical(ws);
  return idx;
}

std::string describe(const LossBreakdown& l) {
  std::ostringstream os;
  os << "L_L=" << l.labeled << " L_P=" << l.pseudo << " L_G=" << l.guidance << " total=" << l.total;
  return os.str();
}

}  // namespace

vae::VaeState retrain_vae(const vae::VaeState& vae, const gp::GpState* gp, const LabeledDataset& labeled,
                          const PseudoDataset& pseudo, const LossWeights& weights, std::size_t round,
                          std::size_t total_rounds, const RetrainConfig& cfg, Rng& rng,
                          std::vector<EpochRecord>* log) {
  require(!labeled.empty(), ErrorCode::InvalidArgument, "retrain: labeled dataset is empty");
  require(cfg.epochs >= 0, ErrorCode::Config, "retrain: epochs must be >= 0");
  require(cfg.batch_size >= 1, ErrorCode::Config, "retrain: batch size must be >= 1");
  weights.validate();
  RoundLambdas lam{schedule_value(weights.lambda_p, round, total_rounds), weights.lambda_g};
  vae::VaeState state = vae;
  if (cfg.epochs == 0) return state;

  const Vector w = weighting::rank_weights(labeled.scores, cfg.weights);
  const bool use_pseudo = !pseudo.empty() && (lam.lambda_p > 0.0 || lam.lambda_g > 0.0);
  const Vector pw = use_pseudo ? weighting::rank_weights(pseudo.labels, cfg.pseudo_weights) : Vector();
  // Pseudo draws come from their own stream so the labeled stream is the
  // same whether or not a pseudo term is active.
  Rng prng = rng.substream(0x50534555ULL);

  const auto d = static_cast<Eigen::Index>(state.arch.latent_dim);
  const std::size_t b = cfg.batch_size;
  const std::size_t steps = (static_cast<std::size_t>(labeled.size()) + b - 1) / b;
  const Vector uniform = Vector::Constant(static_cast<Eigen::Index>(b), 1.0 / static_cast<double>(b));

  Adam adam(cfg.learning_rate);
  std::vector<Matrix> params = state.encoder;
  params.insert(params.end(), state.decoder.begin(), state.decoder.end());
  const std::size_t ne = state.encoder.size();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    LossBreakdown sum;
    for (std::size_t s = 0; s < steps; ++s) {
      const auto li = weighted_indices(w, b, rng);
      LabeledBatch lb{take_rows(labeled.inputs, li), take(labeled.scores, li), uniform,
                      rng.normal_matrix(static_cast<Eigen::Index>(b), d)};
      PseudoBatch pb{Matrix(0, labeled.inputs.cols()), Vector(), Matrix(0, d)};
      if (use_pseudo) {
        const auto pi = weighted_indices(pw, b, prng);
        pb = {take_rows(pseudo.inputs, pi), uniform, prng.normal_matrix(static_cast<Eigen::Index>(b), d)};
      }
      TotalLoss tl = total_loss(state, gp, lb, pb, lam);
      if (!std::isfinite(tl.parts.total))
        fail(ErrorCode::Training, "retrain: non-finite loss in round " + std::to_string(round) + ", epoch " +
                                      std::to_string(epoch) + " (" + describe(tl.parts) + ")");
      std::vector<Matrix> grads = std::move(tl.grad.encoder_grad);
      grads.insert(grads.end(), tl.grad.decoder_grad.begin(), tl.grad.decoder_grad.end());
      adam.step(params, grads);
      for (std::size_t i = 0; i < ne; ++i) state.encoder[i] = params[i];
      for (std::size_t i = 0; i < state.decoder.size(); ++i) state.decoder[i] = params[ne + i];
      sum.labeled += tl.parts.labeled;
      sum.pseudo += tl.parts.pseudo;
      sum.guidance += tl.parts.guidance;
      sum.total += tl.parts.total;
    }
    if (log) {
      const double n = static_cast<double>(steps);
      EpochRecord r;
      r.round = round;
      r.epoch = static_cast<std::size_t>(epoch);
      r.loss = {sum.labeled / n, sum.pseudo / n, sum.guidance / n, sum.total / n};
      r.lambda_p = lam.lambda_p;
      r.lambda_g = lam.lambda_g;
      log->push_back(r);
    }
  }
  return state;
}

Matrix encode_means(const vae::VaeState& vae, const Matrix& inputs) {
  Matrix mu, logvar;
  vae::encode_batch(vae, inputs, &mu, &logvar);
  return mu;
}

gp::GpState refit_gp_on_reencoded(const vae::VaeState& vae, const LabeledDataset& labeled, const gp::GpHyper& init,
                                  const gp::FitOptions& opt, Rng& rng) {
  require(!labeled.empty(), ErrorCode::InvalidArgument, "refit: labeled dataset is empty");
  return gp::fit(encode_means(vae, labeled.inputs), labeled.scores, init, opt, rng);
}

}  // namespace pglbo::trainer

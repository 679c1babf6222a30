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

#include "pglbo/vae.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <numeric>

#include "pglbo/datasets.hpp"

namespace pglbo::vae {

void VaeArch::validate() const {
  require(input_dim >= 1, ErrorCode::Config, "VaeArch: input_dim must be >= 1");
  require(latent_dim >= 1, ErrorCode::Config, "VaeArch: latent_dim must be >= 1");
  require(!hidden.empty(), ErrorCode::Config, "VaeArch: hidden widths must be nonempty");
  for (auto h : hidden) require(h >= 1, ErrorCode::Config, "VaeArch: hidden width must be >= 1");
}

namespace {

std::vector<std::size_t> encoder_dims(const VaeArch& a) {
  std::vector<std::size_t> d{a.input_dim};
  d.insert(d.end(), a.hidden.begin(), a.hidden.end());
  d.push_back(2 * a.latent_dim);
  return d;
}

std::vector<std::size_t> decoder_dims(const VaeArch& a) {
  std::vector<std::size_t> d{a.latent_dim};
  d.insert(d.end(), a.hidden.rbegin(), a.hidden.rend());
  d.push_back(a.input_dim);
  return d;
}

std::vector<Matrix> init_mlp(const std::vector<std::size_t>& dims, Rng& rng) {
  std::vector<Matrix> p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(dims[l]);
    const auto out = static_cast<Eigen::Index>(dims[l + 1]);
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    Matrix w(in, out);
    for (Eigen::Index i = 0; i < in; ++i)
      for (Eigen::Index j = 0; j < out; ++j) w(i, j) = rng.uniform(-a, a);
    p.push_back(std::move(w));
    p.push_back(Matrix::Zero(1, out));
  }
  return p;
}

void check_mlp(const std::vector<Matrix>& p, const std::vector<std::size_t>& dims, const char* which) {
  require(p.size() == 2 * (dims.size() - 1), ErrorCode::Shape,
          std::string("VaeState: wrong ") + which + " layer count");
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(dims[l]);
    const auto out = static_cast<Eigen::Index>(dims[l + 1]);
    require(p[2 * l].rows() == in && p[2 * l].cols() == out && p[2 * l + 1].rows() == 1 &&
                p[2 * l + 1].cols() == out,
            ErrorCode::Shape, std::string("VaeState: ") + which + " parameter shape mismatch");
    require(p[2 * l].allFinite() && p[2 * l + 1].allFinite(), ErrorCode::Numerical,
            std::string("VaeState: non-finite ") + which + " parameters");
  }
}

// Plain forward pass (no tape) for inference.
Matrix mlp_forward(const std::vector<Matrix>& p, const Matrix& x) {
  Matrix h = x;
  const std::size_t layers = p.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix next = h * p[2 * l];
    next.rowwise() += p[2 * l + 1].row(0);
    if (l + 1 < layers) next = next.array().tanh();
    h = std::move(next);
  }
  return h;
}

Var mlp_graph(const std::vector<Var>& p, const Var& x) {
  Var h = x;
  const std::size_t layers = p.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    h = ad::add_row(ad::matmul(h, p[2 * l]), p[2 * l + 1]);
    if (l + 1 < layers) h = ad::tanh(h);
  }
  return h;
}

double stable_sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

VaeState VaeState::init(const VaeArch& arch, Rng& rng) {
  arch.validate();
  VaeState s;
  s.arch = arch;
  s.encoder = init_mlp(encoder_dims(arch), rng);
  s.decoder = init_mlp(decoder_dims(arch), rng);
  return s;
}

void VaeState::validate() const {
  arch.validate();
  check_mlp(encoder, encoder_dims(arch), "encoder");
  check_mlp(decoder, decoder_dims(arch), "decoder");
}

std::uint64_t VaeState::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const Matrix& m) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(m.size()) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& m : encoder) mix(m);
  for (const auto& m : decoder) mix(m);
  return h;
}

std::size_t VaeState::parameter_count() const {
  std::size_t n = 0;
  for (const auto& m : encoder) n += static_cast<std::size_t>(m.size());
  for (const auto& m : decoder) n += static_cast<std::size_t>(m.size());
  return n;
}

void encode_batch(const VaeState& state, const Matrix& xs, Matrix* mu, Matrix* logvar) {
  require(static_cast<std::size_t>(xs.cols()) == state.arch.input_dim, ErrorCode::Shape,
          "encode: input dimension mismatch");
  const auto d = static_cast<Eigen::Index>(state.arch.latent_dim);
  Matrix out = mlp_forward(state.encoder, xs);
  if (mu) *mu = out.leftCols(d);
  if (logvar) *logvar = out.rightCols(d).cwiseMax(kLogvarMin).cwiseMin(kLogvarMax);
}

EncodedPosterior encode(const VaeState& state, const Vector& x) {
  Matrix mu, lv;
  encode_batch(state, x.transpose(), &mu, &lv);
  return {mu.row(0).transpose(), lv.row(0).transpose()};
}

Vector reparameterize(const EncodedPosterior& post, Rng& rng) {
  require(post.mu.size() == post.logvar.size(), ErrorCode::Shape, "reparameterize: shape mismatch");
  Vector z(post.mu.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    z[i] = post.mu[i] + std::exp(0.5 * post.logvar[i]) * rng.normal();
  return z;
}

Matrix decode_batch(const VaeState& state, const Matrix& zs) {
  require(static_cast<std::size_t>(zs.cols()) == state.arch.latent_dim, ErrorCode::Shape,
          "decode: latent dimension mismatch");
  Matrix out = mlp_forward(state.decoder, zs);
  if (state.arch.likelihood == Likelihood::Bernoulli) out = out.unaryExpr(&stable_sigmoid);
  return out;
}

Vector decode(const VaeState& state, const Vector& z) {
  return decode_batch(state, z.transpose()).row(0).transpose();
}

ElboTerms elbo_terms(const VaeState& state, const Vector& x, const Vector& z) {
  require(static_cast<std::size_t>(x.size()) == state.arch.input_dim, ErrorCode::Shape,
          "elbo_terms: input dimension mismatch");
  const EncodedPosterior post = encode(state, x);
  const Vector out = decode(state, z);
  ElboTerms t;
  if (state.arch.likelihood == Likelihood::Bernoulli) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double p = std::clamp(out[i], kProbClamp, 1.0 - kProbClamp);
      t.recon_loglik += x[i] * std::log(p) + (1.0 - x[i]) * std::log(1.0 - p);
    }
  } else {
    t.recon_loglik = -0.5 * (x - out).squaredNorm() -
                     0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi);
  }
  t.kl = 0.5 * (post.logvar.array().exp() + post.mu.array().square() - 1.0 - post.logvar.array()).sum();
  return t;
}

Params bind(Tape& tape, const VaeState& state, bool encoder_grad, bool decoder_grad) {
  Params p;
  for (const auto& m : state.encoder) p.encoder.push_back(encoder_grad ? tape.variable(m) : tape.constant(m));
  for (const auto& m : state.decoder) p.decoder.push_back(decoder_grad ? tape.variable(m) : tape.constant(m));
  return p;
}

EncoderOut encoder_forward(const VaeArch& arch, const std::vector<Var>& enc, const Var& xs) {
  require(static_cast<std::size_t>(xs.cols()) == arch.input_dim, ErrorCode::Shape,
          "encode: input dimension mismatch");
  const auto d = static_cast<Eigen::Index>(arch.latent_dim);
  Var out = mlp_graph(enc, xs);
  return {ad::cols(out, 0, d), ad::clamp(ad::cols(out, d, d), kLogvarMin, kLogvarMax)};
}

Var sample_latent(const EncoderOut& enc, const Matrix& eps) {
  require(eps.rows() == enc.mu.rows() && eps.cols() == enc.mu.cols(), ErrorCode::Shape,
          "sample_latent: noise shape mismatch");
  Tape& t = *enc.mu.tape();
  Var sigma = ad::exp(ad::scale(enc.logvar, 0.5));
  return ad::add(enc.mu, ad::mul(sigma, t.constant(eps)));
}

Var decoder_forward(const VaeArch& arch, const std::vector<Var>& dec, const Var& zs) {
  require(static_cast<std::size_t>(zs.cols()) == arch.latent_dim, ErrorCode::Shape,
          "decode: latent dimension mismatch");
  return mlp_graph(dec, zs);
}

Var recon_loglik_rows(const VaeArch& arch, const Var& decoder_out, const Var& xs) {
  Tape& t = *xs.tape();
  if (arch.likelihood == Likelihood::Bernoulli) {
    Var p = ad::clamp(ad::sigmoid(decoder_out), kProbClamp, 1.0 - kProbClamp);
    Var one_minus_x = t.constant((1.0 - xs.value().array()).matrix());
    Var one_minus_p = ad::add_scalar(ad::scale(p, -1.0), 1.0);
    return ad::row_sum(ad::add(ad::mul(xs, ad::log(p)), ad::mul(one_minus_x, ad::log(one_minus_p))));
  }
  const double c = 0.5 * static_cast<double>(arch.input_dim) * std::log(2.0 * std::numbers::pi);
  return ad::add_scalar(ad::scale(ad::row_sum(ad::square(ad::sub(xs, decoder_out))), -0.5), -c);
}

Var kl_rows(const EncoderOut& enc) {
  Var terms = ad::sub(ad::add(ad::exp(enc.logvar), ad::square(enc.mu)), ad::add_scalar(enc.logvar, 1.0));
  return ad::scale(ad::row_sum(terms), 0.5);
}

Var weighted_elbo_graph(Tape& tape, const VaeArch& arch, const Params& params, const Matrix& xs,
                        const Vector& weights, const Matrix& eps) {
  require(weights.size() == xs.rows(), ErrorCode::Shape, "weighted_elbo: weights/inputs length mismatch");
  Var x = tape.constant(xs);
  EncoderOut enc = encoder_forward(arch, params.encoder, x);
  Var z = sample_latent(enc, eps);
  Var recon = recon_loglik_rows(arch, decoder_forward(arch, params.decoder, z), x);
  Var per_row = ad::sub(kl_rows(enc), recon);
  return ad::sum(ad::mul(per_row, tape.constant(Matrix(weights))));
}

LossGrad zero_grad(const VaeState& state) {
  LossGrad g;
  for (const auto& m : state.encoder) g.encoder_grad.push_back(Matrix::Zero(m.rows(), m.cols()));
  for (const auto& m : state.decoder) g.decoder_grad.push_back(Matrix::Zero(m.rows(), m.cols()));
  return g;
}

LossGrad weighted_elbo(const VaeState& state, const Matrix& xs, const Vector& weights, const Matrix& eps) {
  require(weights.size() == xs.rows(), ErrorCode::Shape, "weighted_elbo: weights/inputs length mismatch");
  if (xs.rows() == 0) return zero_grad(state);
  require((weights.array() >= 0.0).all() && weights.allFinite(), ErrorCode::InvalidArgument,
          "weighted_elbo: weights must be finite and nonnegative");
  require(weights.sum() > 0.0, ErrorCode::InvalidArgument, "weighted_elbo: degenerate batch (all-zero weights)");
  Tape tape;
  Params p = bind(tape, state);
  Var loss = weighted_elbo_graph(tape, state.arch, p, xs, weights, eps);
  tape.backward(loss);
  LossGrad g;
  g.loss = loss.scalar();
  for (const auto& v : p.encoder) g.encoder_grad.push_back(v.grad());
  for (const auto& v : p.decoder) g.decoder_grad.push_back(v.grad());
  return g;
}

LossGrad labeled_loss(const VaeState& state, const Matrix& xs, const Vector& weights, Rng& rng) {
  Matrix eps = rng.normal_matrix(xs.rows(), static_cast<Eigen::Index>(state.arch.latent_dim));
  return weighted_elbo(state, xs, weights, eps);
}

LossGrad pseudo_loss(const VaeState& state, const Matrix& xs, const Vector& weights, Rng& rng) {
  return labeled_loss(state, xs, weights, rng);
}

double mean_negative_elbo(const VaeState& state, const Matrix& xs, const Matrix& eps) {
  if (xs.rows() == 0) return 0.0;
  Tape tape;
  Params p = bind(tape, state, false, false);
  Vector w = Vector::Constant(xs.rows(), 1.0 / static_cast<double>(xs.rows()));
  return weighted_elbo_graph(tape, state.arch, p, xs, w, eps).scalar();
}

VaeState pretrain(const VaeArch& arch, const Matrix& unlabeled, const PretrainConfig& config, Rng& rng,
                  std::vector<double>* epoch_losses) {
  require(config.batch_size >= 1, ErrorCode::Config, "pretrain: batch size must be >= 1");
  require(config.epochs >= 0, ErrorCode::Config, "pretrain: epochs must be >= 0");
  require(static_cast<std::size_t>(unlabeled.rows()) >= config.batch_size, ErrorCode::InvalidArgument,
          "pretrain: fewer unlabeled points than the batch size");
  VaeState state = VaeState::init(arch, rng);
  Adam adam(config.learning_rate);
  const auto n = static_cast<std::size_t>(unlabeled.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto d = static_cast<Eigen::Index>(arch.latent_dim);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
      Matrix xs = take_rows(unlabeled, idx);
      Vector w = Vector::Constant(xs.rows(), 1.0 / static_cast<double>(xs.rows()));
      Matrix eps = rng.normal_matrix(xs.rows(), d);
      LossGrad g = weighted_elbo(state, xs, w, eps);
      if (!std::isfinite(g.loss))
        fail(ErrorCode::Training, "pretrain: loss diverged at epoch " + std::to_string(epoch));
      std::vector<Matrix> params = state.encoder;
      params.insert(params.end(), state.decoder.begin(), state.decoder.end());
      std::vector<Matrix> grads = g.encoder_grad;
      grads.insert(grads.end(), g.decoder_grad.begin(), g.decoder_grad.end());
      adam.step(params, grads);
      const std::size_t ne = state.encoder.size();
      for (std::size_t i = 0; i < ne; ++i) state.encoder[i] = std::move(params[i]);
      for (std::size_t i = 0; i < state.decoder.size(); ++i) state.decoder[i] = std::move(params[ne + i]);
      total += g.loss;
      ++batches;
    }
    if (epoch_losses) epoch_losses->push_back(total / static_cast<double>(batches));
  }
  return state;
}

}  // namespace pglbo::vae

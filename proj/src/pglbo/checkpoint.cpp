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

#include "pglbo/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <string_view>

#include "pglbo/config.hpp"

namespace pglbo::checkpoint {

namespace {

constexpr char kMagic[4] = {'P', 'G', 'L', 'B'};

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void size(std::size_t v) { u64(v); }
  void boolean(bool v) { u8(v ? 1 : 0); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    size(s.size());
    buf_ += s;
  }
  void vec(const Vector& v) {
    size(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }
  void mat(const Matrix& m) {
    size(static_cast<std::size_t>(m.rows()));
    size(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
  }
  std::string take() { return std::move(buf_); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::size_t size() {
    const std::uint64_t v = u64();
    // Any count larger than the remaining bytes is corrupt.
    require(v <= data_.size(), ErrorCode::Io, "checkpoint: corrupt length field");
    return static_cast<std::size_t>(v);
  }
  bool boolean() {
    const std::uint8_t v = u8();
    require(v <= 1, ErrorCode::Io, "checkpoint: corrupt boolean");
    return v == 1;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::size_t n = size();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  Vector vec() {
    const std::size_t n = size();
    need(8 * n);
    Vector v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
    return v;
  }
  Matrix mat() {
    const std::size_t r = size(), c = size();
    require(c == 0 || r <= data_.size() / std::max<std::size_t>(c, 1), ErrorCode::Io, "checkpoint: corrupt matrix shape");
    need(8 * r * c);
    Matrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = f64();
    return m;
  }
  bool done() const { return pos_ == data_.size(); }
  void expect_done(const char* what) const {
    require(done(), ErrorCode::Io, std::string("checkpoint: trailing bytes in ") + what + " section");
  }

 private:
  void need(std::size_t n) const {
    require(n <= data_.size() - pos_, ErrorCode::Io, "checkpoint: truncated data");
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

void write_arch(Writer& w, const vae::VaeArch& a) {
  w.size(a.input_dim);
  w.size(a.latent_dim);
  w.size(a.hidden.size());
  for (auto h : a.hidden) w.size(h);
  w.u8(a.likelihood == vae::Likelihood::Bernoulli ? 0 : 1);
}

vae::VaeArch read_arch(Reader& r) {
  vae::VaeArch a;
  a.input_dim = r.size();
  a.latent_dim = r.size();
  a.hidden.resize(r.size());
  for (auto& h : a.hidden) h = r.size();
  const std::uint8_t lk = r.u8();
  require(lk <= 1, ErrorCode::Io, "checkpoint: unknown likelihood");
  a.likelihood = lk == 0 ? vae::Likelihood::Bernoulli : vae::Likelihood::Gaussian;
  return a;
}

void write_vae(Writer& w, const vae::VaeState& v) {
  write_arch(w, v.arch);
  w.size(v.encoder.size());
  for (const auto& m : v.encoder) w.mat(m);
  w.size(v.decoder.size());
  for (const auto& m : v.decoder) w.mat(m);
}

vae::VaeState read_vae(Reader& r) {
  vae::VaeState v;
  v.arch = read_arch(r);
  v.encoder.resize(r.size());
  for (auto& m : v.encoder) m = r.mat();
  v.decoder.resize(r.size());
  for (auto& m : v.decoder) m = r.mat();
  v.validate();
  return v;
}

void write_hyper(Writer& w, const gp::GpHyper& h) {
  w.f64(h.lengthscale);
  w.f64(h.signal_variance);
  w.f64(h.noise_variance);
  w.f64(h.prior_mean);
}

gp::GpHyper read_hyper(Reader& r) {
  gp::GpHyper h;
  h.lengthscale = r.f64();
  h.signal_variance = r.f64();
  h.noise_variance = r.f64();
  h.prior_mean = r.f64();
  return h;
}

void write_gp(Writer& w, const gp::GpState& g) {
  write_hyper(w, g.hyper);
  w.mat(g.latents);
  w.vec(g.targets);
  w.mat(g.chol);
  w.vec(g.alpha);
  w.f64(g.jitter);
}

gp::GpState read_gp(Reader& r) {
  gp::GpState g;
  g.hyper = read_hyper(r);
  g.latents = r.mat();
  g.targets = r.vec();
  g.chol = r.mat();
  g.alpha = r.vec();
  g.jitter = r.f64();
  const Eigen::Index n = g.latents.rows();
  require(g.targets.size() == n && g.alpha.size() == n && g.chol.rows() == n && g.chol.cols() == n, ErrorCode::Io,
          "checkpoint: inconsistent GP shapes");
  return g;
}

void write_threshold(Writer& w, const pseudo::ThresholdState& t) {
  w.f64(t.tau);
  w.f64(t.lambda);
  w.size(t.step);
}

pseudo::ThresholdState read_threshold(Reader& r) {
  pseudo::ThresholdState t;
  t.tau = r.f64();
  t.lambda = r.f64();
  t.step = r.size();
  return t;
}

void write_breakdown(Writer& w, const trainer::LossBreakdown& b) {
  w.f64(b.labeled);
  w.f64(b.pseudo);
  w.f64(b.guidance);
  w.f64(b.total);
}

trainer::LossBreakdown read_breakdown(Reader& r) {
  trainer::LossBreakdown b;
  b.labeled = r.f64();
  b.pseudo = r.f64();
  b.guidance = r.f64();
  b.total = r.f64();
  return b;
}

void write_run(Writer& w, const boloop::RunState& s) {
  w.str(boloop::to_string(s.variant));
  w.u64(s.seed);
  w.size(s.next_round);
  w.size(s.initial_size);
  w.mat(s.labeled.inputs);
  w.vec(s.labeled.scores);
  w.mat(s.pseudo.inputs);
  w.mat(s.pseudo.latents);
  w.vec(s.pseudo.labels);
  w.vec(s.pseudo.weights);
  write_vae(w, s.vae);
  w.boolean(s.guide.has_value());
  if (s.guide) write_gp(w, *s.guide);
  w.boolean(s.warm.has_value());
  if (s.warm) write_hyper(w, *s.warm);
  w.boolean(s.threshold.has_value());
  if (s.threshold) write_threshold(w, *s.threshold);

  w.size(s.iterations.size());
  for (const auto& it : s.iterations) {
    w.size(it.iteration);
    w.size(it.round);
    w.boolean(it.ok);
    w.f64(it.value);
    w.f64(it.best_so_far);
    w.f64(it.ei);
    w.boolean(it.fallback);
    w.f64(it.tau);
    w.f64(it.lambda_p);
    w.f64(it.lambda_g);
    w.str(it.note);
    w.vec(it.latent);
    w.vec(it.input);
  }
  w.size(s.epochs.size());
  for (const auto& e : s.epochs) {
    w.size(e.round);
    w.size(e.epoch);
    write_breakdown(w, e.loss);
    w.f64(e.lambda_p);
    w.f64(e.lambda_g);
  }
  w.size(s.pseudo_log.size());
  for (const auto& p : s.pseudo_log) {
    w.size(p.round);
    w.size(p.target);
    w.size(p.candidates);
    w.size(p.passed);
    w.size(p.used);
    w.f64(p.tau_used);
    w.f64(p.tau_next);
    w.f64(p.mean_variance);
    w.f64(p.mean_variance_used);
    w.f64(p.mean_label);
    w.boolean(p.capped);
  }
  w.size(s.vae_fingerprints.size());
  for (auto f : s.vae_fingerprints) w.u64(f);
  w.size(s.skipped);
  w.size(s.fallbacks);
}

boloop::RunState read_run(Reader& r) {
  boloop::RunState s;
  s.variant = boloop::parse_variant(r.str());
  s.seed = r.u64();
  s.next_round = r.size();
  s.initial_size = r.size();
  s.labeled.inputs = r.mat();
  s.labeled.scores = r.vec();
  s.pseudo.inputs = r.mat();
  s.pseudo.latents = r.mat();
  s.pseudo.labels = r.vec();
  s.pseudo.weights = r.vec();
  s.vae = read_vae(r);
  if (r.boolean()) s.guide = read_gp(r);
  if (r.boolean()) s.warm = read_hyper(r);
  if (r.boolean()) s.threshold = read_threshold(r);

  s.iterations.resize(r.size());
  for (auto& it : s.iterations) {
    it.iteration = r.size();
    it.round = r.size();
    it.ok = r.boolean();
    it.value = r.f64();
    it.best_so_far = r.f64();
    it.ei = r.f64();
    it.fallback = r.boolean();
    it.tau = r.f64();
    it.lambda_p = r.f64();
    it.lambda_g = r.f64();
    it.note = r.str();
    it.latent = r.vec();
    it.input = r.vec();
  }
  s.epochs.resize(r.size());
  for (auto& e : s.epochs) {
    e.round = r.size();
    e.epoch = r.size();
    e.loss = read_breakdown(r);
    e.lambda_p = r.f64();
    e.lambda_g = r.f64();
  }
  s.pseudo_log.resize(r.size());
  for (auto& p : s.pseudo_log) {
    p.round = r.size();
    p.target = r.size();
    p.candidates = r.size();
    p.passed = r.size();
    p.used = r.size();
    p.tau_used = r.f64();
    p.tau_next = r.f64();
    p.mean_variance = r.f64();
    p.mean_variance_used = r.f64();
    p.mean_label = r.f64();
    p.capped = r.boolean();
  }
  s.vae_fingerprints.resize(r.size());
  for (auto& f : s.vae_fingerprints) f = r.u64();
  s.skipped = r.size();
  s.fallbacks = r.size();
  require(s.labeled.scores.size() == s.labeled.inputs.rows(), ErrorCode::Io, "checkpoint: inconsistent labeled data");
  return s;
}

void section(Writer& out, const char tag[4], const std::string& payload) {
  for (int i = 0; i < 4; ++i) out.u8(static_cast<std::uint8_t>(tag[i]));
  out.str(payload);
}

}  // namespace

std::string serialize(const Checkpoint& ckpt) {
  Writer out;
  for (char c : kMagic) out.u8(static_cast<std::uint8_t>(c));
  out.u8(kFormatVersion);
  if (ckpt.vae) {
    Writer w;
    write_vae(w, *ckpt.vae);
    section(out, "VAE_", w.take());
  }
  if (ckpt.gp) {
    Writer w;
    write_gp(w, *ckpt.gp);
    section(out, "GP__", w.take());
  }
  if (ckpt.run) {
    Writer w;
    write_run(w, *ckpt.run);
    section(out, "RUN_", w.take());
  }
  if (ckpt.rng) {
    Writer w;
    w.u64(ckpt.rng->seed());
    w.str(ckpt.rng->state());
    section(out, "RNG_", w.take());
  }
  if (!ckpt.config_text.empty()) section(out, "CONF", ckpt.config_text);
  return out.take();
}

Checkpoint deserialize(const std::string& bytes) {
  Reader in(bytes);
  for (char c : kMagic) require(in.u8() == static_cast<std::uint8_t>(c), ErrorCode::Io, "checkpoint: bad magic");
  const std::uint8_t version = in.u8();
  require(version == kFormatVersion, ErrorCode::Io,
          "checkpoint: unsupported format version " + std::to_string(version));
  Checkpoint out;
  while (!in.done()) {
    std::string tag(4, ' ');
    for (auto& c : tag) c = static_cast<char>(in.u8());
    const std::string payload = in.str();
    Reader r(payload);
    if (tag == "VAE_") {
      out.vae = read_vae(r);
    } else if (tag == "GP__") {
      out.gp = read_gp(r);
    } else if (tag == "RUN_") {
      out.run = read_run(r);
    } else if (tag == "RNG_") {
      const std::uint64_t seed = r.u64();
      out.rng = Rng::from_state(seed, r.str());
    } else if (tag == "CONF") {
      out.config_text = payload;
      continue;
    } else {
      continue;
    }
    r.expect_done(tag.c_str());
  }
  return out;
}

void save(const Checkpoint& ckpt, const std::string& path) {
  const std::string bytes = serialize(ckpt);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(f), ErrorCode::Io, "checkpoint: cannot write '" + tmp + "'");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(f), ErrorCode::Io, "checkpoint: write failed for '" + tmp + "'");
  }
  require(std::rename(tmp.c_str(), path.c_str()) == 0, ErrorCode::Io, "checkpoint: cannot rename to '" + path + "'");
}

Checkpoint load(const std::string& path) { return deserialize(config::read_file(path)); }

}  // namespace pglbo::checkpoint

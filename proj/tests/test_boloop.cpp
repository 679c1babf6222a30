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

#include "doctest.h"

#include <cmath>
#include <limits>
#include <numbers>

#include "oracles.hpp"
#include "pglbo/boloop.hpp"

using namespace pglbo;
using namespace pglbo::boloop;

namespace {

struct Fixture {
  tasks::Task task = tasks::synth_oracle_task();
  vae::VaeState vae0;
  LabeledDataset initial;

  Fixture() {
    vae::VaeArch a;
    a.input_dim = task.input_dim;
    a.latent_dim = 2;
    a.hidden = {8};
    a.likelihood = task.likelihood;
    vae::PretrainConfig pc;
    pc.epochs = 3;
    Rng pool_rng(100), train_rng(101), init_rng(102);
    vae0 = vae::pretrain(a, task.generate(200, pool_rng), pc, train_rng);
    initial = initial_dataset(task, task.generate(8, init_rng));
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

BoConfig small_config() {
  BoConfig c;
  c.budget = 6;
  c.retrain_every = 3;
  c.acq_restarts = 4;
  c.acq_steps = 10;
  c.retrain.epochs = 2;
  c.retrain.batch_size = 4;
  c.gp_fit.restarts = 1;
  c.gp_fit.max_iters = 30;
  c.loss.lambda_g = 0.1;
  return c;
}

bool same_trace(const RunState& a, const RunState& b) {
  if (a.iterations.size() != b.iterations.size()) return false;
  for (std::size_t i = 0; i < a.iterations.size(); ++i) {
    const auto& x = a.iterations[i];
    const auto& y = b.iterations[i];
    if (x.latent != y.latent || x.input != y.input || x.ok != y.ok) return false;
    if (x.ok && x.value != y.value) return false;
  }
  return a.labeled.scores == b.labeled.scores && a.vae_fingerprints == b.vae_fingerprints;
}

gp::GpState one_d_gp() {
  Matrix x(3, 1);
  x << -1.0, 0.3, 1.2;
  Vector y(3);
  y << 0.2, 0.9, -0.1;
  gp::GpHyper h;
  h.lengthscale = 0.6;
  h.signal_variance = 1.0;
  h.noise_variance = 1e-4;
  h.prior_mean = 0.0;
  return gp::condition(x, y, h);
}

}  // namespace

TEST_CASE("EI closed form and degenerate cases") {
  CHECK(ei_from_moments(0.0, 1.0, 0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-15));
  CHECK(ei_from_moments(0.3, 0.0, 0.5) == 0.0);
  CHECK(ei_from_moments(0.5, 1e-14, 0.5) == 0.0);
  CHECK(ei_from_moments(0.8, 0.0, 0.5) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(ei_from_moments(-30.0, 1.0, 0.0) >= 0.0);
}

TEST_CASE("EI matches Monte Carlo within three standard errors") {
  Rng cfg(1), mc(2);
  for (int c = 0; c < 10; ++c) {
    // Keep |mu - best| / sigma <= 2 so the improvement is not a rare event and the sample SE is reliable.
    const double mu = cfg.uniform(-1.0, 1.0), sigma = cfg.uniform(0.1, 2.0);
    const double best = mu + sigma * cfg.uniform(-2.0, 2.0);
    const int n = 1000000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double imp = std::max(mu + sigma * mc.normal() - best, 0.0);
      sum += imp;
      sum2 += imp * imp;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    CHECK(std::abs(ei_from_moments(mu, sigma, best) - mean) <= 3.0 * se);
  }
}

TEST_CASE("expected_improvement uses the GP posterior") {
  gp::GpState g = one_d_gp();
  Vector z(1);
  z << 0.0;
  gp::Posterior p = gp::posterior(g, z);
  CHECK(expected_improvement(g, z, 0.9) == ei_from_moments(p.mean, std::sqrt(p.variance), 0.9));
}

TEST_CASE("optimize_acquisition: 1-D grid oracle") {
  gp::GpState g = one_d_gp();
  sampler::Box box;
  box.lower = Vector::Constant(1, -3.0);
  box.upper = Vector::Constant(1, 3.0);
  const double best = g.targets.maxCoeff();
  double grid_max = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Vector z(1);
    z << -3.0 + 6.0 * i / 9999.0;
    grid_max = std::max(grid_max, expected_improvement(g, z, best));
  }
  Rng r1(3), r2(3);
  AcqResult a = optimize_acquisition(g, box, 8, r1);
  CHECK(a.ei >= 0.999 * grid_max);
  CHECK_FALSE(a.fallback);
  CHECK(a.z[0] >= -3.0);
  CHECK(a.z[0] <= 3.0);
  CHECK(a.ei == doctest::Approx(expected_improvement(g, a.z, best)).epsilon(1e-12));
  AcqResult b = optimize_acquisition(g, box, 8, r2);
  CHECK(a.z == b.z);
}

TEST_CASE("optimize_acquisition: collapsed box, fallback, errors") {
  gp::GpState g = one_d_gp();
  sampler::Box point;
  point.lower = Vector::Constant(1, 0.7);
  point.upper = Vector::Constant(1, 0.7);
  Rng rng(4);
  CHECK(optimize_acquisition(g, point, 4, rng).z[0] == 0.7);

  // Prior variance below the EI floor: EI is zero everywhere.
  Matrix x(2, 1);
  x << 0.0, 1.0;
  Vector y(2);
  y << 1.0, 1.0;
  gp::GpHyper h;
  h.lengthscale = 1.0;
  h.signal_variance = 1e-30;
  h.noise_variance = 1e-30;
  h.prior_mean = 1.0;
  gp::GpState flat = gp::condition(x, y, h);
  sampler::Box box;
  box.lower = Vector::Constant(1, -2.0);
  box.upper = Vector::Constant(1, 2.0);
  AcqResult f = optimize_acquisition(flat, box, 5, rng);
  CHECK(f.fallback);
  CHECK(f.ei == 0.0);

  sampler::Box wrong;
  wrong.lower = Vector::Zero(2);
  wrong.upper = Vector::Ones(2);
  CHECK_THROWS_AS(optimize_acquisition(g, wrong, 4, rng), Error);
}

TEST_CASE("config validation and pseudo size rules") {
  BoConfig c;
  c.validate();
  CHECK(c.rounds() == 8);
  c.budget = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.budget = 10;
  c.retrain_every = 4;
  c.validate();
  CHECK(c.rounds() == 3);
  c.retrain_every = 11;
  CHECK_THROWS_AS(c.validate(), Error);
  c.retrain_every = 5;
  c.acquisition = Acquisition::Ucb;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(parse_acquisition("pi") == Acquisition::Pi);

  CHECK(pseudo_size(PseudoSizeRule::HalfLabeled, 100) == 50);
  CHECK(pseudo_size(PseudoSizeRule::TenTimesLabeled, 100) == 1000);
  CHECK(parse_size_rule(to_string(PseudoSizeRule::TenTimesLabeled)) == PseudoSizeRule::TenTimesLabeled);
  for (Variant v : {Variant::Lsbo, Variant::Lbo, Variant::Plbo, Variant::Glbo, Variant::Pglbo})
    CHECK(parse_variant(to_string(v)) == v);
  CHECK_THROWS_AS(parse_variant("turbo"), Error);
}

TEST_CASE("run: trace invariants and dataset accounting") {
  const Fixture& fx = fixture();
  BoConfig c = small_config();
  RunResult r = run_pg_lbo(c, fx.task, fx.vae0, fx.initial, 7);
  const RunState& s = r.state;
  CHECK(r.completed);
  REQUIRE(s.iterations.size() == c.budget);
  CHECK(static_cast<std::size_t>(s.labeled.size()) == s.initial_size + c.budget - s.skipped);
  double prev = -std::numeric_limits<double>::infinity();
  std::size_t fallbacks = 0;
  for (const auto& it : s.iterations) {
    CHECK(it.best_so_far >= prev);
    prev = it.best_so_far;
    if (it.fallback) ++fallbacks;
  }
  CHECK(fallbacks == s.fallbacks);
  CHECK(r.best_value == s.labeled.scores.maxCoeff());
  CHECK(r.best_value == s.iterations.back().best_so_far);
  CHECK(fx.task.evaluate(r.best_input).value == r.best_value);
  CHECK(s.vae_fingerprints.size() == c.rounds());
  // One pseudo build per round except the last.
  REQUIRE(s.pseudo_log.size() == 1);
  const PseudoRecord& p = s.pseudo_log[0];
  CHECK(p.target == pseudo_size(c.size_rule, s.initial_size + 3));
  CHECK(p.candidates == static_cast<std::size_t>(std::ceil(c.oversample * static_cast<double>(p.target))));
  CHECK(p.used <= p.target);
  CHECK(p.used <= p.passed);
  CHECK(p.tau_next == doctest::Approx(0.9 * p.tau_used + 0.1 * p.mean_variance).epsilon(1e-12));
  CHECK(s.iterations.back().tau == p.tau_next);
  CHECK(std::isnan(s.iterations.front().tau));
  CHECK(s.epochs.size() == 2 * c.rounds());
}

TEST_CASE("run: determinism and resume at a round boundary") {
  const Fixture& fx = fixture();
  BoConfig c = small_config();
  c.budget = 9;
  RunResult a = run_pg_lbo(c, fx.task, fx.vae0, fx.initial, 11);
  RunResult b = run_pg_lbo(c, fx.task, fx.vae0, fx.initial, 11);
  CHECK(same_trace(a.state, b.state));

  for (std::size_t stop_after : {1u, 2u}) {
    RunHooks stop;
    stop.on_round_end = [stop_after](const RunState& s) { return s.next_round < stop_after; };
    RunResult part = run_pg_lbo(c, fx.task, fx.vae0, fx.initial, 11, stop);
    CHECK_FALSE(part.completed);
    CHECK(part.state.next_round == stop_after);
    RunResult rest = resume(c, fx.task, part.state);
    CHECK(rest.completed);
    CHECK(same_trace(rest.state, a.state));
    CHECK(rest.best_value == a.best_value);
  }

  RunResult other = run_pg_lbo(c, fx.task, fx.vae0, fx.initial, 12);
  CHECK_FALSE(same_trace(other.state, a.state));
}

TEST_CASE("variants: shared start, LSBO fixed VAE, LBO without pseudo data") {
  const Fixture& fx = fixture();
  BoConfig c = small_config();
  std::vector<RunResult> runs;
  for (Variant v : {Variant::Lsbo, Variant::Lbo, Variant::Plbo, Variant::Glbo, Variant::Pglbo})
    runs.push_back(run_variant(v, c, fx.task, fx.vae0, fx.initial, 5));
  for (const RunResult& r : runs) {
    CHECK(r.state.initial_size == static_cast<std::size_t>(fx.initial.size()));
    CHECK(r.state.labeled.inputs.topRows(fx.initial.size()) == fx.initial.inputs);
  }
  const RunState& lsbo = runs[0].state;
  for (std::uint64_t f : lsbo.vae_fingerprints) CHECK(f == fx.vae0.fingerprint());
  CHECK(lsbo.epochs.empty());
  CHECK(runs[1].state.pseudo_log.empty());
  CHECK(runs[1].state.pseudo.empty());
  CHECK_FALSE(runs[2].state.pseudo_log.empty());
  for (const auto& e : runs[2].state.epochs) CHECK(e.lambda_g == 0.0);
  for (const auto& e : runs[3].state.epochs) CHECK(e.lambda_p == 0.0);
  CHECK_FALSE(runs[3].state.pseudo_log.empty());
  CHECK(runs[4].state.epochs.back().lambda_p == 0.75);
}

TEST_CASE("one round with zero loss weights reproduces LBO step for step") {
  const Fixture& fx = fixture();
  BoConfig c = small_config();
  c.budget = 3;
  c.loss = trainer::LossWeights{trainer::Schedule::fixed(0.0), 0.0};
  RunResult pg = run_pg_lbo(c, fx.task, fx.vae0, fx.initial, 21);
  RunResult lbo = run_variant(Variant::Lbo, c, fx.task, fx.vae0, fx.initial, 21);
  CHECK(same_trace(pg.state, lbo.state));
}

TEST_CASE("threshold modes and size rule in the loop") {
  const Fixture& fx = fixture();
  BoConfig c = small_config();
  c.threshold = pseudo::ThresholdMode::Fixed;
  RunResult f = run_pg_lbo(c, fx.task, fx.vae0, fx.initial, 3);
  REQUIRE_FALSE(f.state.pseudo_log.empty());
  CHECK(f.state.pseudo_log[0].tau_used == c.fixed_tau);
  CHECK(f.state.iterations.front().tau == c.fixed_tau);

  c.threshold = pseudo::ThresholdMode::None;
  c.size_rule = PseudoSizeRule::TenTimesLabeled;
  RunResult n = run_pg_lbo(c, fx.task, fx.vae0, fx.initial, 3);
  const PseudoRecord& p = n.state.pseudo_log[0];
  CHECK(std::isinf(p.tau_used));
  CHECK(p.passed == p.candidates);
  CHECK(p.target == 10 * (fx.initial.size() + 3));
  CHECK(p.used == p.target);

  c.sampler = sampler::Provenance::Random;
  RunResult rnd = run_pg_lbo(c, fx.task, fx.vae0, fx.initial, 3);
  CHECK(rnd.state.pseudo_log[0].used == rnd.state.pseudo_log[0].target);

  c.sampler = sampler::Provenance::Cmaes;
  c.cmaes_iters = 3;
  RunResult cm = run_pg_lbo(c, fx.task, fx.vae0, fx.initial, 3);
  CHECK(cm.state.pseudo_log[0].candidates <= cm.state.pseudo_log[0].target * 3);
}

TEST_CASE("failed evaluations consume budget and are logged") {
  const Fixture& fx = fixture();
  tasks::Task flaky = fx.task;
  int calls = 0;
  flaky.evaluate = [&calls, base = fx.task.evaluate](const Vector& x) {
    if (++calls % 2 == 0) {
      tasks::EvalResult r;
      r.ok = false;
      r.note = "simulated failure";
      return r;
    }
    return base(x);
  };
  BoConfig c = small_config();
  RunResult r = run_variant(Variant::Lbo, c, flaky, fx.vae0, fx.initial, 9);
  CHECK(r.state.iterations.size() == c.budget);
  CHECK(r.state.skipped == 3);
  CHECK(static_cast<std::size_t>(r.state.labeled.size()) == r.state.initial_size + 3);
  for (const auto& it : r.state.iterations)
    if (!it.ok) {
      CHECK(std::isnan(it.value));
      CHECK(it.note == "simulated failure");
    }
}

TEST_CASE("start_run preconditions") {
  const Fixture& fx = fixture();
  BoConfig c = small_config();
  LabeledDataset one;
  one.append(fx.initial.inputs.row(0).transpose(), fx.initial.scores[0]);
  CHECK_THROWS_AS(start_run(c, Variant::Pglbo, fx.task, fx.vae0, one, 1), Error);
  CHECK_THROWS_AS(start_run(c, Variant::Pglbo, tasks::topology_task(), fx.vae0, fx.initial, 1), Error);
}

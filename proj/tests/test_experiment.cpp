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
#include <filesystem>
#include <fstream>

#include "pglbo/config.hpp"
#include "pglbo/experiment.hpp"

using namespace pglbo;
using namespace pglbo::experiment;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) { return config::read_file(p.string()); }

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("pglbo_exp_test_" + name);
  fs::remove_all(d);
  return d;
}

const char* kSpec =
    "task = synthetic\n"
    "pool_size = 200\n"
    "pretrain.epochs = 2\n"
    "bo.budget = 6\n"
    "bo.retrain_every = 3\n"
    "retrain.epochs = 2\n"
    "acq.restarts = 4\n"
    "acq.steps = 10\n"
    "gp.restarts = 1\n"
    "gp.max_iters = 30\n"
    "variants = lbo, pglbo/sampler=random\n"
    "seeds = 3, 1\n";

}  // namespace

TEST_CASE("arms and specs") {
  Arm a = Arm::parse("pglbo/sampler=random/threshold.mode=fixed");
  CHECK(a.variant == boloop::Variant::Pglbo);
  REQUIRE(a.overrides.size() == 2);
  const config::RunConfig c = a.apply(config::task_defaults("topology"));
  CHECK(c.bo.sampler == sampler::Provenance::Random);
  CHECK(c.bo.threshold == pseudo::ThresholdMode::Fixed);
  CHECK_THROWS_AS(Arm::parse("pglbo/task=synthetic"), Error);
  CHECK_THROWS_AS(Arm::parse("pglbo/sampler"), Error);
  CHECK_THROWS_AS(Arm::parse("best"), Error);
  CHECK_THROWS_AS(Arm::parse("lbo/nokey=1").apply(config::task_defaults("topology")), Error);

  ExperimentSpec s = ExperimentSpec::parse(kSpec);
  CHECK(s.arms.size() == 2);
  CHECK(s.seeds == std::vector<std::uint64_t>{3, 1});
  CHECK(s.base.bo.budget == 6);
  CHECK_THROWS_AS(ExperimentSpec::parse("variants = lbo\nseeds = 1, 1\n"), Error);
  CHECK_THROWS_AS(ExperimentSpec::parse("seeds = 1\n"), Error);
  CHECK_THROWS_AS(ExperimentSpec::parse("variants = lbo\n"), Error);
  CHECK_THROWS_AS(ExperimentSpec::parse("variants = lbo, lbo\nseeds = 1\n"), Error);
  CHECK_THROWS_AS(ExperimentSpec::parse("variants = lbo\nseeds = -1\n"), Error);
  CHECK_THROWS_AS(ExperimentSpec::parse("variants = lbo\nseeds = 1\nworkers = x\n"), Error);
}

TEST_CASE("csv quoting") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_field("two\nlines") == "\"two\nlines\"");
}

TEST_CASE("spearman") {
  Vector a(5), b(5);
  a << 1, 2, 3, 4, 5;
  b << 2, 4, 8, 16, 32;
  CHECK(*spearman(a, b) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(*spearman(a, -b) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK_FALSE(spearman(a, Vector::Zero(5)).has_value());
  CHECK_FALSE(spearman(Vector::Ones(1), Vector::Ones(1)).has_value());
  // Ties take average ranks: ranks (0, 1.5, 1.5, 3) against (0, 1, 2, 3).
  Vector t(4), u(4);
  t << 1, 2, 2, 3;
  u << 1, 2, 3, 4;
  CHECK(*spearman(t, u) == doctest::Approx(4.5 / std::sqrt(4.5 * 5.0)).epsilon(1e-14));
  CHECK_THROWS_AS(spearman(a, u), Error);
}

TEST_CASE("threshold_diagnostic: exact GP gives zero error and no correlation") {
  Rng rng(1);
  vae::VaeArch arch;
  arch.input_dim = tasks::kSynthDim;
  arch.latent_dim = 2;
  arch.hidden = {4};
  arch.likelihood = vae::Likelihood::Gaussian;
  const vae::VaeState v = vae::VaeState::init(arch, rng);
  tasks::Task constant = tasks::synth_oracle_task();
  constant.evaluate = [](const Vector&) { return tasks::EvalResult{2.5, true, ""}; };
  gp::GpHyper h;
  h.prior_mean = 2.5;
  h.noise_variance = 1e-6;
  const gp::GpState g = gp::condition(rng.normal_matrix(5, 2), Vector::Constant(5, 2.5), h);
  const DiagnosticReport r = threshold_diagnostic(g, constant, v, 200, 20, rng);
  CHECK(r.groups.size() == 10);
  for (const auto& grp : r.groups) CHECK(grp.mean_mae == 0.0);
  CHECK_FALSE(r.spearman.has_value());
  CHECK(diagnostic_csv(r).find("not-applicable") != std::string::npos);

  // Groups come out in ascending variance; failures are excluded and counted.
  tasks::Task flaky = tasks::synth_oracle_task();
  int calls = 0;
  flaky.evaluate = [&calls](const Vector& x) {
    tasks::EvalResult e{-x.squaredNorm(), ++calls % 4 != 0, ""};
    return e;
  };
  const DiagnosticReport f = threshold_diagnostic(g, flaky, v, 400, 30, rng);
  CHECK(f.failed == 100);
  CHECK(f.evaluated == 300);
  CHECK(f.groups.size() == 10);
  for (std::size_t i = 1; i < f.groups.size(); ++i) CHECK(f.groups[i].mean_variance >= f.groups[i - 1].mean_variance);
  CHECK_THROWS_AS(threshold_diagnostic(g, constant, v, 30, 20, rng), Error);
}

TEST_CASE("run_experiment: outputs, determinism, report regeneration") {
  ExperimentSpec spec = ExperimentSpec::parse(kSpec);
  const fs::path d1 = fresh_dir("a"), d2 = fresh_dir("b");
  spec.output_dir = d1.string();
  const ExperimentResult r1 = run_experiment(spec);
  spec.output_dir = d2.string();
  spec.workers = 2;
  run_experiment(spec);

  REQUIRE(r1.traces.size() == 4);
  CHECK(r1.traces[0].arm == "lbo");
  CHECK(r1.traces[0].seed == 1);
  CHECK(r1.traces[1].seed == 3);
  for (const auto& t : r1.traces) {
    CHECK(t.ok);
    CHECK(t.best_so_far.size() == 6);
    CHECK(t.best_value == t.best_so_far.back());
  }
  for (const char* f : {"summary.csv", "runs.csv", "best_so_far.csv", "best_so_far_mean.csv"})
    CHECK(slurp(d1 / f) == slurp(d2 / f));
  for (const auto& e : fs::directory_iterator(d1 / "traces"))
    CHECK(slurp(e.path()) == slurp(d2 / "traces" / e.path().filename()));
  CHECK(fs::exists(d1 / "meta.json"));
  CHECK(slurp(d1 / "traces" / "00_lbo_seed1.jsonl").find("seconds") == std::string::npos);

  // Summary statistics recomputed from the traces match the emitted summary.
  const std::string before = slurp(d1 / "summary.csv");
  CHECK(report(d1.string(), "csv") == before);
  CHECK(slurp(d1 / "summary.csv") == before);
  const std::string md = report(d1.string(), "md");
  CHECK(md.find("pglbo/sampler=random") != std::string::npos);
  CHECK(fs::exists(d1 / "summary.md"));

  REQUIRE(r1.stats.size() == 2);
  const ArmStats& s = r1.stats[0];
  const double m = 0.5 * (r1.traces[0].best_value + r1.traces[1].best_value);
  CHECK(s.mean == doctest::Approx(m).epsilon(1e-15));
  CHECK(s.std == doctest::Approx(std::abs(r1.traces[0].best_value - r1.traces[1].best_value) / std::sqrt(2.0)));
  CHECK(s.runs == 2);
  CHECK(s.failed == 0);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("run_experiment: one arm and one seed has zero spread") {
  std::string text = kSpec;
  text.replace(text.find("variants"), std::string::npos, "variants = lsbo\nseeds = 2\n");
  ExperimentSpec spec = ExperimentSpec::parse(text);
  const fs::path d = fresh_dir("single");
  spec.output_dir = d.string();
  const ExperimentResult r = run_experiment(spec);
  REQUIRE(r.stats.size() == 1);
  CHECK(r.stats[0].std == 0.0);
  CHECK(r.stats[0].mean == r.traces[0].best_value);
  fs::remove_all(d);
}

TEST_CASE("failed runs are recorded and marked missing") {
  const config::RunConfig cfg = config::task_defaults("synthetic");
  const TraceSummary t = read_trace(error_jsonl("lbo", 4, cfg, "boom, \"quoted\""));
  CHECK_FALSE(t.ok);
  CHECK(t.error == "boom, \"quoted\"");
  CHECK(t.seed == 4);
  const std::vector<TraceSummary> ts{t};
  const auto stats = arm_stats(ts);
  CHECK(stats[0].failed == 1);
  CHECK(std::isnan(stats[0].mean));
  CHECK(summary_csv(ts).find("missing") != std::string::npos);
  CHECK(runs_csv(ts).find("\"boom, \"\"quoted\"\"\"") != std::string::npos);
  CHECK_THROWS_AS(read_trace("{\"schema\":99,\"type\":\"header\"}\n"), Error);
  CHECK_THROWS_AS(read_trace("not json\n"), Error);
  CHECK_THROWS_AS(report("/nonexistent/dir", "csv"), Error);
}

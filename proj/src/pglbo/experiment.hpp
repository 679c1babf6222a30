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

#ifndef PGLBO_EXPERIMENT_HPP
#define PGLBO_EXPERIMENT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pglbo/boloop.hpp"
#include "pglbo/config.hpp"

namespace pglbo::experiment {

inline constexpr int kTraceSchema = 1;

/// Per-seed inputs shared by every variant: the pretrained VAE and the initial
/// labeled set.
struct Prepared {
  tasks::Task task;
  vae::VaeState vae;
  LabeledDataset initial;
  std::vector<double> pretrain_losses;
};

/// Draws the pool, pretrains and draws the initial set from substreams of the
/// seed. A given VAE skips pool generation and pretraining.
Prepared prepare(const config::RunConfig& cfg, std::uint64_t seed, const vae::VaeState* vae = nullptr);

/// A variant plus config overrides, written "variant" or "variant/key=value/...".
struct Arm {
  std::string label;
  boloop::Variant variant = boloop::Variant::Pglbo;
  std::vector<std::pair<std::string, std::string>> overrides;

  static Arm parse(const std::string& label);
  config::RunConfig apply(const config::RunConfig& base) const;
};

struct ExperimentSpec {
  config::RunConfig base;
  std::vector<Arm> arms;
  std::vector<std::uint64_t> seeds;
  std::string output_dir;
  std::size_t workers = 1;

  void validate() const;
  /// Config text plus "variants = a,b,..." and "seeds = 1,2,...".
  static ExperimentSpec parse(const std::string& text);
};

/// One JSON object per line: header, per-iteration, per-epoch and per-pseudo-build
/// records, then a summary (or an error) record. Contains no timings.
std::string trace_jsonl(const std::string& arm, const config::RunConfig& cfg, const boloop::RunResult& r);
std::string error_jsonl(const std::string& arm, std::uint64_t seed, const config::RunConfig& cfg,
                        const std::string& message);

/// A trace reduced to what the summaries need.
struct TraceSummary {
  std::string arm;
  std::string variant;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double best_value = 0.0;
  std::size_t skipped = 0;
  std::size_t fallbacks = 0;
  std::vector<double> best_so_far;
};

TraceSummary read_trace(const std::string& jsonl);
/// Every *.jsonl under dir/traces, ordered by (arm, seed).
std::vector<TraceSummary> read_traces(const std::string& dir);

struct ArmStats {
  std::string arm;
  std::string variant;
  std::size_t runs = 0;
  std::size_t failed = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 with one run
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Arms in first-seen order.
std::vector<ArmStats> arm_stats(const std::vector<TraceSummary>& traces);

std::string summary_csv(const std::vector<TraceSummary>& traces);
std::string runs_csv(const std::vector<TraceSummary>& traces);
/// Long format: arm, seed, iteration, best_so_far.
std::string best_so_far_csv(const std::vector<TraceSummary>& traces);
/// Per arm and iteration: mean and standard deviation across seeds.
std::string best_so_far_mean_csv(const std::vector<TraceSummary>& traces);
std::string summary_markdown(const std::vector<TraceSummary>& traces);

/// RFC 4180 quoting of one field.
std::string csv_field(const std::string& s);

struct ExperimentResult {
  std::vector<TraceSummary> traces;
  std::vector<ArmStats> stats;
};

/// Runs every (arm, seed), writes traces/, summary.csv, runs.csv, best_so_far*.csv
/// and meta.json (timings and timestamps) under the output directory.
ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Rewrites the summaries from the traces in dir. format is "csv" or "md";
/// returns the main summary text.
std::string report(const std::string& dir, const std::string& format);

struct DiagnosticGroup {
  double mean_variance = 0.0;
  double mean_mae = 0.0;
  std::size_t count = 0;
};

struct DiagnosticReport {
  std::vector<DiagnosticGroup> groups;
  std::optional<double> spearman;  // empty when a side is constant
  std::size_t evaluated = 0;
  std::size_t failed = 0;
};

struct DiagnosticOptions {
  /// Latents are drawn around GP training latents with a per-point noise scale
  /// log-uniform in [min_sigma, max_sigma].
  double min_sigma = 0.05;
  double max_sigma = 4.0;
};

/// Pseudo-label error |mu(z) - f(decode(z))| against GP variance, grouped by
/// ascending variance.
DiagnosticReport threshold_diagnostic(const gp::GpState& gp, const tasks::Task& task, const vae::VaeState& vae,
                                      std::size_t n, std::size_t group, Rng& rng,
                                      const DiagnosticOptions& opt = {});

/// Spearman correlation with average ranks for ties; empty when undefined.
std::optional<double> spearman(const Vector& a, const Vector& b);

std::string diagnostic_csv(const DiagnosticReport& r);

/// The final GP of a finished run: fitted on the re-encoded labeled data.
gp::GpState final_gp(const config::RunConfig& cfg, const boloop::RunState& state);

}  // namespace pglbo::experiment

#endif  // PGLBO_EXPERIMENT_HPP

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

#include "pglbo/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace pglbo::config {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  fail(ErrorCode::Config, "config: key '" + key + "' expects " + expected + ", got '" + value + "'");
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || v.empty()) bad_value(key, v, "a non-negative integer");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  const std::size_t s = to_size(key, v);
  if (s > static_cast<std::size_t>(std::numeric_limits<int>::max())) bad_value(key, v, "a smaller integer");
  return static_cast<int>(s);
}

double to_double(const std::string& key, const std::string& v) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || v.empty() || std::isnan(out))
    bad_value(key, v, "a number");
  return out;
}

std::vector<std::size_t> to_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_size(key, trim(item)));
  if (out.empty()) bad_value(key, v, "a comma-separated list of integers");
  return out;
}

std::string list_text(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Key {
  KeyInfo info;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SIZE_KEY(name, field, doc)                                                               \
  Key {                                                                                          \
    {name, "int", doc}, [](RunConfig& c, const std::string& v) { c.field = to_size(name, v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }                               \
  }
#define INT_KEY(name, field, doc)                                                               \
  Key {                                                                                         \
    {name, "int", doc}, [](RunConfig& c, const std::string& v) { c.field = to_int(name, v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }                              \
  }
#define REAL_KEY(name, field, doc)                                                                  \
  Key {                                                                                             \
    {name, "real", doc}, [](RunConfig& c, const std::string& v) { c.field = to_double(name, v); }, \
        [](const RunConfig& c) { return format_double(c.field); }                                   \
  }
#define ENUM_KEY(name, field, parser, choices, doc)                                                  \
  Key {                                                                                              \
    {name, choices, doc}, [](RunConfig& c, const std::string& v) { c.field = parser(v); }, \
        [](const RunConfig& c) { return to_string(c.field); }                                        \
  }

const std::vector<Key>& registry() {
  using namespace boloop;
  using pseudo::parse_threshold_mode;
  using pseudo::to_string;
  using sampler::parse_provenance;
  using sampler::to_string;
  static const std::vector<Key> reg = {
      Key{{"task", "topology|synthetic", "Benchmark task; selects the defaults for every other key."},
          [](RunConfig& c, const std::string& v) {
            tasks::make_task(v);
            c.task = v;
          },
          [](const RunConfig& c) { return c.task; }},
      SIZE_KEY("pool_size", pool_size, "Unlabeled points generated for VAE pretraining."),
      SIZE_KEY("initial_size", initial_size, "Initial labeled points (failed evaluations are dropped)."),
      SIZE_KEY("vae.latent_dim", latent_dim, "Latent dimension."),
      Key{{"vae.hidden", "int list", "Encoder hidden widths, comma-separated; the decoder mirrors them."},
          [](RunConfig& c, const std::string& v) { c.hidden = to_list("vae.hidden", v); },
          [](const RunConfig& c) { return list_text(c.hidden); }},
      INT_KEY("pretrain.epochs", pretrain.epochs, "Pretraining epochs on the unlabeled pool."),
      SIZE_KEY("pretrain.batch_size", pretrain.batch_size, "Pretraining minibatch size."),
      REAL_KEY("pretrain.learning_rate", pretrain.learning_rate, "Pretraining Adam learning rate."),
      SIZE_KEY("bo.budget", bo.budget, "Objective evaluations M."),
      SIZE_KEY("bo.retrain_every", bo.retrain_every, "Evaluations per round r (VAE retrained once per round)."),
      ENUM_KEY("bo.acquisition", bo.acquisition, parse_acquisition, "ei|pi|ucb", "Acquisition; only ei is implemented."),
      INT_KEY("acq.restarts", bo.acq_restarts, "Random starts for acquisition ascent (the incumbent is added)."),
      INT_KEY("acq.steps", bo.acq_steps, "Ascent steps per start."),
      REAL_KEY("acq.lr", bo.acq_lr, "Ascent step size as a fraction of the box width."),
      Key{{"loss.lambda_p", "schedule", "Pseudo-label weight: a number, or linear:<start>,<end> over rounds."},
          [](RunConfig& c, const std::string& v) { c.bo.loss.lambda_p = trainer::Schedule::parse(v); },
          [](const RunConfig& c) { return c.bo.loss.lambda_p.to_string(); }},
      REAL_KEY("loss.lambda_g", bo.loss.lambda_g, "GP guidance weight."),
      INT_KEY("retrain.epochs", bo.retrain.epochs, "Retraining epochs per round."),
      SIZE_KEY("retrain.batch_size", bo.retrain.batch_size, "Retraining minibatch size."),
      REAL_KEY("retrain.learning_rate", bo.retrain.learning_rate, "Retraining Adam learning rate."),
      REAL_KEY("weights.k", bo.retrain.weights.k, "Rank-weight parameter k for labeled data; inf gives uniform weights."),
      REAL_KEY("weights.pseudo_k", bo.retrain.pseudo_weights.k, "Rank-weight parameter k for pseudo-labeled data."),
      ENUM_KEY("pseudo.size_rule", bo.size_rule, parse_size_rule, "half|tenfold",
               "Pseudo-dataset size: half or ten times the labeled size."),
      REAL_KEY("pseudo.oversample", bo.oversample, "Candidates drawn per kept pseudo point."),
      ENUM_KEY("sampler", bo.sampler, parse_provenance, "noise|cmaes|random", "Latent sampler for pseudo candidates."),
      REAL_KEY("sampler.noise_sigma", bo.noise_sigma, "Gaussian noise scale of the noise sampler."),
      SIZE_KEY("sampler.top_seeds", bo.top_seeds, "Highest-weighted labeled latents used as seeds."),
      SIZE_KEY("cmaes.iters", bo.cmaes_iters, "CMA-ES generations per instance."),
      REAL_KEY("cmaes.sigma0", bo.cmaes_sigma0, "Initial CMA-ES step size."),
      SIZE_KEY("cmaes.population", bo.cmaes.population, "CMA-ES population; 0 selects 4 + floor(3 ln d)."),
      SIZE_KEY("cmaes.group_size", bo.cmaes.group_size, "Seeds per CMA-ES instance."),
      SIZE_KEY("cmaes.burn_in", bo.cmaes.burn_in, "Leading generations whose points are discarded."),
      ENUM_KEY("threshold.mode", bo.threshold, parse_threshold_mode, "dynamic|fixed|none",
               "Uncertainty threshold: EMA-updated, constant, or disabled."),
      REAL_KEY("threshold.fixed_tau", bo.fixed_tau, "Threshold value in fixed mode."),
      REAL_KEY("threshold.lambda", bo.ema_lambda, "EMA decay of the dynamic threshold."),
      INT_KEY("gp.restarts", bo.gp_fit.restarts, "Hyperparameter restarts for the first GP fit of each round."),
      INT_KEY("gp.max_iters", bo.gp_fit.max_iters, "BFGS iterations for that fit."),
      INT_KEY("gp.inner_restarts", bo.gp_inner_restarts, "Restarts for warm-started refits within a round."),
      INT_KEY("gp.inner_max_iters", bo.gp_inner_max_iters, "BFGS iterations for those refits."),
  };
  return reg;
}

#undef SIZE_KEY
#undef INT_KEY
#undef REAL_KEY
#undef ENUM_KEY

const Key& find(const std::string& key) {
  for (const Key& k : registry())
    if (k.info.name == key) return k;
  fail(ErrorCode::Config, "config: unknown key '" + key + "'");
}

}  // namespace

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void RunConfig::validate() const {
  tasks::make_task(task);
  require(pool_size >= 1, ErrorCode::Config, "config: pool_size must be >= 1");
  require(initial_size >= 2, ErrorCode::Config, "config: initial_size must be >= 2");
  require(pretrain.epochs >= 0 && pretrain.batch_size >= 1 && pretrain.learning_rate > 0.0, ErrorCode::Config,
          "config: invalid pretraining settings");
  vae::VaeArch a;
  a.input_dim = 1;
  a.latent_dim = latent_dim;
  a.hidden = hidden;
  a.validate();
  bo.validate();
}

vae::VaeArch RunConfig::arch(const tasks::Task& t) const {
  vae::VaeArch a;
  a.input_dim = t.input_dim;
  a.latent_dim = latent_dim;
  a.hidden = hidden;
  a.likelihood = t.likelihood;
  return a;
}

RunConfig task_defaults(const std::string& task) {
  RunConfig c;
  c.task = task;
  if (task == "topology") {
    c.pretrain.epochs = 20;
    return c;
  }
  if (task == "synthetic") {
    c.initial_size = 20;
    c.latent_dim = 4;
    c.hidden = {32, 32};
    c.pretrain.epochs = 30;
    c.bo.budget = 100;
    c.bo.retrain_every = 20;
    c.bo.retrain.epochs = 5;
    c.bo.loss.lambda_p = trainer::Schedule::linear_increase(0.1, 0.75);
    c.bo.loss.lambda_g = 0.1;
    return c;
  }
  fail(ErrorCode::Config, "config: unknown task '" + task + "'");
}

const std::vector<KeyInfo>& keys() {
  static const std::vector<KeyInfo> out = [] {
    std::vector<KeyInfo> v;
    for (const Key& k : registry()) v.push_back(k.info);
    return v;
  }();
  return out;
}

void set(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "task") {
    // Switching task restarts from that task's defaults.
    cfg = task_defaults(value);
    return;
  }
  find(key).set(cfg, value);
}

std::string get(const RunConfig& cfg, const std::string& key) { return find(key).get(cfg); }

std::vector<std::pair<std::string, std::string>> parse_lines(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::Config,
            "config: line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    require(!key.empty(), ErrorCode::Config, "config: line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

RunConfig parse(const std::string& text) {
  const auto lines = parse_lines(text);
  std::set<std::string> seen;
  for (const auto& [k, v] : lines) {
    (void)v;
    require(seen.insert(k).second, ErrorCode::Config, "config: key '" + k + "' given more than once");
  }
  RunConfig cfg = task_defaults("topology");
  for (const auto& [k, v] : lines)
    if (k == "task") cfg = task_defaults(v);
  for (const auto& [k, v] : lines)
    if (k != "task") set(cfg, k, v);
  cfg.validate();
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig load(const std::string& path) { return parse(read_file(path)); }

std::string to_text(const RunConfig& cfg) {
  std::string out;
  for (const Key& k : registry()) out += k.info.name + " = " + k.get(cfg) + "\n";
  return out;
}

namespace {

std::string escape_pipes(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string reference_markdown() {
  const RunConfig topo = task_defaults("topology"), synth = task_defaults("synthetic");
  std::string out =
      "# Configuration reference\n\n"
      "Config files are flat `key = value` text. `#` starts a comment. Unknown keys and\n"
      "repeated keys are errors. The `task` key selects the defaults below; every other\n"
      "key overrides one of them.\n\n"
      "This file is generated by `pglbo config-reference`.\n\n"
      "| key | type | topology | synthetic | description |\n"
      "|---|---|---|---|---|\n";
  for (const Key& k : registry())
    out += "| `" + k.info.name + "` | " + escape_pipes(k.info.type) + " | `" + k.get(topo) + "` | `" + k.get(synth) + "` | " +
           k.info.doc + " |\n";
  out +=
      "\n## Experiment specs\n\n"
      "`pglbo ablate --spec <file>` reads the same format with three extra keys:\n\n"
      "| key | type | description |\n"
      "|---|---|---|\n"
      "| `variants` | arm list | Comma-separated arms. An arm is a variant name (`lsbo`, `lbo`, `plbo`, `glbo`, "
      "`pglbo`) optionally followed by `/key=value` overrides, e.g. `pglbo/sampler=random`. |\n"
      "| `seeds` | int list | Comma-separated distinct seeds. |\n"
      "| `workers` | int | Runs executed in parallel (default 1). |\n";
  return out;
}

}  // namespace pglbo::config

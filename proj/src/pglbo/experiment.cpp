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

#include "pglbo/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "pglbo/sampler.hpp"

namespace pglbo::experiment {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kPoolStream = 11;
constexpr std::uint64_t kPretrainStream = 12;
constexpr std::uint64_t kInitialStream = 13;
constexpr std::uint64_t kFinalGpStream = 14;

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

ordered_json record(const char* type) {
  ordered_json j;
  j["schema"] = kTraceSchema;
  j["type"] = type;
  return j;
}

ordered_json header(const std::string& arm, const std::string& variant, std::uint64_t seed,
                    const config::RunConfig& cfg) {
  ordered_json h = record("header");
  h["arm"] = arm;
  h["variant"] = variant;
  h["seed"] = seed;
  h["task"] = cfg.task;
  ordered_json c = ordered_json::object();
  for (const auto& k : config::keys()) c[k.name] = config::get(cfg, k.name);
  h["config"] = c;
  return h;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(f), ErrorCode::Io, "cannot write '" + p.string() + "'");
  f << text;
  require(static_cast<bool>(f), ErrorCode::Io, "write failed for '" + p.string() + "'");
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  return out;
}

std::string iso_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string num(double v) { return config::format_double(v); }

/// Pool and pretraining depend only on these keys, so arms that agree on them share one VAE.
std::string prepare_key(const config::RunConfig& c, std::uint64_t seed) {
  std::string k = std::to_string(seed);
  for (const char* key : {"task", "pool_size", "initial_size", "vae.latent_dim", "vae.hidden", "pretrain.epochs",
                          "pretrain.batch_size", "pretrain.learning_rate"})
    k += "|" + config::get(c, key);
  return k;
}

}  // namespace

Prepared prepare(const config::RunConfig& cfg, std::uint64_t seed, const vae::VaeState* vae) {
  cfg.validate();
  Prepared p;
  p.task = tasks::make_task(cfg.task);
  const Rng base(seed);
  if (vae) {
    require(vae->arch.input_dim == p.task.input_dim, ErrorCode::Config,
            "prepare: VAE input dimension does not match the task");
    p.vae = *vae;
  } else {
    Rng pool_rng = base.substream(kPoolStream);
    const Matrix pool = p.task.generate(cfg.pool_size, pool_rng);
    Rng train_rng = base.substream(kPretrainStream);
    p.vae = vae::pretrain(cfg.arch(p.task), pool, cfg.pretrain, train_rng, &p.pretrain_losses);
  }
  Rng init_rng = base.substream(kInitialStream);
  p.initial = boloop::initial_dataset(p.task, p.task.generate(cfg.initial_size, init_rng));
  return p;
}

Arm Arm::parse(const std::string& label) {
  Arm a;
  a.label = label;
  std::stringstream ss(label);
  std::string part;
  bool first = true;
  while (std::getline(ss, part, '/')) {
    if (first) {
      a.variant = boloop::parse_variant(part);
      first = false;
      continue;
    }
    const auto eq = part.find('=');
    require(eq != std::string::npos && eq > 0, ErrorCode::Config, "arm '" + label + "': expected key=value after '/'");
    const std::string key = part.substr(0, eq);
    require(key != "task", ErrorCode::Config, "arm '" + label + "': the task cannot vary across arms");
    a.overrides.emplace_back(key, part.substr(eq + 1));
  }
  require(!first, ErrorCode::Config, "empty arm label");
  return a;
}

config::RunConfig Arm::apply(const config::RunConfig& base) const {
  config::RunConfig c = base;
  for (const auto& [k, v] : overrides) config::set(c, k, v);
  c.validate();
  return c;
}

void ExperimentSpec::validate() const {
  base.validate();
  require(!arms.empty(), ErrorCode::Config, "experiment: at least one variant is required");
  require(!seeds.empty(), ErrorCode::Config, "experiment: at least one seed is required");
  require(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() == seeds.size(), ErrorCode::Config,
          "experiment: seeds must be distinct");
  std::set<std::string> labels;
  for (const Arm& a : arms) {
    require(labels.insert(a.label).second, ErrorCode::Config, "experiment: duplicate arm '" + a.label + "'");
    a.apply(base);
  }
  require(workers >= 1, ErrorCode::Config, "experiment: workers must be >= 1");
}

ExperimentSpec ExperimentSpec::parse(const std::string& text) {
  ExperimentSpec spec;
  std::string rest;
  auto split = [](const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto b = item.find_first_not_of(' '), e = item.find_last_not_of(' ');
      if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
  };
  bool have_variants = false, have_seeds = false;
  for (const auto& [k, v] : config::parse_lines(text)) {
    if (k == "variants") {
      require(!have_variants, ErrorCode::Config, "experiment: variants given more than once");
      have_variants = true;
      for (const auto& label : split(v)) spec.arms.push_back(Arm::parse(label));
    } else if (k == "seeds") {
      require(!have_seeds, ErrorCode::Config, "experiment: seeds given more than once");
      have_seeds = true;
      for (const auto& s : split(v)) {
        std::size_t pos = 0;
        std::uint64_t seed = 0;
        try {
          seed = std::stoull(s, &pos);
        } catch (const std::exception&) {
          pos = 0;
        }
        require(pos == s.size() && !s.empty() && s[0] != '-', ErrorCode::Config, "experiment: bad seed '" + s + "'");
        spec.seeds.push_back(seed);
      }
    } else if (k == "workers") {
      std::size_t pos = 0;
      try {
        spec.workers = std::stoul(v, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      require(pos == v.size() && !v.empty() && v[0] != '-', ErrorCode::Config, "experiment: bad workers '" + v + "'");
    } else {
      rest += k + " = " + v + "\n";
    }
  }
  spec.base = config::parse(rest);
  spec.validate();
  return spec;
}

std::string trace_jsonl(const std::string& arm, const config::RunConfig& cfg, const boloop::RunResult& r) {
  const boloop::RunState& s = r.state;
  std::string out = header(arm, boloop::to_string(s.variant), s.seed, cfg).dump() + "\n";
  std::size_t epoch = 0, pseudo = 0, it = 0;
  // Events are written in the order they happen: a round's epochs, then its iterations,
  // then its pseudo build.
  for (std::size_t round = 0; round < s.next_round; ++round) {
    for (; epoch < s.epochs.size() && s.epochs[epoch].round == round; ++epoch) {
      const auto& e = s.epochs[epoch];
      ordered_json j = record("epoch");
      j["round"] = e.round;
      j["epoch"] = e.epoch;
      j["loss_labeled"] = e.loss.labeled;
      j["loss_pseudo"] = e.loss.pseudo;
      j["loss_guidance"] = e.loss.guidance;
      j["loss_total"] = e.loss.total;
      j["lambda_p"] = e.lambda_p;
      j["lambda_g"] = e.lambda_g;
      out += j.dump() + "\n";
    }
    if (round < s.vae_fingerprints.size()) {
      ordered_json j = record("round");
      j["round"] = round;
      j["vae_fingerprint"] = hex64(s.vae_fingerprints[round]);
      out += j.dump() + "\n";
    }
    for (; it < s.iterations.size() && s.iterations[it].round == round; ++it) {
      const auto& x = s.iterations[it];
      ordered_json j = record("iteration");
      j["iteration"] = x.iteration;
      j["round"] = x.round;
      j["ok"] = x.ok;
      j["value"] = x.value;
      j["best_so_far"] = x.best_so_far;
      j["ei"] = x.ei;
      j["fallback"] = x.fallback;
      j["tau"] = x.tau;
      j["lambda_p"] = x.lambda_p;
      j["lambda_g"] = x.lambda_g;
      if (!x.note.empty()) j["note"] = x.note;
      j["latent"] = to_std(x.latent);
      out += j.dump() + "\n";
    }
    for (; pseudo < s.pseudo_log.size() && s.pseudo_log[pseudo].round == round; ++pseudo) {
      const auto& p = s.pseudo_log[pseudo];
      ordered_json j = record("pseudo");
      j["round"] = p.round;
      j["target"] = p.target;
      j["candidates"] = p.candidates;
      j["passed"] = p.passed;
      j["used"] = p.used;
      j["tau_used"] = p.tau_used;
      j["tau_next"] = p.tau_next;
      j["mean_variance"] = p.mean_variance;
      j["mean_variance_used"] = p.mean_variance_used;
      j["mean_label"] = p.mean_label;
      j["capped"] = p.capped;
      out += j.dump() + "\n";
    }
  }
  ordered_json j = record("summary");
  j["completed"] = r.completed;
  j["best_value"] = r.best_value;
  j["best_input"] = to_std(r.best_input);
  j["evaluations"] = s.iterations.size();
  j["labeled_size"] = s.labeled.size();
  j["initial_size"] = s.initial_size;
  j["skipped"] = s.skipped;
  j["fallbacks"] = s.fallbacks;
  out += j.dump() + "\n";
  return out;
}

std::string error_jsonl(const std::string& arm, std::uint64_t seed, const config::RunConfig& cfg,
                        const std::string& message) {
  std::string variant = arm.substr(0, arm.find('/'));
  ordered_json j = record("error");
  j["message"] = message;
  return header(arm, variant, seed, cfg).dump() + "\n" + j.dump() + "\n";
}

TraceSummary read_trace(const std::string& jsonl) {
  TraceSummary t;
  std::istringstream in(jsonl);
  std::string line;
  bool have_header = false, have_end = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const std::exception& e) {
      fail(ErrorCode::Io, std::string("trace: malformed JSON line: ") + e.what());
    }
    require(j.value("schema", 0) == kTraceSchema, ErrorCode::Io, "trace: unsupported schema version");
    const std::string type = j.at("type");
    if (type == "header") {
      t.arm = j.at("arm");
      t.variant = j.at("variant");
      t.seed = j.at("seed");
      have_header = true;
    } else if (type == "iteration") {
      t.best_so_far.push_back(j.at("best_so_far").get<double>());
    } else if (type == "summary") {
      t.ok = true;
      t.best_value = j.at("best_value");
      t.skipped = j.at("skipped");
      t.fallbacks = j.at("fallbacks");
      have_end = true;
    } else if (type == "error") {
      t.ok = false;
      t.error = j.at("message");
      have_end = true;
    }
  }
  require(have_header, ErrorCode::Io, "trace: missing header record");
  if (!have_end) {
    t.ok = false;
    t.error = "trace ended without a summary record";
  }
  return t;
}

std::vector<TraceSummary> read_traces(const std::string& dir) {
  const fs::path tdir = fs::path(dir) / "traces";
  require(fs::is_directory(tdir), ErrorCode::Io, "no traces directory under '" + dir + "'");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(tdir))
    if (e.path().extension() == ".jsonl") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<TraceSummary> out;
  for (const auto& f : files) out.push_back(read_trace(config::read_file(f.string())));
  // File names start with the arm index, so first appearance gives the arm order.
  std::map<std::string, std::size_t> order;
  for (const auto& t : out) order.emplace(t.arm, order.size());
  std::stable_sort(out.begin(), out.end(), [&](const TraceSummary& a, const TraceSummary& b) {
    return std::make_pair(order.at(a.arm), a.seed) < std::make_pair(order.at(b.arm), b.seed);
  });
  return out;
}

std::vector<ArmStats> arm_stats(const std::vector<TraceSummary>& traces) {
  std::vector<ArmStats> out;
  std::map<std::string, std::vector<double>> values;
  for (const auto& t : traces) {
    auto it = std::find_if(out.begin(), out.end(), [&](const ArmStats& s) { return s.arm == t.arm; });
    if (it == out.end()) {
      out.push_back({});
      it = out.end() - 1;
      it->arm = t.arm;
      it->variant = t.variant;
    }
    ++it->runs;
    if (t.ok)
      values[t.arm].push_back(t.best_value);
    else
      ++it->failed;
  }
  for (auto& s : out) {
    const auto& v = values[s.arm];
    if (v.empty()) {
      s.mean = s.std = s.median = s.min = s.max = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    s.mean = mean_of(v);
    s.std = sample_std(v, s.mean);
    s.median = median_of(v);
    s.min = *std::min_element(v.begin(), v.end());
    s.max = *std::max_element(v.begin(), v.end());
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

namespace {

std::string stat_cell(double v) { return std::isnan(v) ? "missing" : num(v); }

}  // namespace

std::string summary_csv(const std::vector<TraceSummary>& traces) {
  std::string out = "arm,variant,runs,failed,mean_best,std_best,median_best,min_best,max_best\n";
  for (const auto& s : arm_stats(traces))
    out += csv_field(s.arm) + "," + s.variant + "," + std::to_string(s.runs) + "," + std::to_string(s.failed) + "," +
           stat_cell(s.mean) + "," + stat_cell(s.std) + "," + stat_cell(s.median) + "," + stat_cell(s.min) + "," +
           stat_cell(s.max) + "\n";
  return out;
}

std::string runs_csv(const std::vector<TraceSummary>& traces) {
  std::string out = "arm,seed,status,best_value,evaluations,skipped,fallbacks,error\n";
  for (const auto& t : traces)
    out += csv_field(t.arm) + "," + std::to_string(t.seed) + "," + (t.ok ? "ok" : "failed") + "," +
           (t.ok ? num(t.best_value) : "missing") + "," + std::to_string(t.best_so_far.size()) + "," +
           std::to_string(t.skipped) + "," + std::to_string(t.fallbacks) + "," + csv_field(t.error) + "\n";
  return out;
}

std::string best_so_far_csv(const std::vector<TraceSummary>& traces) {
  std::string out = "arm,seed,iteration,best_so_far\n";
  for (const auto& t : traces)
    for (std::size_t i = 0; i < t.best_so_far.size(); ++i)
      out += csv_field(t.arm) + "," + std::to_string(t.seed) + "," + std::to_string(i) + "," + num(t.best_so_far[i]) +
             "\n";
  return out;
}

std::string best_so_far_mean_csv(const std::vector<TraceSummary>& traces) {
  std::string out = "arm,iteration,mean,std,runs\n";
  for (const auto& s : arm_stats(traces)) {
    std::size_t len = 0;
    for (const auto& t : traces)
      if (t.arm == s.arm && t.ok) len = std::max(len, t.best_so_far.size());
    for (std::size_t i = 0; i < len; ++i) {
      std::vector<double> v;
      for (const auto& t : traces)
        if (t.arm == s.arm && t.ok && i < t.best_so_far.size()) v.push_back(t.best_so_far[i]);
      const double m = mean_of(v);
      out += csv_field(s.arm) + "," + std::to_string(i) + "," + num(m) + "," + num(sample_std(v, m)) + "," +
             std::to_string(v.size()) + "\n";
    }
  }
  return out;
}

std::string summary_markdown(const std::vector<TraceSummary>& traces) {
  std::string out = "| arm | runs | failed | mean ± std | median | min | max |\n|---|---|---|---|---|---|---|\n";
  auto cell = [](double v) {
    if (std::isnan(v)) return std::string("missing");
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
  };
  for (const auto& s : arm_stats(traces))
    out += "| " + s.arm + " | " + std::to_string(s.runs) + " | " + std::to_string(s.failed) + " | " + cell(s.mean) +
           " ± " + cell(s.std) + " | " + cell(s.median) + " | " + cell(s.min) + " | " + cell(s.max) + " |\n";
  return out;
}

namespace {

void write_summaries(const fs::path& dir, const std::vector<TraceSummary>& traces) {
  write_file(dir / "summary.csv", summary_csv(traces));
  write_file(dir / "runs.csv", runs_csv(traces));
  write_file(dir / "best_so_far.csv", best_so_far_csv(traces));
  write_file(dir / "best_so_far_mean.csv", best_so_far_mean_csv(traces));
}

std::string trace_name(std::size_t arm_index, const Arm& arm, std::uint64_t seed) {
  std::ostringstream os;
  os << std::setw(2) << std::setfill('0') << arm_index << "_" << sanitize(arm.label) << "_seed" << seed << ".jsonl";
  return os.str();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const fs::path dir(spec.output_dir);
  fs::create_directories(dir / "traces");
  const std::string started = iso_now();

  // Shared per-seed preparation.
  std::vector<std::string> keys;
  std::map<std::string, std::pair<config::RunConfig, std::uint64_t>> jobs;
  for (const Arm& a : spec.arms)
    for (std::uint64_t seed : spec.seeds) {
      const config::RunConfig c = a.apply(spec.base);
      const std::string k = prepare_key(c, seed);
      if (jobs.emplace(k, std::make_pair(c, seed)).second) keys.push_back(k);
    }
  std::map<std::string, std::shared_ptr<Prepared>> prepared;
  std::map<std::string, std::string> prepare_errors;
  std::map<std::string, double> prepare_seconds;
  std::mutex mu;
  parallel_for(keys.size(), spec.workers, [&](std::size_t i) {
    const auto& [c, seed] = jobs.at(keys[i]);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      auto p = std::make_shared<Prepared>(prepare(c, seed));
      const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::lock_guard<std::mutex> lock(mu);
      prepared[keys[i]] = std::move(p);
      prepare_seconds[keys[i]] = dt;
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(mu);
      prepare_errors[keys[i]] = e.what();
    }
  });

  struct RunMeta {
    std::string arm;
    std::uint64_t seed = 0;
    double seconds = 0.0;
    boloop::PhaseTimes times;
    bool ok = false;
  };
  const std::size_t n = spec.arms.size() * spec.seeds.size();
  std::vector<RunMeta> meta(n);
  parallel_for(n, spec.workers, [&](std::size_t i) {
    const std::size_t ai = i / spec.seeds.size();
    const Arm& arm = spec.arms[ai];
    const std::uint64_t seed = spec.seeds[i % spec.seeds.size()];
    const config::RunConfig c = arm.apply(spec.base);
    const std::string key = prepare_key(c, seed);
    RunMeta& m = meta[i];
    m.arm = arm.label;
    m.seed = seed;
    std::string text;
    const auto t0 = std::chrono::steady_clock::now();
    std::shared_ptr<Prepared> p;
    std::string prep_error;
    {
      std::lock_guard<std::mutex> lock(mu);
      if (auto it = prepared.find(key); it != prepared.end()) p = it->second;
      if (auto it = prepare_errors.find(key); it != prepare_errors.end()) prep_error = it->second;
    }
    if (!p) {
      text = error_jsonl(arm.label, seed, c, "preparation failed: " + prep_error);
    } else {
      try {
        const boloop::RunResult r = boloop::run_variant(arm.variant, c.bo, p->task, p->vae, p->initial, seed);
        text = trace_jsonl(arm.label, c, r);
        m.times = r.times;
        m.ok = true;
      } catch (const std::exception& e) {
        text = error_jsonl(arm.label, seed, c, e.what());
      }
    }
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_file(dir / "traces" / trace_name(ai, arm, seed), text);
  });

  ExperimentResult result;
  result.traces = read_traces(spec.output_dir);
  result.stats = arm_stats(result.traces);
  write_summaries(dir, result.traces);

  ordered_json mj;
  mj["schema"] = kTraceSchema;
  mj["started"] = started;
  mj["finished"] = iso_now();
  mj["workers"] = spec.workers;
  mj["runs"] = ordered_json::array();
  for (const auto& m : meta) {
    ordered_json r;
    r["arm"] = m.arm;
    r["seed"] = m.seed;
    r["ok"] = m.ok;
    r["seconds"] = m.seconds;
    r["retrain_seconds"] = m.times.retrain;
    r["gp_seconds"] = m.times.gp;
    r["acquisition_seconds"] = m.times.acquisition;
    r["pseudo_seconds"] = m.times.pseudo;
    mj["runs"].push_back(r);
  }
  mj["prepare"] = ordered_json::array();
  for (const auto& k : keys) {
    ordered_json r;
    r["seed"] = jobs.at(k).second;
    r["seconds"] = prepare_seconds.count(k) ? prepare_seconds.at(k) : 0.0;
    if (prepare_errors.count(k)) r["error"] = prepare_errors.at(k);
    mj["prepare"].push_back(r);
  }
  write_file(dir / "meta.json", mj.dump(2) + "\n");
  return result;
}

std::string report(const std::string& dir, const std::string& format) {
  require(format == "csv" || format == "md", ErrorCode::Config, "report: format must be csv or md");
  const auto traces = read_traces(dir);
  write_summaries(dir, traces);
  if (format == "md") {
    const std::string md = summary_markdown(traces);
    write_file(fs::path(dir) / "summary.md", md);
    return md;
  }
  return summary_csv(traces);
}

std::optional<double> spearman(const Vector& a, const Vector& b) {
  require(a.size() == b.size(), ErrorCode::Shape, "spearman: length mismatch");
  const Eigen::Index n = a.size();
  if (n < 2) return std::nullopt;
  auto avg_ranks = [n](const Vector& v) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto i, auto j) { return v[i] < v[j]; });
    Vector r(n);
    for (Eigen::Index i = 0; i < n;) {
      Eigen::Index j = i;
      while (j + 1 < n && v[idx[static_cast<std::size_t>(j + 1)]] == v[idx[static_cast<std::size_t>(i)]]) ++j;
      const double rank = 0.5 * static_cast<double>(i + j);
      for (Eigen::Index k = i; k <= j; ++k) r[idx[static_cast<std::size_t>(k)]] = rank;
      i = j + 1;
    }
    return r;
  };
  const Vector ra = avg_ranks(a), rb = avg_ranks(b);
  const Vector ca = ra.array() - ra.mean(), cb = rb.array() - rb.mean();
  const double sa = ca.squaredNorm(), sb = cb.squaredNorm();
  if (sa == 0.0 || sb == 0.0) return std::nullopt;
  return ca.dot(cb) / std::sqrt(sa * sb);
}

DiagnosticReport threshold_diagnostic(const gp::GpState& gp, const tasks::Task& task, const vae::VaeState& vae,
                                      std::size_t n, std::size_t group, Rng& rng, const DiagnosticOptions& opt) {
  require(group >= 1 && n >= 2 * group, ErrorCode::InvalidArgument, "threshold_diagnostic: need n >= 2 * group");
  require(gp.size() >= 1, ErrorCode::InvalidArgument, "threshold_diagnostic: GP has no training points");
  require(static_cast<std::size_t>(gp.dim()) == vae.arch.latent_dim, ErrorCode::Shape,
          "threshold_diagnostic: GP and VAE latent dimensions differ");
  require(opt.min_sigma > 0.0 && opt.min_sigma <= opt.max_sigma, ErrorCode::InvalidArgument,
          "threshold_diagnostic: invalid noise range");
  const Eigen::Index d = gp.dim();
  Matrix zs(static_cast<Eigen::Index>(n), d);
  const double lo = std::log(opt.min_sigma), hi = std::log(opt.max_sigma);
  for (Eigen::Index i = 0; i < zs.rows(); ++i) {
    const Eigen::Index j = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(gp.size())));
    const double sigma = std::exp(rng.uniform(lo, hi));
    for (Eigen::Index k = 0; k < d; ++k) zs(i, k) = gp.latents(j, k) + sigma * rng.normal();
  }
  const gp::BatchPosterior post = gp::posterior_batch(gp, zs);
  const Matrix decoded = vae::decode_batch(vae, zs);

  DiagnosticReport rep;
  std::vector<std::pair<double, double>> pts;  // (variance, mae)
  for (Eigen::Index i = 0; i < zs.rows(); ++i) {
    const tasks::EvalResult ev = task.evaluate(task.codec(decoded.row(i).transpose()));
    if (!ev.ok) {
      ++rep.failed;
      continue;
    }
    pts.emplace_back(post.variance[i], std::abs(post.mean[i] - ev.value));
  }
  rep.evaluated = pts.size();
  std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  // A trailing partial group is dropped so every group has the same size.
  for (std::size_t g = 0; (g + 1) * group <= pts.size(); ++g) {
    DiagnosticGroup grp;
    grp.count = group;
    for (std::size_t i = g * group; i < (g + 1) * group; ++i) {
      grp.mean_variance += pts[i].first;
      grp.mean_mae += pts[i].second;
    }
    grp.mean_variance /= static_cast<double>(group);
    grp.mean_mae /= static_cast<double>(group);
    rep.groups.push_back(grp);
  }
  Vector v(static_cast<Eigen::Index>(rep.groups.size())), e(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v[i] = rep.groups[static_cast<std::size_t>(i)].mean_variance;
    e[i] = rep.groups[static_cast<std::size_t>(i)].mean_mae;
  }
  rep.spearman = spearman(v, e);
  return rep;
}

std::string diagnostic_csv(const DiagnosticReport& r) {
  std::string out = "group,count,mean_variance,mean_mae\n";
  for (std::size_t i = 0; i < r.groups.size(); ++i)
    out += std::to_string(i) + "," + std::to_string(r.groups[i].count) + "," + num(r.groups[i].mean_variance) + "," +
           num(r.groups[i].mean_mae) + "\n";
  out += "# spearman," + (r.spearman ? num(*r.spearman) : std::string("not-applicable")) + "\n";
  out += "# evaluated," + std::to_string(r.evaluated) + "\n# failed," + std::to_string(r.failed) + "\n";
  return out;
}

gp::GpState final_gp(const config::RunConfig& cfg, const boloop::RunState& state) {
  require(state.labeled.size() >= 2, ErrorCode::State, "final_gp: need at least two labeled points");
  Rng rng = Rng(state.seed).substream(kFinalGpStream);
  const gp::GpHyper init = state.warm ? *state.warm : gp::default_init(state.labeled.scores);
  return trainer::refit_gp_on_reencoded(state.vae, state.labeled, init, cfg.bo.gp_fit, rng);
}

}  // namespace pglbo::experiment

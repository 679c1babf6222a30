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

#include "pglbo/pglbo.h"

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "pglbo/checkpoint.hpp"
#include "pglbo/config.hpp"
#include "pglbo/experiment.hpp"

namespace fs = std::filesystem;
using namespace pglbo;

struct pglbo_config {
  config::RunConfig cfg;
};

struct pglbo_vae {
  vae::VaeState state;
  double final_loss = 0.0;
};

struct pglbo_run {
  boloop::RunResult result;
};

namespace {

thread_local std::string g_last_error;

pglbo_status map_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return PGLBO_ERR_INVALID_ARGUMENT;
    case ErrorCode::Config: return PGLBO_ERR_CONFIG;
    case ErrorCode::Shape: return PGLBO_ERR_SHAPE;
    case ErrorCode::Decomposition: return PGLBO_ERR_DECOMPOSITION;
    case ErrorCode::Numerical: return PGLBO_ERR_NUMERICAL;
    case ErrorCode::Fit: return PGLBO_ERR_FIT;
    case ErrorCode::Training: return PGLBO_ERR_TRAINING;
    case ErrorCode::State: return PGLBO_ERR_STATE;
    case ErrorCode::Io: return PGLBO_ERR_IO;
    case ErrorCode::Evaluation: return PGLBO_ERR_EVALUATION;
  }
  return PGLBO_ERR_INTERNAL;
}

template <class F>
pglbo_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return PGLBO_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return map_code(e.code());
  } catch (const fs::filesystem_error& e) {
    g_last_error = e.what();
    return PGLBO_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PGLBO_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  require(p != nullptr, ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  require(out != nullptr, ErrorCode::Io, "out of memory");
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(f), ErrorCode::Io, "cannot write '" + p.string() + "'");
  f << text;
  require(static_cast<bool>(f), ErrorCode::Io, "write failed for '" + p.string() + "'");
}

/// Runs (or continues) one run, writing its files under out_dir.
boloop::RunResult drive(const config::RunConfig& cfg, const tasks::Task& task, boloop::RunState state,
                        const fs::path& out, std::size_t max_rounds) {
  fs::create_directories(out / "traces");
  const std::string cfg_text = config::to_text(cfg);
  const std::size_t stop_at = max_rounds == 0 ? cfg.bo.rounds() : state.next_round + max_rounds;
  boloop::RunHooks hooks;
  hooks.on_round_end = [&](const boloop::RunState& s) {
    checkpoint::Checkpoint c;
    c.run = s;
    c.config_text = cfg_text;
    checkpoint::save(c, (out / "checkpoint.pglb").string());
    return s.next_round < stop_at;
  };
  const auto t0 = std::chrono::steady_clock::now();
  boloop::RunResult r = boloop::resume(cfg.bo, task, std::move(state), hooks);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string label = boloop::to_string(r.state.variant);
  write_file(out / "traces" / ("00_" + label + "_seed" + std::to_string(r.state.seed) + ".jsonl"),
             experiment::trace_jsonl(label, cfg, r));
  experiment::report(out.string(), "csv");
  if (r.completed) {
    checkpoint::Checkpoint g;
    g.vae = r.state.vae;
    g.gp = experiment::final_gp(cfg, r.state);
    g.config_text = cfg_text;
    checkpoint::save(g, (out / "gp.pglb").string());
  }
  nlohmann::ordered_json meta;
  meta["schema"] = experiment::kTraceSchema;
  meta["seconds"] = seconds;
  meta["retrain_seconds"] = r.times.retrain;
  meta["gp_seconds"] = r.times.gp;
  meta["acquisition_seconds"] = r.times.acquisition;
  meta["pseudo_seconds"] = r.times.pseudo;
  meta["completed"] = r.completed;
  write_file(out / "meta.json", meta.dump(2) + "\n");
  return r;
}

}  // namespace

extern "C" {

const char* pglbo_last_error(void) { return g_last_error.c_str(); }
const char* pglbo_version(void) { return "0.1.0"; }
void pglbo_string_free(char* s) { std::free(s); }

pglbo_status pglbo_config_new(const char* task, pglbo_config** out) {
  return guarded([&] {
    need(task, "task");
    need(out, "out");
    *out = new pglbo_config{config::task_defaults(task)};
  });
}

pglbo_status pglbo_config_load(const char* path, pglbo_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new pglbo_config{config::load(path)};
  });
}

pglbo_status pglbo_config_parse(const char* text, pglbo_config** out) {
  return guarded([&] {
    need(text, "text");
    need(out, "out");
    *out = new pglbo_config{config::parse(text)};
  });
}

pglbo_status pglbo_config_set(pglbo_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(value, "value");
    config::RunConfig next = cfg->cfg;
    config::set(next, key, value);
    cfg->cfg = next;
  });
}

pglbo_status pglbo_config_get(const pglbo_config* cfg, const char* key, char** value) {
  return guarded([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(value, "value");
    *value = dup(config::get(cfg->cfg, key));
  });
}

pglbo_status pglbo_config_to_text(const pglbo_config* cfg, char** text) {
  return guarded([&] {
    need(cfg, "cfg");
    need(text, "text");
    *text = dup(config::to_text(cfg->cfg));
  });
}

pglbo_status pglbo_config_reference(char** markdown) {
  return guarded([&] {
    need(markdown, "markdown");
    *markdown = dup(config::reference_markdown());
  });
}

void pglbo_config_free(pglbo_config* cfg) { delete cfg; }

pglbo_status pglbo_pretrain(const pglbo_config* cfg, uint64_t seed, pglbo_vae** out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out, "out");
    experiment::Prepared p = experiment::prepare(cfg->cfg, seed);
    *out = new pglbo_vae{std::move(p.vae), p.pretrain_losses.empty() ? 0.0 : p.pretrain_losses.back()};
  });
}

pglbo_status pglbo_vae_save(const pglbo_vae* vae, const pglbo_config* cfg, const char* path) {
  return guarded([&] {
    need(vae, "vae");
    need(path, "path");
    checkpoint::Checkpoint c;
    c.vae = vae->state;
    if (cfg) c.config_text = config::to_text(cfg->cfg);
    checkpoint::save(c, path);
  });
}

pglbo_status pglbo_vae_load(const char* path, pglbo_vae** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    checkpoint::Checkpoint c = checkpoint::load(path);
    require(c.vae.has_value(), ErrorCode::Io, std::string("'") + path + "' holds no VAE");
    *out = new pglbo_vae{std::move(*c.vae), 0.0};
  });
}

uint64_t pglbo_vae_fingerprint(const pglbo_vae* vae) { return vae ? vae->state.fingerprint() : 0; }
size_t pglbo_vae_parameter_count(const pglbo_vae* vae) { return vae ? vae->state.parameter_count() : 0; }
double pglbo_vae_final_pretrain_loss(const pglbo_vae* vae) { return vae ? vae->final_loss : 0.0; }
void pglbo_vae_free(pglbo_vae* vae) { delete vae; }

pglbo_status pglbo_optimize(const pglbo_config* cfg, const char* variant, uint64_t seed, const pglbo_vae* vae,
                            const char* out_dir, size_t max_rounds, pglbo_run** out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(variant, "variant");
    need(out_dir, "out_dir");
    need(out, "out");
    const boloop::Variant v = boloop::parse_variant(variant);
    experiment::Prepared p = experiment::prepare(cfg->cfg, seed, vae ? &vae->state : nullptr);
    boloop::RunState state = boloop::start_run(cfg->cfg.bo, v, p.task, p.vae, p.initial, seed);
    *out = new pglbo_run{drive(cfg->cfg, p.task, std::move(state), out_dir, max_rounds)};
  });
}

pglbo_status pglbo_resume(const char* checkpoint_path, const char* out_dir, size_t max_rounds, pglbo_run** out) {
  return guarded([&] {
    need(checkpoint_path, "checkpoint_path");
    need(out_dir, "out_dir");
    need(out, "out");
    checkpoint::Checkpoint c = checkpoint::load(checkpoint_path);
    require(c.run.has_value(), ErrorCode::Io, std::string("'") + checkpoint_path + "' holds no run state");
    const config::RunConfig cfg = config::parse(c.config_text);
    const tasks::Task task = tasks::make_task(cfg.task);
    *out = new pglbo_run{drive(cfg, task, std::move(*c.run), out_dir, max_rounds)};
  });
}

double pglbo_run_best_value(const pglbo_run* run) { return run ? run->result.best_value : 0.0; }
size_t pglbo_run_evaluations(const pglbo_run* run) { return run ? run->result.state.iterations.size() : 0; }
size_t pglbo_run_rounds_done(const pglbo_run* run) { return run ? run->result.state.next_round : 0; }
int pglbo_run_completed(const pglbo_run* run) { return run && run->result.completed ? 1 : 0; }
void pglbo_run_free(pglbo_run* run) { delete run; }

pglbo_status pglbo_ablate(const char* spec_path, const char* out_dir, size_t workers, char** summary_csv) {
  return guarded([&] {
    need(spec_path, "spec_path");
    need(out_dir, "out_dir");
    experiment::ExperimentSpec spec = experiment::ExperimentSpec::parse(config::read_file(spec_path));
    spec.output_dir = out_dir;
    if (workers > 0) spec.workers = workers;
    const experiment::ExperimentResult r = experiment::run_experiment(spec);
    if (summary_csv) *summary_csv = dup(experiment::summary_csv(r.traces));
  });
}

pglbo_status pglbo_report(const char* dir, const char* format, char** summary) {
  return guarded([&] {
    need(dir, "dir");
    need(format, "format");
    const std::string text = experiment::report(dir, format);
    if (summary) *summary = dup(text);
  });
}

pglbo_status pglbo_diagnose_threshold(const char* vae_path, const char* gp_path, size_t n, size_t group,
                                      uint64_t seed, const char* out_csv, double* spearman, int* has_spearman) {
  return guarded([&] {
    need(vae_path, "vae_path");
    need(gp_path, "gp_path");
    checkpoint::Checkpoint v = checkpoint::load(vae_path);
    checkpoint::Checkpoint g = checkpoint::load(gp_path);
    require(v.vae.has_value(), ErrorCode::Io, std::string("'") + vae_path + "' holds no VAE");
    require(g.gp.has_value(), ErrorCode::Io, std::string("'") + gp_path + "' holds no GP");
    const std::string& text = !g.config_text.empty() ? g.config_text : v.config_text;
    require(!text.empty(), ErrorCode::Config, "diagnose: neither checkpoint records a config");
    const tasks::Task task = tasks::make_task(config::parse(text).task);
    Rng rng(seed);
    const experiment::DiagnosticReport r = experiment::threshold_diagnostic(*g.gp, task, *v.vae, n, group, rng);
    if (out_csv) write_file(out_csv, experiment::diagnostic_csv(r));
    if (spearman) *spearman = r.spearman.value_or(0.0);
    if (has_spearman) *has_spearman = r.spearman ? 1 : 0;
  });
}

}  // extern "C"

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

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "pglbo/pglbo.h"

namespace {

int check(pglbo_status s) {
  if (s == PGLBO_OK) return 0;
  std::cerr << "error (" << static_cast<int>(s) << "): " << pglbo_last_error() << "\n";
  return 1;
}

struct ConfigDeleter {
  void operator()(pglbo_config* c) const { pglbo_config_free(c); }
};
struct VaeDeleter {
  void operator()(pglbo_vae* v) const { pglbo_vae_free(v); }
};
struct RunDeleter {
  void operator()(pglbo_run* r) const { pglbo_run_free(r); }
};
using ConfigPtr = std::unique_ptr<pglbo_config, ConfigDeleter>;
using VaePtr = std::unique_ptr<pglbo_vae, VaeDeleter>;
using RunPtr = std::unique_ptr<pglbo_run, RunDeleter>;

std::string take(char* s) {
  std::string out = s ? s : "";
  pglbo_string_free(s);
  return out;
}

/// Config file when given, else the task defaults. A --task that disagrees with
/// the file is an error.
int load_config(const std::string& task, const std::string& path, ConfigPtr& out) {
  pglbo_config* c = nullptr;
  if (path.empty()) {
    if (int rc = check(pglbo_config_new(task.empty() ? "topology" : task.c_str(), &c))) return rc;
    out.reset(c);
    return 0;
  }
  if (int rc = check(pglbo_config_load(path.c_str(), &c))) return rc;
  out.reset(c);
  if (!task.empty()) {
    char* t = nullptr;
    if (int rc = check(pglbo_config_get(c, "task", &t))) return rc;
    if (take(t) != task) {
      std::cerr << "error: --task " << task << " does not match the task in " << path << "\n";
      return 1;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-space Bayesian optimization with pseudo-labels and GP guidance"};
  app.require_subcommand(1);
  int rc = 0;

  auto* pre = app.add_subcommand("pretrain", "Pretrain the VAE on the task's unlabeled pool");
  std::string pre_task, pre_config, pre_out;
  std::uint64_t pre_seed = 0;
  pre->add_option("--task", pre_task, "topology or synthetic");
  pre->add_option("--config", pre_config, "key = value config file");
  pre->add_option("--out", pre_out, "checkpoint path")->required();
  pre->add_option("--seed", pre_seed, "seed for the pool and pretraining");
  pre->callback([&] {
    ConfigPtr cfg;
    if ((rc = load_config(pre_task, pre_config, cfg))) return;
    pglbo_vae* v = nullptr;
    if ((rc = check(pglbo_pretrain(cfg.get(), pre_seed, &v)))) return;
    VaePtr vae(v);
    if ((rc = check(pglbo_vae_save(vae.get(), cfg.get(), pre_out.c_str())))) return;
    std::printf("pretrained %zu parameters, final loss %.6g, fingerprint %016" PRIx64 "\n",
                pglbo_vae_parameter_count(vae.get()), pglbo_vae_final_pretrain_loss(vae.get()),
                pglbo_vae_fingerprint(vae.get()));
  });

  auto* opt = app.add_subcommand("optimize", "Run one variant for one seed");
  std::string opt_variant = "pglbo", opt_task, opt_config, opt_vae, opt_out, opt_resume;
  std::uint64_t opt_seed = 0;
  std::size_t opt_rounds = 0;
  opt->add_option("--variant", opt_variant, "lsbo, lbo, plbo, glbo or pglbo");
  opt->add_option("--task", opt_task, "topology or synthetic");
  opt->add_option("--config", opt_config, "key = value config file");
  opt->add_option("--seed", opt_seed, "run seed");
  opt->add_option("--vae", opt_vae, "pretrained VAE checkpoint; pretrains for the seed when omitted");
  opt->add_option("--out", opt_out, "output directory")->required();
  opt->add_option("--max-rounds", opt_rounds, "stop after this many rounds (0 runs to the end)");
  opt->add_option("--resume", opt_resume, "continue from a run checkpoint instead of starting");
  opt->callback([&] {
    pglbo_run* r = nullptr;
    if (!opt_resume.empty()) {
      if ((rc = check(pglbo_resume(opt_resume.c_str(), opt_out.c_str(), opt_rounds, &r)))) return;
    } else {
      ConfigPtr cfg;
      if ((rc = load_config(opt_task, opt_config, cfg))) return;
      VaePtr vae;
      if (!opt_vae.empty()) {
        pglbo_vae* v = nullptr;
        if ((rc = check(pglbo_vae_load(opt_vae.c_str(), &v)))) return;
        vae.reset(v);
      }
      if ((rc = check(pglbo_optimize(cfg.get(), opt_variant.c_str(), opt_seed, vae.get(), opt_out.c_str(), opt_rounds,
                                     &r))))
        return;
    }
    RunPtr run(r);
    std::printf("best %.17g after %zu evaluations, %zu rounds%s\n", pglbo_run_best_value(run.get()),
                pglbo_run_evaluations(run.get()), pglbo_run_rounds_done(run.get()),
                pglbo_run_completed(run.get()) ? "" : " (stopped early)");
  });

  auto* abl = app.add_subcommand("ablate", "Run the (variant x seed) grid of an experiment spec");
  std::string abl_spec, abl_out;
  std::size_t abl_workers = 0;
  abl->add_option("--spec", abl_spec, "experiment spec file")->required();
  abl->add_option("--out", abl_out, "output directory")->required();
  abl->add_option("--workers", abl_workers, "parallel runs (default: the workers key of the experiment file)");
  abl->callback([&] {
    char* summary = nullptr;
    if ((rc = check(pglbo_ablate(abl_spec.c_str(), abl_out.c_str(), abl_workers, &summary)))) return;
    std::cout << take(summary);
  });

  auto* diag = app.add_subcommand("diagnose-threshold", "GP variance against pseudo-label error");
  std::string diag_vae, diag_gp, diag_out;
  std::size_t diag_n = 5000, diag_group = 100;
  std::uint64_t diag_seed = 0;
  diag->add_option("--vae", diag_vae, "VAE checkpoint")->required();
  diag->add_option("--gp", diag_gp, "GP checkpoint (gp.pglb from optimize)")->required();
  diag->add_option("--n", diag_n, "sampled latent points");
  diag->add_option("--group", diag_group, "points per group");
  diag->add_option("--seed", diag_seed, "sampling seed");
  diag->add_option("--out", diag_out, "CSV output path");
  diag->callback([&] {
    double rho = 0.0;
    int has = 0;
    if ((rc = check(pglbo_diagnose_threshold(diag_vae.c_str(), diag_gp.c_str(), diag_n, diag_group, diag_seed,
                                             diag_out.empty() ? nullptr : diag_out.c_str(), &rho, &has))))
      return;
    if (has)
      std::printf("spearman %.6f\n", rho);
    else
      std::printf("spearman not-applicable\n");
  });

  auto* rep = app.add_subcommand("report", "Regenerate summaries from the traces in a run directory");
  std::string rep_dir, rep_format = "csv";
  rep->add_option("--dir", rep_dir, "experiment or optimize output directory")->required();
  rep->add_option("--format", rep_format, "csv or md")->check(CLI::IsMember({"csv", "md"}));
  rep->callback([&] {
    char* out = nullptr;
    if ((rc = check(pglbo_report(rep_dir.c_str(), rep_format.c_str(), &out)))) return;
    std::cout << take(out);
  });

  auto* ref = app.add_subcommand("config-reference", "Print the configuration key reference (markdown)");
  std::string ref_out;
  ref->add_option("--out", ref_out, "write to this file instead of stdout");
  ref->callback([&] {
    char* md = nullptr;
    if ((rc = check(pglbo_config_reference(&md)))) return;
    const std::string text = take(md);
    if (ref_out.empty()) {
      std::cout << text;
      return;
    }
    std::ofstream f(ref_out, std::ios::binary | std::ios::trunc);
    f << text;
    if (!f) {
      std::cerr << "error: cannot write " << ref_out << "\n";
      rc = 1;
    }
  });

  CLI11_PARSE(app, argc, argv);
  return rc;
}

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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "pglbo/pglbo.h"

namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  pglbo_string_free(s);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

pglbo_config* tiny_config() {
  pglbo_config* c = nullptr;
  REQUIRE(pglbo_config_parse("task = synthetic\npool_size = 200\npretrain.epochs = 2\nbo.budget = 9\n"
                             "bo.retrain_every = 3\nretrain.epochs = 2\nacq.restarts = 4\nacq.steps = 10\n"
                             "gp.restarts = 1\ngp.max_iters = 30\n",
                             &c) == PGLBO_OK);
  return c;
}

}  // namespace

TEST_CASE("status codes and last error") {
  pglbo_config* c = nullptr;
  CHECK(pglbo_config_new("molecule", &c) == PGLBO_ERR_CONFIG);
  CHECK(c == nullptr);
  CHECK(std::strstr(pglbo_last_error(), "molecule") != nullptr);
  CHECK(pglbo_config_new(nullptr, &c) == PGLBO_ERR_INVALID_ARGUMENT);
  CHECK(pglbo_config_new("synthetic", &c) == PGLBO_OK);
  CHECK(std::string(pglbo_last_error()).empty());
  CHECK(pglbo_config_set(c, "bo.budget", "12") == PGLBO_OK);
  CHECK(pglbo_config_set(c, "unknown.key", "1") == PGLBO_ERR_CONFIG);
  char* v = nullptr;
  CHECK(pglbo_config_get(c, "bo.budget", &v) == PGLBO_OK);
  CHECK(take(v) == "12");
  char* text = nullptr;
  CHECK(pglbo_config_to_text(c, &text) == PGLBO_OK);
  CHECK(take(text).find("task = synthetic") != std::string::npos);
  char* md = nullptr;
  CHECK(pglbo_config_reference(&md) == PGLBO_OK);
  CHECK(take(md).find("bo.budget") != std::string::npos);
  pglbo_config_free(c);
  pglbo_config_free(nullptr);
  CHECK(pglbo_vae_load("/nonexistent/v.pglb", nullptr) == PGLBO_ERR_INVALID_ARGUMENT);
  pglbo_vae* vae = nullptr;
  CHECK(pglbo_vae_load("/nonexistent/v.pglb", &vae) == PGLBO_ERR_IO);
  CHECK(pglbo_report("/nonexistent", "xml", nullptr) == PGLBO_ERR_CONFIG);
  CHECK(std::strlen(pglbo_version()) > 0);
}

TEST_CASE("pretrain, optimize, resume, report and diagnose through the C API") {
  const fs::path dir = fs::temp_directory_path() / "pglbo_capi_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  pglbo_config* cfg = tiny_config();

  pglbo_vae* vae = nullptr;
  REQUIRE(pglbo_pretrain(cfg, 1, &vae) == PGLBO_OK);
  CHECK(pglbo_vae_parameter_count(vae) > 0);
  const std::string vpath = (dir / "vae.pglb").string();
  REQUIRE(pglbo_vae_save(vae, cfg, vpath.c_str()) == PGLBO_OK);
  pglbo_vae* loaded = nullptr;
  REQUIRE(pglbo_vae_load(vpath.c_str(), &loaded) == PGLBO_OK);
  CHECK(pglbo_vae_fingerprint(loaded) == pglbo_vae_fingerprint(vae));

  pglbo_run* full = nullptr;
  REQUIRE(pglbo_optimize(cfg, "pglbo", 7, loaded, (dir / "full").string().c_str(), 0, &full) == PGLBO_OK);
  CHECK(pglbo_run_completed(full) == 1);
  CHECK(pglbo_run_evaluations(full) == 9);
  CHECK(pglbo_run_rounds_done(full) == 3);

  pglbo_run* part = nullptr;
  REQUIRE(pglbo_optimize(cfg, "pglbo", 7, loaded, (dir / "part").string().c_str(), 1, &part) == PGLBO_OK);
  CHECK(pglbo_run_completed(part) == 0);
  CHECK(pglbo_run_rounds_done(part) == 1);
  pglbo_run* rest = nullptr;
  REQUIRE(pglbo_resume((dir / "part" / "checkpoint.pglb").string().c_str(), (dir / "part").string().c_str(), 0,
                       &rest) == PGLBO_OK);
  CHECK(pglbo_run_best_value(rest) == pglbo_run_best_value(full));
  CHECK(slurp(dir / "part" / "traces" / "00_pglbo_seed7.jsonl") ==
        slurp(dir / "full" / "traces" / "00_pglbo_seed7.jsonl"));

  char* summary = nullptr;
  REQUIRE(pglbo_report((dir / "full").string().c_str(), "csv", &summary) == PGLBO_OK);
  CHECK(take(summary) == slurp(dir / "full" / "summary.csv"));

  double rho = 0.0;
  int has = -1;
  const std::string gpath = (dir / "full" / "gp.pglb").string();
  REQUIRE(pglbo_diagnose_threshold(vpath.c_str(), gpath.c_str(), 200, 20, 3, (dir / "diag.csv").string().c_str(),
                                   &rho, &has) == PGLBO_OK);
  CHECK((has == 0 || has == 1));
  CHECK(fs::exists(dir / "diag.csv"));
  CHECK(pglbo_diagnose_threshold(vpath.c_str(), gpath.c_str(), 30, 20, 3, nullptr, &rho, &has) ==
        PGLBO_ERR_INVALID_ARGUMENT);
  CHECK(pglbo_optimize(cfg, "turbo", 7, loaded, (dir / "x").string().c_str(), 0, &part) == PGLBO_ERR_CONFIG);

  pglbo_run_free(full);
  pglbo_run_free(part);
  pglbo_run_free(rest);
  pglbo_vae_free(vae);
  pglbo_vae_free(loaded);
  pglbo_config_free(cfg);
  fs::remove_all(dir);
}

TEST_CASE("ablate through the C API") {
  const fs::path dir = fs::temp_directory_path() / "pglbo_capi_ablate";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path spec = dir / "spec.cfg";
  std::ofstream(spec) << "task = synthetic\npool_size = 100\npretrain.epochs = 1\nbo.budget = 4\n"
                         "bo.retrain_every = 2\nretrain.epochs = 1\nacq.restarts = 2\nacq.steps = 5\n"
                         "variants = lsbo, lbo\nseeds = 1\n";
  char* summary = nullptr;
  REQUIRE(pglbo_ablate(spec.string().c_str(), (dir / "out").string().c_str(), 0, &summary) == PGLBO_OK);
  const std::string s = take(summary);
  CHECK(s.rfind("arm,variant,runs", 0) == 0);
  CHECK(s.find("\nlsbo,lsbo,1,0,") != std::string::npos);
  CHECK(s.find("\nlbo,lbo,1,0,") != std::string::npos);
  fs::remove_all(dir);
}

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

#ifndef PGLBO_CONFIG_HPP
#define PGLBO_CONFIG_HPP

#include <map>
#include <string>
#include <vector>

#include "pglbo/boloop.hpp"
#include "pglbo/vae.hpp"

namespace pglbo::config {

/// Everything one (variant, seed) run needs besides the variant and seed.
struct RunConfig {
  std::string task = "topology";
  std::size_t pool_size = 2000;     // unlabeled pretraining pool
  std::size_t initial_size = 100;   // initial labeled points
  std::size_t latent_dim = 8;
  std::vector<std::size_t> hidden{128, 128};
  vae::PretrainConfig pretrain;
  boloop::BoConfig bo;

  void validate() const;
  /// Architecture for the given task input dimension and likelihood.
  vae::VaeArch arch(const tasks::Task& task) const;
};

/// Desk-scale defaults for "topology" and "synthetic".
RunConfig task_defaults(const std::string& task);

struct KeyInfo {
  std::string name;
  std::string type;
  std::string doc;
};

/// Every accepted key, in documentation order.
const std::vector<KeyInfo>& keys();

/// Sets one key. Unknown keys and malformed values throw Config errors.
void set(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get(const RunConfig& cfg, const std::string& key);

/// Flat key = value text; '#' starts a comment. The task key, when present,
/// selects the defaults that the remaining keys override. Repeated keys are errors.
RunConfig parse(const std::string& text);
RunConfig load(const std::string& path);

/// All keys with their current values; parse(to_text(c)) reproduces c.
std::string to_text(const RunConfig& cfg);

/// Markdown reference of all keys with the defaults of both tasks.
std::string reference_markdown();

/// Splits key = value lines into an ordered list; shared with experiment specs.
std::vector<std::pair<std::string, std::string>> parse_lines(const std::string& text);

std::string format_double(double v);
std::string read_file(const std::string& path);

}  // namespace pglbo::config

#endif  // PGLBO_CONFIG_HPP

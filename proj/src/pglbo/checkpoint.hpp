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

#ifndef PGLBO_CHECKPOINT_HPP
#define PGLBO_CHECKPOINT_HPP

#include <cstdint>
#include <optional>
#include <string>

#include "pglbo/boloop.hpp"

namespace pglbo::checkpoint {

inline constexpr std::uint8_t kFormatVersion = 1;

/// Binary container: "PGLB", a version byte, then tagged length-prefixed
/// sections. Readers skip sections with unknown tags.
struct Checkpoint {
  std::optional<vae::VaeState> vae;
  std::optional<gp::GpState> gp;
  std::optional<boloop::RunState> run;
  std::optional<Rng> rng;
  std::string config_text;  // the RunConfig that produced the state, as key = value text
};

std::string serialize(const Checkpoint& ckpt);
Checkpoint deserialize(const std::string& bytes);

void save(const Checkpoint& ckpt, const std::string& path);
Checkpoint load(const std::string& path);

}  // namespace pglbo::checkpoint

#endif  // PGLBO_CHECKPOINT_HPP

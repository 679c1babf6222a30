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

#include "pglbo/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pglbo::weighting {

std::vector<std::size_t> ranks(const Vector& scores, bool maximize) {
  require(scores.allFinite(), ErrorCode::InvalidArgument, "ranks: scores must be finite");
  const std::size_t n = static_cast<std::size_t>(scores.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Best first; stable so ties keep input order.
  auto better = [&](std::size_t a, std::size_t b) {
    return maximize ? scores[static_cast<Eigen::Index>(a)] > scores[static_cast<Eigen::Index>(b)]
                    : scores[static_cast<Eigen::Index>(a)] < scores[static_cast<Eigen::Index>(b)];
  };
  std::stable_sort(order.begin(), order.end(), better);
  std::vector<std::size_t> out(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    // Position of the first element tied with this one = count strictly better.
    if (pos > 0 && !better(order[pos - 1], order[pos]))
      out[order[pos]] = out[order[pos - 1]];
    else
      out[order[pos]] = pos;
  }
  return out;
}

Vector rank_weights(const Vector& scores, const WeightConfig& cfg, bool maximize) {
  require(cfg.k >= 0.0 && !std::isnan(cfg.k), ErrorCode::Config, "rank_weights: k must be >= 0");
  const Eigen::Index n = scores.size();
  if (n == 0) return Vector();
  const auto r = ranks(scores, maximize);
  Vector w(n);
  if (cfg.is_infinite()) {
    w.setConstant(1.0 / static_cast<double>(n));
    return w;
  }
  if (cfg.k == 0.0) {
    const auto best = static_cast<double>(std::count(r.begin(), r.end(), std::size_t{0}));
    for (Eigen::Index i = 0; i < n; ++i) w[i] = r[static_cast<std::size_t>(i)] == 0 ? 1.0 / best : 0.0;
    return w;
  }
  const double kn = cfg.k * static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = 1.0 / (kn + static_cast<double>(r[static_cast<std::size_t>(i)]));
  return w / w.sum();
}

}  // namespace pglbo::weighting

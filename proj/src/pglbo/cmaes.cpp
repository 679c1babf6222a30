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

#include "pglbo/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pglbo::cmaes {

namespace {

struct Params {
  std::size_t mu = 1;
  Vector weights;
  double mu_eff = 1.0;
  double c_sigma = 0.0, d_sigma = 0.0, c_c = 0.0, c_1 = 0.0, c_mu = 0.0, chi_n = 0.0;
};

Params strategy_params(Eigen::Index d, std::size_t lambda) {
  Params p;
  const double n = static_cast<double>(d);
  p.mu = std::max<std::size_t>(1, lambda / 2);
  p.weights.resize(static_cast<Eigen::Index>(p.mu));
  for (std::size_t i = 0; i < p.mu; ++i)
    p.weights[static_cast<Eigen::Index>(i)] = std::log(static_cast<double>(p.mu) + 0.5) - std::log(static_cast<double>(i + 1));
  p.weights /= p.weights.sum();
  p.mu_eff = 1.0 / p.weights.squaredNorm();
  p.c_sigma = (p.mu_eff + 2.0) / (n + p.mu_eff + 5.0);
  p.d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((p.mu_eff - 1.0) / (n + 1.0)) - 1.0) + p.c_sigma;
  p.c_c = (4.0 + p.mu_eff / n) / (n + 4.0 + 2.0 * p.mu_eff / n);
  p.c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + p.mu_eff);
  p.c_mu = std::min(1.0 - p.c_1, 2.0 * (p.mu_eff - 2.0 + 1.0 / p.mu_eff) / ((n + 2.0) * (n + 2.0) + p.mu_eff));
  p.chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
  return p;
}

struct Eigensystem {
  Matrix basis;   // columns are eigenvectors
  Vector scales;  // square roots of eigenvalues
};

Eigensystem decompose(const Matrix& c) {
  const Eigen::MatrixXd cm = c;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cm);
  require(es.info() == Eigen::Success, ErrorCode::Numerical, "cmaes: eigendecomposition failed");
  return {Matrix(es.eigenvectors()), es.eigenvalues().cwiseMax(1e-300).cwiseSqrt()};
}

}  // namespace

void CmaesState::validate() const {
  require(mean.size() >= 1 && mean.allFinite(), ErrorCode::InvalidArgument, "cmaes: mean must be finite");
  require(sigma > 0.0 && std::isfinite(sigma), ErrorCode::InvalidArgument, "cmaes: sigma must be positive");
  require(covariance.rows() == mean.size() && covariance.cols() == mean.size(), ErrorCode::Shape,
          "cmaes: covariance shape");
  require(population >= 1, ErrorCode::InvalidArgument, "cmaes: population must be >= 1");
}

std::size_t default_population(Eigen::Index dim) {
  return 4 + static_cast<std::size_t>(std::floor(3.0 * std::log(static_cast<double>(std::max<Eigen::Index>(dim, 1)))));
}

CmaesState init(const Vector& mean, double sigma0, std::size_t population) {
  CmaesState s;
  s.mean = mean;
  s.sigma = sigma0;
  s.covariance = Matrix::Identity(mean.size(), mean.size());
  s.population = population ? population : default_population(mean.size());
  s.path_sigma = Vector::Zero(mean.size());
  s.path_c = Vector::Zero(mean.size());
  s.validate();
  return s;
}

Matrix ask(const CmaesState& state, Rng& rng) {
  const Eigensystem e = decompose(state.covariance);
  const auto lambda = static_cast<Eigen::Index>(state.population);
  Matrix z = rng.normal_matrix(lambda, state.dim());
  Matrix y = (z * e.scales.asDiagonal()) * e.basis.transpose();  // rows ~ N(0, C)
  return (state.sigma * y).rowwise() + state.mean.transpose();
}

void tell(CmaesState& state, const Matrix& samples, const Vector& fitness) {
  require(samples.rows() == static_cast<Eigen::Index>(state.population) && samples.cols() == state.dim(),
          ErrorCode::Shape, "cmaes tell: sample shape mismatch");
  require(fitness.size() == samples.rows(), ErrorCode::Shape, "cmaes tell: fitness length mismatch");
  const Eigen::Index d = state.dim();
  const Params p = strategy_params(d, state.population);

  std::vector<std::size_t> order(state.population);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double fa = fitness[static_cast<Eigen::Index>(a)], fb = fitness[static_cast<Eigen::Index>(b)];
    // NaN fitness sorts last.
    if (std::isnan(fa)) return false;
    if (std::isnan(fb)) return true;
    return fa > fb;
  });

  const Vector old_mean = state.mean;
  Matrix ys(static_cast<Eigen::Index>(p.mu), d);
  for (std::size_t i = 0; i < p.mu; ++i)
    ys.row(static_cast<Eigen::Index>(i)) = (samples.row(static_cast<Eigen::Index>(order[i])) - old_mean.transpose()) / state.sigma;
  const Vector y_w = ys.transpose() * p.weights;
  state.mean = old_mean + state.sigma * y_w;

  const Eigensystem e = decompose(state.covariance);
  const Vector c_inv_sqrt_y = e.basis * (e.basis.transpose() * y_w).cwiseQuotient(e.scales);
  state.path_sigma = (1.0 - p.c_sigma) * state.path_sigma +
                     std::sqrt(p.c_sigma * (2.0 - p.c_sigma) * p.mu_eff) * c_inv_sqrt_y;
  const double gen = static_cast<double>(state.generation + 1);
  const double ps_norm = state.path_sigma.norm();
  const bool h_sigma = ps_norm / std::sqrt(1.0 - std::pow(1.0 - p.c_sigma, 2.0 * gen)) <
                       (1.4 + 2.0 / (static_cast<double>(d) + 1.0)) * p.chi_n;
  state.path_c = (1.0 - p.c_c) * state.path_c +
                 (h_sigma ? std::sqrt(p.c_c * (2.0 - p.c_c) * p.mu_eff) : 0.0) * y_w;

  const double delta_h = h_sigma ? 0.0 : p.c_c * (2.0 - p.c_c);
  Matrix rank_mu = ys.transpose() * p.weights.asDiagonal() * ys;
  state.covariance = (1.0 - p.c_1 - p.c_mu + p.c_1 * delta_h) * state.covariance +
                     p.c_1 * state.path_c * state.path_c.transpose() + p.c_mu * rank_mu;
  state.covariance = 0.5 * (state.covariance + Matrix(state.covariance.transpose()));

  state.sigma *= std::exp((p.c_sigma / p.d_sigma) * (ps_norm / p.chi_n - 1.0));
  require(std::isfinite(state.sigma) && state.sigma > 0.0 && state.mean.allFinite(), ErrorCode::Numerical,
          "cmaes: state diverged");
  ++state.generation;
}

Trajectory maximize(const Objective& f, const Vector& mean0, double sigma0, std::size_t iters, Rng& rng,
                    std::size_t population) {
  require(iters >= 1, ErrorCode::InvalidArgument, "cmaes: iters must be >= 1");
  CmaesState s = init(mean0, sigma0, population);
  Trajectory t;
  const auto lambda = static_cast<Eigen::Index>(s.population);
  t.samples.resize(static_cast<Eigen::Index>(iters) * lambda, s.dim());
  for (std::size_t g = 0; g < iters; ++g) {
    t.means.push_back(s.mean);
    Matrix xs = ask(s, rng);
    Vector fx = f(xs);
    t.samples.middleRows(static_cast<Eigen::Index>(g) * lambda, lambda) = xs;
    tell(s, xs, fx);
  }
  t.means.push_back(s.mean);
  t.final_state = s;
  return t;
}

}  // namespace pglbo::cmaes

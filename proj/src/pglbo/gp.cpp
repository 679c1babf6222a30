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

#include "pglbo/gp.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace pglbo::gp {

Eigen::Vector4d GpHyper::to_params() const {
  return {std::log(lengthscale), std::log(signal_variance), std::log(noise_variance), prior_mean};
}

GpHyper GpHyper::from_params(const Eigen::Vector4d& p) {
  return {std::exp(p[0]), std::exp(p[1]), std::exp(p[2]), p[3]};
}

void GpHyper::validate() const {
  require(lengthscale > 0.0 && std::isfinite(lengthscale), ErrorCode::InvalidArgument,
          "GpHyper: lengthscale must be positive");
  require(signal_variance > 0.0 && std::isfinite(signal_variance), ErrorCode::InvalidArgument,
          "GpHyper: signal variance must be positive");
  require(noise_variance > 0.0 && std::isfinite(noise_variance), ErrorCode::InvalidArgument,
          "GpHyper: noise variance must be positive");
  require(std::isfinite(prior_mean), ErrorCode::InvalidArgument, "GpHyper: prior mean not finite");
}

double rbf_kernel(const Vector& z1, const Vector& z2, const GpHyper& hyper) {
  require(z1.size() == z2.size(), ErrorCode::Shape, "rbf_kernel: dimension mismatch");
  const double d2 = (z1 - z2).squaredNorm();
  return hyper.signal_variance * std::exp(-d2 / (2.0 * hyper.lengthscale * hyper.lengthscale));
}

namespace {

Matrix squared_distances(const Matrix& a, const Matrix& b) {
  Matrix d2 = -2.0 * a * b.transpose();
  d2.colwise() += a.rowwise().squaredNorm();
  d2.rowwise() += b.rowwise().squaredNorm().transpose();
  return d2.cwiseMax(0.0);
}

}  // namespace

Matrix kernel_matrix(const Matrix& a, const Matrix& b, const GpHyper& hyper) {
  require(a.cols() == b.cols(), ErrorCode::Shape, "kernel_matrix: dimension mismatch");
  const double inv = 1.0 / (2.0 * hyper.lengthscale * hyper.lengthscale);
  Matrix k = squared_distances(a, b);
  return (hyper.signal_variance * (-inv * k.array()).exp()).matrix();
}

GpState condition(const Matrix& latents, const Vector& targets, const GpHyper& hyper) {
  require(latents.rows() >= 1, ErrorCode::InvalidArgument, "gp: need at least one training point");
  require(latents.rows() == targets.size(), ErrorCode::Shape, "gp: latents/targets length mismatch");
  require(targets.allFinite() && latents.allFinite(), ErrorCode::InvalidArgument,
          "gp: training data not finite");
  hyper.validate();
  GpState s;
  s.hyper = hyper;
  s.latents = latents;
  s.targets = targets;
  Matrix a = kernel_matrix(latents, latents, hyper);
  a.diagonal().array() += hyper.noise_variance;
  try {
    CholeskyFactor f = cholesky_jittered(a);
    s.chol = std::move(f.lower);
    s.jitter = f.jitter;
  } catch (const DecompositionError& e) {
    fail(ErrorCode::Fit, std::string("gp condition: ") + e.what());
  }
  s.alpha = solve_with_factor(s.chol, Vector(targets.array() - hyper.prior_mean));
  return s;
}

namespace {

double variance_floor(const GpState& s) {
  return -1e-12 * std::max(1.0, s.hyper.signal_variance);
}

double clamp_variance(const GpState& s, double v) {
  if (v < 0.0) {
    if (v < variance_floor(s))
      fail(ErrorCode::Numerical,
           "gp posterior: negative variance " + std::to_string(v) + " beyond roundoff");
    return 0.0;
  }
  return v;
}

}  // namespace

Posterior posterior(const GpState& state, const Vector& z) {
  require(z.size() == state.dim(), ErrorCode::Shape, "gp posterior: latent dimension mismatch");
  Matrix zs = z.transpose();
  BatchPosterior b = posterior_batch(state, zs);
  return {b.mean[0], b.variance[0]};
}

BatchPosterior posterior_batch(const GpState& state, const Matrix& zs, bool with_grad) {
  require(zs.cols() == state.dim(), ErrorCode::Shape, "gp posterior: latent dimension mismatch");
  BatchPosterior out;
  const Matrix ks = kernel_matrix(zs, state.latents, state.hyper);  // B x N
  out.mean = (ks * state.alpha).array() + state.hyper.prior_mean;
  const Matrix v = state.chol.triangularView<Eigen::Lower>().solve(ks.transpose());  // N x B
  out.variance.resize(zs.rows());
  for (Eigen::Index b = 0; b < zs.rows(); ++b)
    out.variance[b] = clamp_variance(state, state.hyper.signal_variance - v.col(b).squaredNorm());
  if (with_grad) {
    const double inv_l2 = 1.0 / (state.hyper.lengthscale * state.hyper.lengthscale);
    // d k(z, x_n) / dz = k(z, x_n) (x_n - z) / l^2
    Matrix w = ks.array().rowwise() * state.alpha.transpose().array();
    out.mean_grad = inv_l2 * (w * state.latents - (zs.array().colwise() * w.rowwise().sum().array()).matrix());
    const Matrix beta = state.chol.transpose().triangularView<Eigen::Upper>().solve(v);  // N x B
    Matrix u = ks.cwiseProduct(beta.transpose());
    out.variance_grad =
        -2.0 * inv_l2 * (u * state.latents - (zs.array().colwise() * u.rowwise().sum().array()).matrix());
  }
  return out;
}

namespace {

Var posterior_term(const GpState& state, const Var& zs, bool want_variance) {
  BatchPosterior p = posterior_batch(state, zs.value(), true);
  Matrix value = want_variance ? Matrix(p.variance) : Matrix(p.mean);
  Matrix jac = want_variance ? p.variance_grad : p.mean_grad;
  const int iz = zs.id();
  return zs.tape()->record(std::move(value), {zs}, [iz, jac = std::move(jac)](Tape& t, int self) {
    Matrix g = jac.array().colwise() * t.grad(self).col(0).array();
    t.accumulate(iz, g);
  });
}

}  // namespace

Var posterior_mean_var(const GpState& state, const Var& zs) { return posterior_term(state, zs, false); }
Var posterior_variance_var(const GpState& state, const Var& zs) { return posterior_term(state, zs, true); }

namespace {

struct Evaluation {
  double value = std::numeric_limits<double>::infinity();
  Eigen::Vector4d gradient = Eigen::Vector4d::Zero();
  double prior_mean = 0.0;
  bool ok = false;
};

// NLML at hyper; when profile_mean is set the prior mean is replaced by its
// closed-form optimum (1^T A^-1 y) / (1^T A^-1 1). The O(N^3) inverse needed
// for the gradient is skipped when with_grad is false.
Evaluation evaluate(const GpHyper& hyper, const Matrix& d2, const Vector& y, bool profile_mean,
                    bool with_grad = true) {
  Evaluation e;
  const Eigen::Index n = y.size();
  const double inv = 1.0 / (2.0 * hyper.lengthscale * hyper.lengthscale);
  Matrix k = (hyper.signal_variance * (-inv * d2.array()).exp()).matrix();
  Matrix a = k;
  a.diagonal().array() += hyper.noise_variance;
  CholeskyFactor f;
  try {
    f = cholesky_jittered(a);
  } catch (const DecompositionError&) {
    return e;
  }
  double m = hyper.prior_mean;
  if (profile_mean) {
    const Vector ones = Vector::Ones(n);
    const Vector ainv_one = solve_with_factor(f.lower, ones);
    m = ainv_one.dot(y) / ainv_one.sum();
  }
  const Vector r = y.array() - m;
  const Vector alpha = solve_with_factor(f.lower, r);
  e.value = 0.5 * r.dot(alpha) + 0.5 * log_det_from_factor(f.lower) +
            0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  e.prior_mean = m;
  if (with_grad) {
    Matrix linv = Matrix::Identity(n, n);
    f.lower.triangularView<Eigen::Lower>().solveInPlace(linv);
    Matrix q = Matrix::Zero(n, n);
    q.selfadjointView<Eigen::Lower>().rankUpdate(linv.transpose());
    q = q.selfadjointView<Eigen::Lower>();
    q.noalias() -= alpha * alpha.transpose();
    const Matrix qk = q.cwiseProduct(k);
    e.gradient[0] = 0.5 * qk.cwiseProduct(d2).sum() / (hyper.lengthscale * hyper.lengthscale);
    e.gradient[1] = 0.5 * qk.sum();
    e.gradient[2] = 0.5 * hyper.noise_variance * q.trace();
    e.gradient[3] = -alpha.sum();
  }
  e.ok = std::isfinite(e.value) && e.gradient.allFinite();
  return e;
}

}  // namespace

Nlml nlml(const GpHyper& hyper, const Matrix& latents, const Vector& targets) {
  require(latents.rows() >= 2, ErrorCode::InvalidArgument, "gp nlml: need at least two points");
  require(latents.rows() == targets.size(), ErrorCode::Shape, "gp nlml: latents/targets length mismatch");
  hyper.validate();
  Evaluation e = evaluate(hyper, squared_distances(latents, latents), targets, false);
  if (!e.ok) fail(ErrorCode::Fit, "gp nlml: Cholesky failed after jitter escalation");
  return {e.value, e.gradient};
}

GpHyper default_init(const Vector& targets) {
  GpHyper h;
  const double mean = targets.size() ? targets.mean() : 0.0;
  const double var = targets.size() ? (targets.array() - mean).square().mean() : 0.0;
  h.prior_mean = mean;
  h.signal_variance = var > 0.0 ? var : 1.0;
  h.noise_variance = h.signal_variance / 100.0;
  h.lengthscale = 1.0;
  return h;
}

GpState fit(const Matrix& latents, const Vector& targets, const GpHyper& init,
            const FitOptions& opt, Rng& rng, FitReport* report) {
  require(latents.rows() >= 2, ErrorCode::InvalidArgument, "gp fit: need at least two points");
  require(latents.rows() == targets.size(), ErrorCode::Shape, "gp fit: latents/targets length mismatch");
  require(targets.allFinite() && latents.allFinite(), ErrorCode::InvalidArgument,
          "gp fit: training data not finite");
  require(opt.restarts >= 1, ErrorCode::Config, "gp fit: restarts must be >= 1");
  init.validate();

  const Matrix d2 = squared_distances(latents, latents);
  const Eigen::Vector3d lo(std::log(opt.min_lengthscale), std::log(opt.min_signal_variance),
                           std::log(opt.min_noise_variance));
  const Eigen::Vector3d hi(std::log(opt.max_lengthscale), std::log(opt.max_variance),
                           std::log(opt.max_variance));
  auto to_hyper = [](const Eigen::Vector3d& p) {
    GpHyper h;
    h.lengthscale = std::exp(p[0]);
    h.signal_variance = std::exp(p[1]);
    h.noise_variance = std::exp(p[2]);
    return h;
  };
  auto project = [&](Eigen::Vector3d p) { return p.cwiseMax(lo).cwiseMin(hi); };

  const Evaluation at_init = evaluate(init, d2, targets, false);

  // Restart perturbations are drawn up front so the stream advances by a
  // fixed amount regardless of how individual restarts behave.
  const Eigen::Vector4d p0 = init.to_params();
  std::vector<Eigen::Vector3d> starts;
  starts.push_back(project(p0.head<3>()));
  for (int r = 1; r < opt.restarts; ++r) {
    Eigen::Vector3d p = p0.head<3>();
    for (int i = 0; i < 3; ++i) p[i] += rng.normal();
    starts.push_back(project(p));
  }

  FitReport rep;
  rep.initial_nlml = at_init.value;
  double best_value = std::numeric_limits<double>::infinity();
  GpHyper best;
  for (const Eigen::Vector3d& start : starts) {
    Eigen::Vector3d p = start;
    Evaluation cur = evaluate(to_hyper(p), d2, targets, true);
    if (!cur.ok) {
      ++rep.failed_restarts;
      continue;
    }
    // Projected BFGS: coordinates pinned at a bound with the gradient pushing
    // outward are frozen for the step.
    Eigen::Matrix3d h = Eigen::Matrix3d::Identity() / std::max(1.0, cur.gradient.head<3>().norm());
    for (int it = 0; it < opt.max_iters; ++it) {
      const Eigen::Vector3d g = cur.gradient.head<3>();
      if ((p - project(p - g)).norm() < opt.grad_tol) break;
      Eigen::Vector3d free = Eigen::Vector3d::Ones();
      for (int i = 0; i < 3; ++i)
        if ((p[i] <= lo[i] && g[i] > 0.0) || (p[i] >= hi[i] && g[i] < 0.0)) free[i] = 0.0;
      const Eigen::Matrix3d mask = free.asDiagonal();
      Eigen::Vector3d dir = -(mask * h * mask) * g;
      if (dir.dot(g) >= 0.0) {
        h = Eigen::Matrix3d::Identity() / std::max(1.0, g.norm());
        dir = -(mask * h) * g;
      }
      bool accepted = false;
      double t = 1.0;
      Eigen::Vector3d cand = p;
      Evaluation next;
      for (int bt = 0; bt < 40; ++bt, t *= 0.5) {
        cand = project(p + t * dir);
        next = evaluate(to_hyper(cand), d2, targets, true, false);
        if (next.ok && next.value <= cur.value + 1e-4 * g.dot(cand - p)) {
          accepted = true;
          break;
        }
      }
      ++rep.iterations;
      if (!accepted) break;
      next = evaluate(to_hyper(cand), d2, targets, true);
      if (!next.ok) break;
      const Eigen::Vector3d sv = cand - p;
      const Eigen::Vector3d yv = next.gradient.head<3>() - g;
      const double decrease = cur.value - next.value;
      p = cand;
      cur = next;
      const double sy = sv.dot(yv);
      if (sy > 1e-12) {
        const double rho = 1.0 / sy;
        const Eigen::Matrix3d v = Eigen::Matrix3d::Identity() - rho * yv * sv.transpose();
        h = v.transpose() * h * v + rho * sv * sv.transpose();
      }
      if (decrease < opt.value_tol * std::max(1.0, std::abs(cur.value))) break;
    }
    if (cur.value < best_value) {
      best_value = cur.value;
      best = to_hyper(p);
      best.prior_mean = cur.prior_mean;
    }
  }
  if (!std::isfinite(best_value)) {
    if (!at_init.ok) fail(ErrorCode::Fit, "gp fit: Cholesky failed for every restart");
    best_value = at_init.value;
    best = init;
  }
  if (at_init.ok && at_init.value < best_value) {
    best_value = at_init.value;
    best = init;
  }
  rep.final_nlml = best_value;
  if (report) *report = rep;
  return condition(latents, targets, best);
}

}  // namespace pglbo::gp

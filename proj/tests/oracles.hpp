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

// Independent reference computations used only by tests. Nothing here calls
// into the Cholesky-based paths it is meant to check.

#ifndef PGLBO_TESTS_ORACLES_HPP
#define PGLBO_TESTS_ORACLES_HPP

#include <vector>

#include "pglbo/gp.hpp"
#include "pglbo/numcore.hpp"

namespace oracle {

using pglbo::Matrix;
using pglbo::Vector;

/// Gauss-Jordan inverse with partial pivoting.
Matrix inverse(const Matrix& a);
/// Determinant via Gaussian elimination with partial pivoting.
double determinant(const Matrix& a);
/// Solve via Gaussian elimination with partial pivoting.
Matrix gauss_solve(const Matrix& a, const Matrix& b);

/// Posterior mean/variance from the explicit inverse of K + noise I.
pglbo::gp::Posterior gp_posterior(const Matrix& x, const Vector& y, const pglbo::gp::GpHyper& h,
                                  const Vector& z);
/// NLML from explicit inverse and determinant.
double gp_nlml(const Matrix& x, const Vector& y, const pglbo::gp::GpHyper& h);

/// O(N^2) strict-better counts.
std::vector<std::size_t> ranks(const Vector& scores, bool maximize);

/// Standard normal CDF / PDF written from erf directly.
double norm_cdf(double u);
double norm_pdf(double u);

/// Random symmetric positive-definite matrix of size n.
Matrix random_spd(int n, pglbo::Rng& rng);

}  // namespace oracle

#endif

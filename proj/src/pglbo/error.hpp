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

#ifndef PGLBO_ERROR_HPP
#define PGLBO_ERROR_HPP

#include <stdexcept>
#include <string>

namespace pglbo {

enum class ErrorCode {
  InvalidArgument,
  Config,
  Shape,
  Decomposition,
  Numerical,
  Fit,
  Training,
  State,
  Io,
  Evaluation,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Cholesky failure; pivot is the zero-based index of the first non-positive
// diagonal encountered during factorization.
class DecompositionError : public Error {
 public:
  DecompositionError(long pivot, const std::string& what)
      : Error(ErrorCode::Decomposition, what), pivot_(pivot) {}

  long pivot() const noexcept { return pivot_; }

 private:
  long pivot_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace pglbo

#endif  // PGLBO_ERROR_HPP

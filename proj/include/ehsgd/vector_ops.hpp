/*
 * Copyright 2026 The ehsgd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef EHSGD_VECTOR_OPS_HPP_
#define EHSGD_VECTOR_OPS_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ehsgd/error.hpp"

namespace ehsgd {

/// Model parameters w, and any other dense real vector of dimension d.
using ModelVector = std::vector<double>;

inline void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorKind::kDimensionMismatch,
                std::string(what) + ": " + std::to_string(a) + " vs " +
                    std::to_string(b));
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

inline double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_same_dim(x.size(), y.size(), "axpy");
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += alpha * x[k];
}

inline ModelVector subtract(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "subtract");
  ModelVector out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] - b[k];
  return out;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "squared_distance");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

/// Pairwise (cascade) summation; the result depends only on the order of
/// `values`, not on how a caller chunked the work that produced them.
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace ehsgd

#endif  // EHSGD_VECTOR_OPS_HPP_

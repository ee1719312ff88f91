/*
 * Copyright 2026 The flsim Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FLSIM_TESTS_ORACLES_H_
#define FLSIM_TESTS_ORACLES_H_

// Reference implementations written independently of the library code, used
// to cross-check it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "flsim/dataset.h"
#include "flsim/mlp.h"

namespace flsim::testing {

// Weighted average time executed line by line: selection sort into
// descending order, one weight per sorted entry, an explicit reversal loop,
// then two accumulators.
inline double OracleWeightedAverageTime(std::vector<double> t) {
  const std::size_t n = t.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = i;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (t[j] > t[best]) best = j;
    }
    std::swap(t[i], t[best]);
  }
  std::vector<long double> initial(n);
  for (std::size_t i = 0; i < n; ++i) initial[i] = 1.0L / t[i];
  std::vector<long double> final_weight(n);
  for (std::size_t i = 0; i < n; ++i) final_weight[i] = initial[n - 1 - i];
  long double num = 0.0L;
  long double den = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    num += static_cast<long double>(t[i]) * final_weight[i];
    den += final_weight[i];
  }
  return static_cast<double>(num / den);
}

// Indices of entries not above the oracle deadline.
inline std::vector<int> OracleSelection(const std::vector<double>& t) {
  const double deadline = OracleWeightedAverageTime(t);
  std::vector<int> out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] <= deadline) out.push_back(static_cast<int>(i));
  }
  return out;
}

// Central differences of the mean cross-entropy, one parameter at a time.
inline std::vector<double> FiniteDifferenceGradient(const ModelParams& params,
                                                    const Matrix& batch,
                                                    const std::vector<int>& labels,
                                                    double h) {
  std::vector<double> flat = Flatten(params);
  std::vector<double> grad(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double saved = flat[i];
    flat[i] = saved + h;
    const double up = CrossEntropy(Unflatten(params.arch, flat), batch, labels);
    flat[i] = saved - h;
    const double down = CrossEntropy(Unflatten(params.arch, flat), batch, labels);
    flat[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// Flattens a gradient in the same order as Flatten(ModelParams).
inline std::vector<double> FlattenLayers(const std::vector<DenseLayer>& layers) {
  std::vector<double> out;
  for (const DenseLayer& l : layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) out.push_back(l.weights(r, c));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias(r));
  }
  return out;
}

inline double RelativeError(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace flsim::testing

#endif  // FLSIM_TESTS_ORACLES_H_

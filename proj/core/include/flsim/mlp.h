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

#ifndef FLSIM_MLP_H_
#define FLSIM_MLP_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flsim/dataset.h"

namespace flsim {

// Fully connected network: ReLU on hidden layers, softmax on the output.
// layer_dims = {input, hidden..., classes}.
struct Architecture {
  std::vector<std::size_t> layer_dims;

  static Architecture GasPipeline();  // 18-54-20-8
  static Architecture Wustl();        // 41-9-9-5
  // "gas" | "wustl"; throws ConfigError otherwise.
  static Architecture FromPreset(std::string_view name);

  // Throws ShapeError unless there are >= 2 layers, all positive.
  void Validate() const;
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t class_count() const { return layer_dims.back(); }
  std::size_t layer_count() const { return layer_dims.size() - 1; }
  std::size_t ParameterCount() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.weights == b.weights && a.bias == b.bias;
  }
};

struct ModelParams {
  Architecture arch;
  std::vector<DenseLayer> layers;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct HyperParams {
  double learning_rate = 0.01;
  double momentum = 0.8;
  std::size_t batch_size = 64;
  std::size_t local_epochs = 10;

  static HyperParams GasPipeline();  // batch 64
  static HyperParams Wustl();        // batch 1000
  // Throws ConfigError naming the offending field.
  void Validate() const;
};

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
ModelParams InitModel(const Architecture& arch, std::uint64_t seed);
ModelParams ZeroModel(const Architecture& arch);

// Row-wise class probabilities. Throws ShapeError on a width mismatch.
Matrix Forward(const ModelParams& params, const Matrix& batch);

struct LossAndGradient {
  double loss = 0.0;                // mean cross-entropy over the batch
  std::vector<DenseLayer> gradient; // same shapes as params.layers
};

LossAndGradient ComputeLossAndGradient(const ModelParams& params,
                                       const Matrix& batch,
                                       std::span<const int> labels);

double CrossEntropy(const ModelParams& params, const Matrix& batch,
                    std::span<const int> labels);

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_loss;  // mean minibatch loss per epoch
};

// Minibatch SGD with heavy-ball momentum (v = m*v + g; w -= lr*v), the data
// reshuffled every epoch. Momentum buffers start at zero on every call. The
// trailing partial batch is kept. Throws DomainError on empty data and
// NumericError when the loss becomes non-finite.
TrainResult TrainEpochs(ModelParams params, const Dataset& data,
                        const HyperParams& hyper, std::uint64_t seed);

// Argmax accuracy; ties go to the lowest class index.
double Evaluate(const ModelParams& params, const Dataset& data);
std::vector<int> Predict(const ModelParams& params, const Matrix& batch);

// Layer by layer: weights row-major, then bias.
std::vector<double> Flatten(const ModelParams& params);
ModelParams Unflatten(const Architecture& arch, std::span<const double> flat);

// {"architecture": {"layer_dims": [...]}, "params": [...]}
void SaveCheckpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams LoadCheckpoint(const std::filesystem::path& path);

}  // namespace flsim

#endif  // FLSIM_MLP_H_

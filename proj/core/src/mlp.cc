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

#include "flsim/mlp.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>

#include "flsim/error.h"
#include "json.hpp"

namespace flsim {

Architecture Architecture::GasPipeline() { return Architecture{{18, 54, 20, 8}}; }

Architecture Architecture::Wustl() { return Architecture{{41, 9, 9, 5}}; }

Architecture Architecture::FromPreset(std::string_view name) {
  if (name == "gas") return GasPipeline();
  if (name == "wustl") return Wustl();
  throw ConfigError("model.preset: unknown architecture preset '" +
                    std::string(name) + "' (expected gas or wustl)");
}

void Architecture::Validate() const {
  if (layer_dims.size() < 2) {
    throw ShapeError("Architecture: need at least input and output layers");
  }
  for (std::size_t d : layer_dims) {
    if (d == 0) throw ShapeError("Architecture: layer widths must be positive");
  }
}

std::size_t Architecture::ParameterCount() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    total += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
  }
  return total;
}

HyperParams HyperParams::GasPipeline() { return HyperParams{}; }

HyperParams HyperParams::Wustl() {
  HyperParams h;
  h.batch_size = 1000;
  return h;
}

void HyperParams::Validate() const {
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) {
    throw ConfigError("model.learning_rate: must be finite and >= 0");
  }
  if (!(momentum >= 0 && momentum < 1)) {
    throw ConfigError("model.momentum: must lie in [0, 1)");
  }
  if (batch_size == 0) throw ConfigError("model.batch_size: must be positive");
  if (local_epochs == 0) throw ConfigError("model.local_epochs: must be positive");
}

ModelParams ZeroModel(const Architecture& arch) {
  arch.Validate();
  ModelParams p{arch, {}};
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    const auto in = static_cast<Eigen::Index>(arch.layer_dims[l]);
    const auto out = static_cast<Eigen::Index>(arch.layer_dims[l + 1]);
    p.layers.push_back(DenseLayer{Matrix::Zero(out, in), Vector::Zero(out)});
  }
  return p;
}

ModelParams InitModel(const Architecture& arch, std::uint64_t seed) {
  ModelParams p = ZeroModel(arch);
  std::mt19937_64 rng(seed);
  for (auto& layer : p.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weights.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
      layer.weights.data()[i] = u(rng);
    }
  }
  return p;
}

namespace {

void CheckInput(const ModelParams& params, const Matrix& batch) {
  if (static_cast<std::size_t>(batch.cols()) != params.arch.input_dim()) {
    throw ShapeError("Forward: batch has " + std::to_string(batch.cols()) +
                     " features, model expects " +
                     std::to_string(params.arch.input_dim()));
  }
}

// Pre-activations and activations for every layer; activations[0] is the input.
struct Trace {
  std::vector<Matrix> pre;
  std::vector<Matrix> act;
};

Trace RunForward(const ModelParams& params, const Matrix& batch) {
  CheckInput(params, batch);
  Trace t;
  t.act.push_back(batch);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const DenseLayer& layer = params.layers[l];
    Matrix z = t.act.back() * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    t.pre.push_back(z);
    if (l + 1 < params.layers.size()) {
      t.act.push_back(z.cwiseMax(0.0));
    }
  }
  return t;
}

// Numerically stable row-wise log-softmax.
Matrix LogSoftmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

void CheckLabels(const ModelParams& params, const Matrix& batch,
                 std::span<const int> labels) {
  if (static_cast<std::size_t>(batch.rows()) != labels.size()) {
    throw ShapeError("labels: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(batch.rows()) + " rows");
  }
  const auto classes = static_cast<int>(params.arch.class_count());
  for (int y : labels) {
    if (y < 0 || y >= classes) {
      throw DomainError("labels: " + std::to_string(y) + " outside [0, " +
                        std::to_string(classes) + ")");
    }
  }
}

}  // namespace

Matrix Forward(const ModelParams& params, const Matrix& batch) {
  Trace t = RunForward(params, batch);
  return LogSoftmax(t.pre.back()).array().exp();
}

double CrossEntropy(const ModelParams& params, const Matrix& batch,
                    std::span<const int> labels) {
  CheckLabels(params, batch, labels);
  if (labels.empty()) throw DomainError("CrossEntropy: empty batch");
  Trace t = RunForward(params, batch);
  Matrix logp = LogSoftmax(t.pre.back());
  double total = 0.0;
  for (Eigen::Index r = 0; r < logp.rows(); ++r) {
    total -= logp(r, labels[static_cast<std::size_t>(r)]);
  }
  return total / static_cast<double>(labels.size());
}

LossAndGradient ComputeLossAndGradient(const ModelParams& params,
                                       const Matrix& batch,
                                       std::span<const int> labels) {
  CheckLabels(params, batch, labels);
  if (labels.empty()) throw DomainError("ComputeLossAndGradient: empty batch");
  Trace t = RunForward(params, batch);
  const Matrix logp = LogSoftmax(t.pre.back());
  const auto n = static_cast<double>(labels.size());

  LossAndGradient out;
  Matrix delta = logp.array().exp();
  for (Eigen::Index r = 0; r < delta.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    out.loss -= logp(r, y);
    delta(r, y) -= 1.0;
  }
  out.loss /= n;
  delta /= n;

  out.gradient.resize(params.layers.size());
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    out.gradient[l].weights = delta.transpose() * t.act[l];
    out.gradient[l].bias = delta.colwise().sum().transpose();
    if (l > 0) {
      Matrix back = delta * params.layers[l].weights;
      delta = back.cwiseProduct(
          (t.pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return out;
}

TrainResult TrainEpochs(ModelParams params, const Dataset& data,
                        const HyperParams& hyper, std::uint64_t seed) {
  if (data.empty()) throw DomainError("TrainEpochs: dataset is empty");
  hyper.Validate();
  CheckLabels(params, data.features, data.labels);
  CheckInput(params, data.features);

  std::vector<DenseLayer> velocity;
  for (const auto& layer : params.layers) {
    velocity.push_back(DenseLayer{Matrix::Zero(layer.weights.rows(), layer.weights.cols()),
                                  Vector::Zero(layer.bias.size())});
  }

  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);

  TrainResult result;
  Matrix batch;
  std::vector<int> batch_labels;
  for (std::size_t epoch = 0; epoch < hyper.local_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += hyper.batch_size) {
      const std::size_t stop = std::min(n, start + hyper.batch_size);
      const auto rows = static_cast<Eigen::Index>(stop - start);
      batch.resize(rows, data.features.cols());
      batch_labels.resize(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        batch.row(static_cast<Eigen::Index>(i - start)) =
            data.features.row(static_cast<Eigen::Index>(order[i]));
        batch_labels[i - start] = data.labels[order[i]];
      }

      LossAndGradient lg = ComputeLossAndGradient(params, batch, batch_labels);
      if (!std::isfinite(lg.loss)) {
        throw NumericError("TrainEpochs: non-finite loss in epoch " +
                           std::to_string(epoch + 1));
      }
      loss_sum += lg.loss;
      ++batches;
      for (std::size_t l = 0; l < params.layers.size(); ++l) {
        velocity[l].weights = hyper.momentum * velocity[l].weights + lg.gradient[l].weights;
        velocity[l].bias = hyper.momentum * velocity[l].bias + lg.gradient[l].bias;
        params.layers[l].weights -= hyper.learning_rate * velocity[l].weights;
        params.layers[l].bias -= hyper.learning_rate * velocity[l].bias;
      }
    }
    for (const auto& layer : params.layers) {
      if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
        throw NumericError("TrainEpochs: non-finite parameters after epoch " +
                           std::to_string(epoch + 1));
      }
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  result.params = std::move(params);
  return result;
}

std::vector<int> Predict(const ModelParams& params, const Matrix& batch) {
  Trace t = RunForward(params, batch);
  const Matrix& logits = t.pre.back();
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(r, c) > logits(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

double Evaluate(const ModelParams& params, const Dataset& data) {
  if (data.empty()) throw DomainError("Evaluate: dataset is empty");
  const std::vector<int> predicted = Predict(params, data.features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::vector<double> Flatten(const ModelParams& params) {
  std::vector<double> flat;
  flat.reserve(params.arch.ParameterCount());
  for (const auto& layer : params.layers) {
    flat.insert(flat.end(), layer.weights.data(),
                layer.weights.data() + layer.weights.size());
    flat.insert(flat.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
  }
  return flat;
}

ModelParams Unflatten(const Architecture& arch, std::span<const double> flat) {
  ModelParams p = ZeroModel(arch);
  if (flat.size() != arch.ParameterCount()) {
    throw ShapeError("Unflatten: got " + std::to_string(flat.size()) +
                     " values, architecture needs " +
                     std::to_string(arch.ParameterCount()));
  }
  std::size_t offset = 0;
  for (auto& layer : p.layers) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                layer.weights.size(), layer.weights.data());
    offset += static_cast<std::size_t>(layer.weights.size());
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                layer.bias.size(), layer.bias.data());
    offset += static_cast<std::size_t>(layer.bias.size());
  }
  return p;
}

void SaveCheckpoint(const ModelParams& params, const std::filesystem::path& path) {
  nlohmann::json j;
  j["architecture"]["layer_dims"] = params.arch.layer_dims;
  j["params"] = Flatten(params);
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << j.dump() << '\n';
  if (!out) throw IoError(path.string() + ": write failed");
}

ModelParams LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ParseError(path.string() + ": invalid JSON");
  try {
    Architecture arch{j.at("architecture").at("layer_dims").get<std::vector<std::size_t>>()};
    auto flat = j.at("params").get<std::vector<double>>();
    return Unflatten(arch, flat);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace flsim

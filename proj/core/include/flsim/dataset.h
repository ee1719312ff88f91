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

#ifndef FLSIM_DATASET_H_
#define FLSIM_DATASET_H_

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flsim {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Labeled tabular data: one row per sample, labels in [0, class_count).
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  int class_count = 0;
  std::vector<std::string> feature_names;

  std::size_t size() const { return labels.size(); }
  std::size_t feature_dim() const {
    return static_cast<std::size_t>(features.cols());
  }
  bool empty() const { return labels.empty(); }

  // Throws ShapeError/DomainError when rows and labels disagree or a label
  // falls outside [0, class_count).
  void Validate() const;

  Dataset Rows(std::span<const std::size_t> rows) const;
};

// Reads a CSV with a header row. Every column except `label_column` must be
// numeric. Errors name the offending row (1-based, header is row 1) and
// column.
Dataset LoadCsv(const std::filesystem::path& path, std::string_view label_column,
                int class_count);

// Writes features followed by the label column. Values use the shortest
// round-trip representation so LoadCsv(SaveCsv(d)) == d.
void SaveCsv(const Dataset& data, const std::filesystem::path& path,
             std::string_view label_column = "label");
void WriteCsv(const Dataset& data, std::ostream& out,
              std::string_view label_column = "label");

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;

  // Throws ConfigError naming `field` unless the ratios are non-negative and
  // sum to 1 within 1e-9.
  void Validate(std::string_view field = "split") const;
};

struct DataSplit {
  Dataset train;
  Dataset validation;
  Dataset test;
};

// Seeded shuffle, then floor(N * ratio) rows to validation and test each;
// the remainder goes to train.
DataSplit Split(const Dataset& data, const SplitRatios& ratios,
                std::uint64_t seed);

struct ScalerParams {
  std::vector<double> min;
  std::vector<double> max;
};

ScalerParams FitScaler(const Dataset& train);

// (x - min) / (max - min); constant features map to 0. Values outside the
// fitted range land outside [0, 1].
Dataset ApplyScaler(const ScalerParams& scaler, Dataset data);

// Per-client fractions of the source rows, drawn independently with
// replacement. Fractions may sum past 1.
struct ShardSpec {
  std::vector<double> fractions;
};

// Client k receives round(fractions[k] * N) rows.
std::vector<Dataset> Shard(const Dataset& train, const ShardSpec& spec,
                           std::uint64_t seed);

// Isotropic Gaussian blobs, one per class. Class centers are drawn uniformly
// from [0, center_range]^feature_dim using the generator seed.
struct SynthSpec {
  int class_count = 2;
  int feature_dim = 2;
  double center_range = 1.0;
  double stddev = 0.1;

  static SynthSpec GasLike();    // 18 features, 8 classes
  static SynthSpec WustlLike();  // 41 features, 5 classes
  // "gas-like" | "wustl-like"; throws ConfigError otherwise.
  static SynthSpec FromPreset(std::string_view name);
};

Dataset SynthGenerate(const SynthSpec& spec, std::size_t samples,
                      std::uint64_t seed);

}  // namespace flsim

#endif  // FLSIM_DATASET_H_

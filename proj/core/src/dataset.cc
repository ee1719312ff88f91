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

#include "flsim/dataset.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>

#include "flsim/error.h"
#include "flsim/seed.h"

namespace flsim {

void Dataset::Validate() const {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw ShapeError("Dataset: " + std::to_string(features.rows()) +
                     " feature rows but " + std::to_string(labels.size()) +
                     " labels");
  }
  if (class_count < 1) throw DomainError("Dataset: class_count must be >= 1");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count) {
      throw DomainError("Dataset: label " + std::to_string(labels[i]) +
                        " at row " + std::to_string(i) + " outside [0, " +
                        std::to_string(class_count) + ")");
    }
  }
}

Dataset Dataset::Rows(std::span<const std::size_t> rows) const {
  Dataset out;
  out.class_count = class_count;
  out.feature_names = feature_names;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) =
        features.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(labels[rows[i]]);
  }
  return out;
}

namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(Trim(line.substr(start)));
      return fields;
    }
    fields.push_back(Trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

std::string Where(const std::filesystem::path& path, std::size_t row,
                  std::string_view column) {
  return path.string() + ": row " + std::to_string(row) + ", column '" +
         std::string(column) + "'";
}

}  // namespace

Dataset LoadCsv(const std::filesystem::path& path, std::string_view label_column,
                int class_count) {
  if (class_count < 1) {
    throw ConfigError("class_count: must be >= 1, got " +
                      std::to_string(class_count));
  }
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open file");

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header;
  for (std::string_view f : SplitFields(line)) header.emplace_back(f);

  auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) {
    throw ParseError(path.string() + ": header has no label column '" +
                     std::string(label_column) + "'");
  }
  const auto label_index = static_cast<std::size_t>(label_it - header.begin());

  Dataset data;
  data.class_count = class_count;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != label_index) data.feature_names.push_back(header[c]);
  }
  const std::size_t dim = data.feature_names.size();

  std::vector<double> values;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (Trim(line).empty()) continue;
    std::vector<std::string_view> fields = SplitFields(line);
    if (fields.size() != header.size()) {
      throw ParseError(path.string() + ": row " + std::to_string(row) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      std::string_view f = fields[c];
      if (c == label_index) {
        int label = 0;
        auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), label);
        if (ec != std::errc() || ptr != f.data() + f.size()) {
          throw ParseError(Where(path, row, header[c]) + ": label '" +
                           std::string(f) + "' is not an integer");
        }
        if (label < 0 || label >= class_count) {
          throw ParseError(Where(path, row, header[c]) + ": label " +
                           std::to_string(label) + " outside [0, " +
                           std::to_string(class_count) + ")");
        }
        data.labels.push_back(label);
        continue;
      }
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size()) {
        throw ParseError(Where(path, row, header[c]) + ": '" + std::string(f) +
                         "' is not numeric");
      }
      values.push_back(v);
    }
  }

  const auto n = static_cast<Eigen::Index>(data.labels.size());
  data.features = Matrix(n, static_cast<Eigen::Index>(dim));
  if (n > 0) {
    data.features = Eigen::Map<const Matrix>(values.data(), n,
                                             static_cast<Eigen::Index>(dim));
  }
  return data;
}

void WriteCsv(const Dataset& data, std::ostream& out, std::string_view label_column) {
  data.Validate();
  for (std::size_t c = 0; c < data.feature_dim(); ++c) {
    if (c < data.feature_names.size()) {
      out << data.feature_names[c];
    } else {
      out << 'f' << c;
    }
    out << ',';
  }
  out << label_column << '\n';

  char buf[64];
  for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.features.cols(); ++c) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), data.features(r, c));
      out.write(buf, ptr - buf);
      out << ',';
    }
    out << data.labels[static_cast<std::size_t>(r)] << '\n';
  }
}

void SaveCsv(const Dataset& data, const std::filesystem::path& path,
             std::string_view label_column) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  WriteCsv(data, out, label_column);
  if (!out) throw IoError(path.string() + ": write failed");
}

void SplitRatios::Validate(std::string_view field) const {
  if (train < 0 || validation < 0 || test < 0) {
    throw ConfigError(std::string(field) + ": ratios must be non-negative");
  }
  const double sum = train + validation + test;
  if (std::abs(sum - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg << field << ": ratios sum to " << sum << ", expected 1";
    throw ConfigError(msg.str());
  }
}

DataSplit Split(const Dataset& data, const SplitRatios& ratios,
                std::uint64_t seed) {
  ratios.Validate();
  const std::size_t n = data.size();
  if (n < 10) {
    spdlog::warn("split: only {} samples; validation/test splits are degenerate", n);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  // A hair of slack so 0.1 * 100 floors to 10, not 9.
  auto floor_count = [n](double ratio) {
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
  };
  const std::size_t n_val = floor_count(ratios.validation);
  const std::size_t n_test = floor_count(ratios.test);
  const std::size_t n_train = n - n_val - n_test;

  std::span<const std::size_t> all(order);
  DataSplit out;
  out.train = data.Rows(all.subspan(0, n_train));
  out.validation = data.Rows(all.subspan(n_train, n_val));
  out.test = data.Rows(all.subspan(n_train + n_val, n_test));
  return out;
}

ScalerParams FitScaler(const Dataset& train) {
  if (train.empty()) throw DomainError("FitScaler: training split is empty");
  ScalerParams s;
  const Eigen::Index d = train.features.cols();
  s.min.resize(static_cast<std::size_t>(d));
  s.max.resize(static_cast<std::size_t>(d));
  for (Eigen::Index c = 0; c < d; ++c) {
    s.min[static_cast<std::size_t>(c)] = train.features.col(c).minCoeff();
    s.max[static_cast<std::size_t>(c)] = train.features.col(c).maxCoeff();
  }
  return s;
}

Dataset ApplyScaler(const ScalerParams& scaler, Dataset data) {
  if (scaler.min.size() != data.feature_dim()) {
    throw ShapeError("ApplyScaler: scaler has " + std::to_string(scaler.min.size()) +
                     " features, dataset has " + std::to_string(data.feature_dim()));
  }
  for (Eigen::Index c = 0; c < data.features.cols(); ++c) {
    const double lo = scaler.min[static_cast<std::size_t>(c)];
    const double range = scaler.max[static_cast<std::size_t>(c)] - lo;
    if (range > 0) {
      data.features.col(c) = (data.features.col(c).array() - lo) / range;
    } else {
      data.features.col(c).setZero();
    }
  }
  return data;
}

std::vector<Dataset> Shard(const Dataset& train, const ShardSpec& spec,
                           std::uint64_t seed) {
  std::vector<Dataset> shards;
  shards.reserve(spec.fractions.size());
  const std::size_t n = train.size();
  for (std::size_t k = 0; k < spec.fractions.size(); ++k) {
    const double fraction = spec.fractions[k];
    if (!(fraction > 0)) {
      throw ConfigError("shard fraction for client " + std::to_string(k) +
                        " must be positive");
    }
    const auto rows =
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    std::vector<std::size_t> picks(rows);
    if (n > 0) {
      std::mt19937_64 rng(derive_seed(seed, {k}));
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& p : picks) p = pick(rng);
    }
    shards.push_back(train.Rows(picks));
  }
  return shards;
}

SynthSpec SynthSpec::GasLike() {
  return SynthSpec{.class_count = 8, .feature_dim = 18, .center_range = 1.0,
                   .stddev = 0.25};
}

SynthSpec SynthSpec::WustlLike() {
  return SynthSpec{.class_count = 5, .feature_dim = 41, .center_range = 1.0,
                   .stddev = 0.6};
}

SynthSpec SynthSpec::FromPreset(std::string_view name) {
  if (name == "gas-like") return GasLike();
  if (name == "wustl-like") return WustlLike();
  throw ConfigError("data.preset: unknown synthetic preset '" + std::string(name) +
                    "' (expected gas-like or wustl-like)");
}

Dataset SynthGenerate(const SynthSpec& spec, std::size_t samples,
                      std::uint64_t seed) {
  if (spec.class_count < 1 || spec.feature_dim < 1) {
    throw ConfigError("synthetic spec: class_count and feature_dim must be >= 1");
  }
  if (spec.stddev < 0) throw ConfigError("synthetic spec: stddev must be >= 0");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> center(0.0, spec.center_range);
  Matrix centers(spec.class_count, spec.feature_dim);
  for (Eigen::Index i = 0; i < centers.size(); ++i) centers.data()[i] = center(rng);

  Dataset data;
  data.class_count = spec.class_count;
  data.features.resize(static_cast<Eigen::Index>(samples), spec.feature_dim);
  data.labels.resize(samples);
  for (int c = 0; c < spec.feature_dim; ++c) {
    data.feature_names.push_back("x" + std::to_string(c));
  }
  std::uniform_int_distribution<int> label(0, spec.class_count - 1);
  std::normal_distribution<double> noise(0.0, spec.stddev > 0 ? spec.stddev : 1.0);
  const double noise_gain = spec.stddev > 0 ? 1.0 : 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const int y = label(rng);
    data.labels[i] = y;
    for (int c = 0; c < spec.feature_dim; ++c) {
      data.features(static_cast<Eigen::Index>(i), c) = centers(y, c) + noise_gain * noise(rng);
    }
  }
  return data;
}

}  // namespace flsim

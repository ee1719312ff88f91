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

#ifndef FLSIM_SIMULATOR_H_
#define FLSIM_SIMULATOR_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flsim/dataset.h"
#include "flsim/mlp.h"
#include "flsim/protocol.h"

namespace flsim {

struct ClientProfile {
  ClientId client_id = 0;
  double speed_delay_s = 0.0;  // injected per local round
  double shard_fraction = 1.0;
  HyperParams hyper;
};

// compute_ms + speed_delay_s * 1000.
double ClientTrainingTime(const ClientProfile& profile, double compute_ms);

// Five clients: ids 0-2 are fast (delay drawn from {1,2,3} s, 5% of the
// training split each), ids 3-4 are slow (delay from {5..10} s, 80% and 90%).
std::vector<ClientProfile> PaperScenarioProfiles(std::uint64_t seed,
                                                 const HyperParams& hyper);

// `count` identical clients with the given delay and 1/count of the data each.
std::vector<ClientProfile> UniformProfiles(std::size_t count, double delay_s,
                                           const HyperParams& hyper);

class VirtualClock {
 public:
  double now_ms() const { return now_ms_; }
  // Throws ProtocolError when asked to move backwards.
  void AdvanceTo(double t_ms);

 private:
  double now_ms_ = 0.0;
};

// Simulated durations. With kModel a client's compute time is
//   local_epochs * shard_rows * parameters * compute_ns_per_sample_param
// plus parameters * encrypt_us_per_param when HE is on, so runs are
// reproducible. kWallClock substitutes the measured training time.
struct CostModel {
  enum class ComputeSource { kModel, kWallClock };
  ComputeSource compute = ComputeSource::kModel;
  double compute_ns_per_sample_param = 1.0;
  double encrypt_us_per_param = 0.0;
  // Server-side handling per received update (transfer plus aggregation).
  double server_ms_per_update = 10.0;
};

struct DataSource {
  enum class Kind { kSynthetic, kCsv };
  Kind kind = Kind::kSynthetic;
  std::string preset = "gas-like";
  std::size_t samples = 5000;
  std::filesystem::path csv_path;
  std::string label_column = "label";
  int class_count = 0;
  SplitRatios split;
};

struct HeSettings {
  bool enabled = true;
  unsigned key_bits = he::kDefaultKeyBits;
  std::int64_t scale = kDefaultFixedPointScale;
  AggregationRule rule = AggregationRule::kMean;
};

struct TargetSettings {
  std::optional<double> accuracy;
  // Target = accuracy of a model trained on the whole training split minus
  // `margin`; overrides `accuracy`.
  bool from_centralized = false;
  double margin = 0.01;
  std::size_t centralized_epochs = 20;
  bool stop_at_target = false;
};

struct ExperimentConfig {
  Strategy strategy = Strategy::kBfl;
  std::vector<ClientProfile> clients;
  DataSource data;
  Architecture arch = Architecture::GasPipeline();
  HeSettings he;
  TargetSettings target;
  // Upper bound on aggregation events (server model versions).
  int rounds = 10;
  // Stop before any aggregation that would complete after this simulated
  // time; 0 disables the horizon.
  double horizon_ms = 0.0;
  StrategyOptions strategy_options;
  CostModel cost;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the offending field.
  void Validate() const;
};

struct PreparedData {
  DataSplit split;  // scaled with training-split statistics
  std::vector<Dataset> shards;
};

// Loads or generates the data, splits, scales and shards it. Throws
// ConfigError when the data does not fit the architecture.
PreparedData PrepareData(const ExperimentConfig& config);

// Validation accuracy of a model trained on the full training split from the
// same initial parameters the federated run starts with.
double CentralizedAccuracy(const ExperimentConfig& config, const PreparedData& data);

enum class EventKind { kDispatch, kUpload, kAggregate };

struct EventRecord {
  double time_ms = 0.0;
  EventKind kind = EventKind::kDispatch;
  ClientId client_id = -1;  // -1 for server-only events
  int model_version = 0;
};

struct RoundRecord {
  int round = 0;
  double sim_time_ms = 0.0;
  double val_accuracy = 0.0;
  std::vector<ClientId> participants;
};

struct MetricsLog {
  Strategy strategy = Strategy::kBfl;
  std::vector<RoundRecord> rounds;
  std::vector<EventRecord> events;
  std::optional<SelectionResult> selection;  // BFL only
  std::optional<double> target_accuracy;
  std::optional<int> convergence_round;
  std::optional<double> time_to_target_ms;
  double final_val_accuracy = 0.0;
  double final_test_accuracy = 0.0;
  double total_sim_time_ms = 0.0;
  double wall_clock_ms = 0.0;
  std::vector<double> final_model;

  std::size_t AggregationCount() const;
  // Contributors of the aggregate events, in order.
  std::vector<std::vector<ClientId>> AggregationContributors() const;
};

// Index (1-based round number) of the first round whose validation accuracy
// reaches `target`.
std::optional<int> ConvergenceSpeed(const MetricsLog& log, double target);

// Runs the configured strategy to completion; deterministic for a fixed
// config. Throws ConfigError before any round runs on a bad config and
// NumericError when training or aggregation produces NaN/Inf.
MetricsLog RunExperiment(const ExperimentConfig& config);
MetricsLog RunExperiment(const ExperimentConfig& config, const PreparedData& data);

// round,sim_time_ms,val_accuracy,participants
void WriteMetricsCsv(const MetricsLog& log, std::ostream& out);
// time_ms,kind,client,model_version
void WriteEventsCsv(const MetricsLog& log, std::ostream& out);
std::string SummaryJson(const MetricsLog& log);

std::string_view EventKindName(EventKind kind);

}  // namespace flsim

#endif  // FLSIM_SIMULATOR_H_

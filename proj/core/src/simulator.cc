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

#include "flsim/simulator.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <utility>

#include "flsim/error.h"
#include "flsim/seed.h"
#include "json.hpp"

namespace flsim {

namespace {

// Stream identifiers for derive_seed.
enum Stream : std::uint64_t {
  kDataStream = 1,
  kSplitStream,
  kShardStream,
  kInitStream,
  kKeyStream,
  kTrainStream,
  kSealStream,
  kMixStream,
  kCentralStream,
  kScenarioStream,
};

using Clock = std::chrono::steady_clock;

double MillisSince(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

double ClientTrainingTime(const ClientProfile& profile, double compute_ms) {
  return compute_ms + profile.speed_delay_s * 1000.0;
}

std::vector<ClientProfile> PaperScenarioProfiles(std::uint64_t seed,
                                                 const HyperParams& hyper) {
  std::mt19937_64 rng(derive_seed(seed, {kScenarioStream}));
  std::uniform_int_distribution<int> fast(1, 3);
  std::uniform_int_distribution<int> slow(5, 10);
  const double fractions[] = {0.05, 0.05, 0.05, 0.8, 0.9};
  std::vector<ClientProfile> profiles;
  for (int id = 0; id < 5; ++id) {
    ClientProfile p;
    p.client_id = id;
    p.speed_delay_s = id < 3 ? fast(rng) : slow(rng);
    p.shard_fraction = fractions[id];
    p.hyper = hyper;
    profiles.push_back(p);
  }
  return profiles;
}

std::vector<ClientProfile> UniformProfiles(std::size_t count, double delay_s,
                                           const HyperParams& hyper) {
  std::vector<ClientProfile> profiles;
  for (std::size_t i = 0; i < count; ++i) {
    profiles.push_back(ClientProfile{static_cast<ClientId>(i), delay_s,
                                     1.0 / static_cast<double>(count), hyper});
  }
  return profiles;
}

void VirtualClock::AdvanceTo(double t_ms) {
  if (t_ms < now_ms_) {
    throw ProtocolError("VirtualClock: cannot move from " + std::to_string(now_ms_) +
                        " ms back to " + std::to_string(t_ms) + " ms");
  }
  now_ms_ = t_ms;
}

void ExperimentConfig::Validate() const {
  if (clients.empty()) throw ConfigError("clients: at least one client is required");
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const ClientProfile& c = clients[i];
    const std::string field = "clients[" + std::to_string(i) + "]";
    if (c.client_id != static_cast<ClientId>(i)) {
      throw ConfigError(field + ".id: client ids must be 0..N-1 in order");
    }
    if (!(c.speed_delay_s >= 0) || !std::isfinite(c.speed_delay_s)) {
      throw ConfigError(field + ".delay_s: must be finite and >= 0");
    }
    if (!(c.shard_fraction > 0) || !std::isfinite(c.shard_fraction)) {
      throw ConfigError(field + ".fraction: must be positive");
    }
    c.hyper.Validate();
  }
  arch.Validate();
  data.split.Validate("data.split");
  if (data.kind == DataSource::Kind::kCsv) {
    if (data.csv_path.empty()) throw ConfigError("data.csv_path: required for csv source");
    if (data.class_count < 1) throw ConfigError("data.class_count: must be >= 1");
  } else {
    SynthSpec::FromPreset(data.preset);
    if (data.samples == 0) throw ConfigError("data.samples: must be positive");
  }
  if (he.enabled && he.key_bits < he::kMinKeyBits) {
    throw ConfigError("he.key_bits: " + std::to_string(he.key_bits) +
                      " is below the minimum of " + std::to_string(he::kMinKeyBits));
  }
  if (he.scale <= 0) throw ConfigError("he.scale: must be positive");
  if (rounds < 1) throw ConfigError("experiment.rounds: must be >= 1");
  if (!(horizon_ms >= 0)) throw ConfigError("experiment.horizon_ms: must be >= 0");
  if (target.accuracy && !(*target.accuracy >= 0)) {
    throw ConfigError("target.accuracy: must be >= 0");
  }
  if (target.from_centralized && target.centralized_epochs == 0) {
    throw ConfigError("target.centralized_epochs: must be positive");
  }
  if (target.stop_at_target && !target.accuracy && !target.from_centralized) {
    throw ConfigError("target.stop_at_target: needs target.accuracy or target.from_centralized");
  }
  if (cost.compute_ns_per_sample_param < 0 || cost.encrypt_us_per_param < 0 ||
      cost.server_ms_per_update < 0) {
    throw ConfigError("cost: coefficients must be >= 0");
  }
  // Builds the state once so fedbuff_k / afl_alpha are checked up front.
  [[maybe_unused]] const StrategyState probe(strategy, clients.size(), strategy_options);
}

PreparedData PrepareData(const ExperimentConfig& config) {
  config.Validate();
  Dataset raw;
  if (config.data.kind == DataSource::Kind::kCsv) {
    raw = LoadCsv(config.data.csv_path, config.data.label_column, config.data.class_count);
  } else {
    raw = SynthGenerate(SynthSpec::FromPreset(config.data.preset), config.data.samples,
                        derive_seed(config.seed, {kDataStream}));
  }
  if (raw.feature_dim() != config.arch.input_dim()) {
    throw ConfigError("model: architecture expects " +
                      std::to_string(config.arch.input_dim()) +
                      " input features, data has " + std::to_string(raw.feature_dim()));
  }
  if (static_cast<std::size_t>(raw.class_count) != config.arch.class_count()) {
    throw ConfigError("model: architecture has " +
                      std::to_string(config.arch.class_count()) + " outputs, data has " +
                      std::to_string(raw.class_count) + " classes");
  }

  PreparedData prepared;
  DataSplit split = Split(raw, config.data.split, derive_seed(config.seed, {kSplitStream}));
  if (split.train.empty() || split.validation.empty() || split.test.empty()) {
    throw ConfigError("data: " + std::to_string(raw.size()) +
                      " samples leave an empty train, validation or test split");
  }
  const ScalerParams scaler = FitScaler(split.train);
  prepared.split.train = ApplyScaler(scaler, std::move(split.train));
  prepared.split.validation = ApplyScaler(scaler, std::move(split.validation));
  prepared.split.test = ApplyScaler(scaler, std::move(split.test));

  ShardSpec spec;
  for (const auto& c : config.clients) spec.fractions.push_back(c.shard_fraction);
  prepared.shards =
      Shard(prepared.split.train, spec, derive_seed(config.seed, {kShardStream}));
  for (std::size_t k = 0; k < prepared.shards.size(); ++k) {
    if (prepared.shards[k].empty()) {
      throw ConfigError("clients[" + std::to_string(k) +
                        "].fraction: yields an empty shard");
    }
  }
  return prepared;
}

double CentralizedAccuracy(const ExperimentConfig& config, const PreparedData& data) {
  HyperParams hyper = config.clients.empty() ? HyperParams{} : config.clients.front().hyper;
  hyper.local_epochs = config.target.centralized_epochs;
  ModelParams init = InitModel(config.arch, derive_seed(config.seed, {kInitStream}));
  TrainResult trained = TrainEpochs(std::move(init), data.split.train, hyper,
                                    derive_seed(config.seed, {kCentralStream}));
  return Evaluate(trained.params, data.split.validation);
}

std::size_t MetricsLog::AggregationCount() const {
  return static_cast<std::size_t>(std::count_if(
      events.begin(), events.end(),
      [](const EventRecord& e) { return e.kind == EventKind::kAggregate; }));
}

std::vector<std::vector<ClientId>> MetricsLog::AggregationContributors() const {
  std::vector<std::vector<ClientId>> out;
  for (const auto& r : rounds) out.push_back(r.participants);
  return out;
}

std::optional<int> ConvergenceSpeed(const MetricsLog& log, double target) {
  for (const auto& r : log.rounds) {
    if (r.val_accuracy >= target) return r.round;
  }
  return std::nullopt;
}

namespace {

struct TrainedUpdate {
  SealedModel payload;
  double compute_ms = 0.0;
  double training_time_ms = 0.0;
};

// Queue entry; the payload waits in Experiment::in_flight_ under `seq`.
struct Pending {
  double finish_ms;
  ClientId client_id;
  int round_index;
  double training_time_ms;
  std::uint64_t seq;
};

struct PendingLater {
  bool operator()(const Pending& a, const Pending& b) const {
    if (a.finish_ms != b.finish_ms) return a.finish_ms > b.finish_ms;
    return a.client_id > b.client_id;
  }
};

class Experiment {
 public:
  Experiment(const ExperimentConfig& config, const PreparedData& data)
      : config_(config),
        data_(data),
        state_(config.strategy, config.clients.size(), config.strategy_options),
        channel_(MakeChannel(config)),
        local_rounds_(config.clients.size(), 0) {}

  MetricsLog Run() {
    const auto wall_start = Clock::now();
    log_.strategy = config_.strategy;
    if (config_.target.from_centralized) {
      const double centralized = CentralizedAccuracy(config_, data_);
      log_.target_accuracy = centralized - config_.target.margin;
      spdlog::info("centralized validation accuracy {:.4f}, target {:.4f}", centralized,
                   *log_.target_accuracy);
    } else {
      log_.target_accuracy = config_.target.accuracy;
    }

    global_plain_ = Flatten(InitModel(config_.arch, derive_seed(config_.seed, {kInitStream})));
    if (config_.strategy == Strategy::kSfl || config_.strategy == Strategy::kBfl) {
      RunSynchronous();
    } else {
      RunAsynchronous();
    }

    const ModelParams final_model = Unflatten(config_.arch, global_plain_);
    log_.final_model = global_plain_;
    log_.final_val_accuracy = log_.rounds.empty()
                                  ? Evaluate(final_model, data_.split.validation)
                                  : log_.rounds.back().val_accuracy;
    log_.final_test_accuracy = Evaluate(final_model, data_.split.test);
    log_.total_sim_time_ms = log_.rounds.empty() ? 0.0 : log_.rounds.back().sim_time_ms;
    log_.selection = state_.selection();
    if (log_.target_accuracy) {
      log_.convergence_round = ConvergenceSpeed(log_, *log_.target_accuracy);
      if (log_.convergence_round) {
        log_.time_to_target_ms =
            log_.rounds[static_cast<std::size_t>(*log_.convergence_round - 1)].sim_time_ms;
      }
    }
    log_.wall_clock_ms = MillisSince(wall_start);
    return std::move(log_);
  }

 private:
  static ModelChannel MakeChannel(const ExperimentConfig& config) {
    if (!config.he.enabled) return ModelChannel::Plaintext(config.he.rule);
    he::KeyPair keys =
        he::KeyGen(config.he.key_bits, derive_seed(config.seed, {kKeyStream}));
    return ModelChannel::Encrypted(std::move(keys), config.he.scale, config.he.rule);
  }

  TrainedUpdate Train(ClientId k, int round, std::span<const double> start) {
    const ClientProfile& profile = config_.clients[static_cast<std::size_t>(k)];
    const Dataset& shard = data_.shards[static_cast<std::size_t>(k)];
    const auto ku = static_cast<std::uint64_t>(k);
    const auto ru = static_cast<std::uint64_t>(round);

    const auto wall_start = Clock::now();
    TrainResult trained = TrainEpochs(Unflatten(config_.arch, start), shard, profile.hyper,
                                      derive_seed(config_.seed, {kTrainStream, ku, ru}));
    TrainedUpdate update;
    update.payload =
        channel_.Seal(Flatten(trained.params), derive_seed(config_.seed, {kSealStream, ku, ru}));
    const double wall_ms = MillisSince(wall_start);

    if (config_.cost.compute == CostModel::ComputeSource::kWallClock) {
      update.compute_ms = wall_ms;
    } else {
      const auto params = static_cast<double>(config_.arch.ParameterCount());
      update.compute_ms = static_cast<double>(profile.hyper.local_epochs) *
                          static_cast<double>(shard.size()) * params *
                          config_.cost.compute_ns_per_sample_param * 1e-6;
      if (channel_.encrypted()) update.compute_ms += params * config_.cost.encrypt_us_per_param * 1e-3;
    }
    update.training_time_ms = ClientTrainingTime(profile, update.compute_ms);
    if (!(update.training_time_ms > 0)) {
      // Algorithm input must be strictly positive; only reachable with a
      // zero delay and a zero cost coefficient.
      update.training_time_ms = std::nextafter(0.0, 1.0);
    }
    return update;
  }

  void Log(double t, EventKind kind, ClientId client) {
    log_.events.push_back(EventRecord{t, kind, client, version_});
  }

  double ServerCost(std::size_t updates) const {
    return static_cast<double>(updates) * config_.cost.server_ms_per_update;
  }

  bool PastHorizon(double t) const {
    return config_.horizon_ms > 0 && t > config_.horizon_ms;
  }

  // Returns true when the run should stop.
  bool Record(double t, std::vector<ClientId> participants) {
    ++version_;
    Log(t, EventKind::kAggregate, -1);
    const double acc =
        Evaluate(Unflatten(config_.arch, global_plain_), data_.split.validation);
    log_.rounds.push_back(RoundRecord{version_, t, acc, std::move(participants)});
    spdlog::debug("{} round {} t={:.1f}ms val_acc={:.4f}", StrategyName(config_.strategy),
                  version_, t, acc);
    if (version_ >= config_.rounds) return true;
    return config_.target.stop_at_target && log_.target_accuracy &&
           acc >= *log_.target_accuracy;
  }

  void RunSynchronous() {
    SealedModel global;
    for (int round = 1; round <= config_.rounds; ++round) {
      const double start = clock_.now_ms();
      std::vector<Arrival> arrivals;
      for (ClientId k : state_.RoundParticipants(round)) {
        Log(start, EventKind::kDispatch, k);
        TrainedUpdate u = Train(k, round, global_plain_);
        arrivals.push_back(Arrival{k, start + u.training_time_ms, u.training_time_ms, round,
                                   std::move(u.payload)});
      }
      std::vector<std::pair<double, ClientId>> uploads;
      for (const auto& a : arrivals) uploads.emplace_back(a.arrival_time_ms, a.client_id);
      std::sort(uploads.begin(), uploads.end());

      RoundOutcome outcome =
          state_.RunRound(channel_, global, std::move(arrivals),
                          derive_seed(config_.seed, {kMixStream, static_cast<std::uint64_t>(round)}));
      const double end =
          start + outcome.duration_ms + ServerCost(outcome.participants.size());
      if (PastHorizon(end)) break;

      for (const auto& [t, k] : uploads) Log(t, EventKind::kUpload, k);
      clock_.AdvanceTo(end);
      global = std::move(outcome.aggregations.front().global);
      global_plain_ = channel_.Open(global);
      if (Record(end, outcome.participants)) break;
    }
  }

  void Dispatch(ClientId k, double at) {
    Log(at, EventKind::kDispatch, k);
    const int round = ++local_rounds_[static_cast<std::size_t>(k)];
    TrainedUpdate u = Train(k, round, global_plain_);
    const std::uint64_t seq = next_seq_++;
    in_flight_.emplace(seq, std::move(u.payload));
    pending_.push(Pending{at + u.training_time_ms, k, round, u.training_time_ms, seq});
  }

  void RunAsynchronous() {
    SealedModel global =
        channel_.Seal(global_plain_, derive_seed(config_.seed, {kSealStream, ~0ULL, 0}));
    for (std::size_t k = 0; k < config_.clients.size(); ++k) {
      Dispatch(static_cast<ClientId>(k), 0.0);
    }
    double server_free = 0.0;
    std::uint64_t arrival_index = 0;
    while (!pending_.empty()) {
      const Pending p = pending_.top();
      pending_.pop();
      auto slot = in_flight_.find(p.seq);
      SealedModel payload = std::move(slot->second);
      in_flight_.erase(slot);
      if (PastHorizon(p.finish_ms)) break;
      clock_.AdvanceTo(p.finish_ms);
      Log(p.finish_ms, EventKind::kUpload, p.client_id);

      Arrival arrival{p.client_id, p.finish_ms, p.training_time_ms, p.round_index,
                      std::move(payload)};
      std::optional<AggregationEvent> event;
      if (config_.strategy == Strategy::kAfl) {
        event = state_.AflStep(channel_, global, arrival,
                               derive_seed(config_.seed, {kMixStream, arrival_index}));
      } else {
        event = state_.FedBuffStep(channel_, std::move(arrival));
      }
      ++arrival_index;

      double resume = std::max(p.finish_ms, server_free);
      if (event) {
        const double done = resume + ServerCost(event->contributors.size());
        if (PastHorizon(done)) break;
        server_free = done;
        resume = done;
        global = std::move(event->global);
        global_plain_ = channel_.Open(global);
        if (Record(done, std::move(event->contributors))) break;
      }
      Dispatch(p.client_id, resume);
    }
  }

  const ExperimentConfig& config_;
  const PreparedData& data_;
  StrategyState state_;
  ModelChannel channel_;
  VirtualClock clock_;
  MetricsLog log_;
  std::vector<double> global_plain_;
  std::vector<int> local_rounds_;
  std::priority_queue<Pending, std::vector<Pending>, PendingLater> pending_;
  std::map<std::uint64_t, SealedModel> in_flight_;
  std::uint64_t next_seq_ = 0;
  int version_ = 0;
};

}  // namespace

MetricsLog RunExperiment(const ExperimentConfig& config, const PreparedData& data) {
  config.Validate();
  if (data.shards.size() != config.clients.size()) {
    throw ConfigError("clients: prepared data has " + std::to_string(data.shards.size()) +
                      " shards for " + std::to_string(config.clients.size()) + " clients");
  }
  return Experiment(config, data).Run();
}

MetricsLog RunExperiment(const ExperimentConfig& config) {
  const PreparedData data = PrepareData(config);
  return RunExperiment(config, data);
}

std::string_view EventKindName(EventKind kind) {
  switch (kind) {
    case EventKind::kDispatch:
      return "dispatch";
    case EventKind::kUpload:
      return "upload";
    case EventKind::kAggregate:
      return "aggregate";
  }
  return "unknown";
}

namespace {

std::string JoinIds(const std::vector<ClientId>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(ids[i]);
  }
  return out;
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

void WriteMetricsCsv(const MetricsLog& log, std::ostream& out) {
  out << "round,sim_time_ms,val_accuracy,participants\n";
  for (const auto& r : log.rounds) {
    out << r.round << ',' << Fixed(r.sim_time_ms, 3) << ',' << Fixed(r.val_accuracy, 6)
        << ',' << JoinIds(r.participants) << '\n';
  }
}

void WriteEventsCsv(const MetricsLog& log, std::ostream& out) {
  out << "time_ms,kind,client,model_version\n";
  for (const auto& e : log.events) {
    out << Fixed(e.time_ms, 3) << ',' << EventKindName(e.kind) << ',' << e.client_id << ','
        << e.model_version << '\n';
  }
}

std::string SummaryJson(const MetricsLog& log) {
  nlohmann::ordered_json j;
  j["strategy"] = std::string(StrategyName(log.strategy));
  j["rounds"] = log.rounds.size();
  j["aggregation_events"] = log.AggregationCount();
  j["total_sim_time_ms"] = log.total_sim_time_ms;
  j["final_val_accuracy"] = log.final_val_accuracy;
  j["final_test_accuracy"] = log.final_test_accuracy;
  j["target_accuracy"] =
      log.target_accuracy ? nlohmann::ordered_json(*log.target_accuracy) : nullptr;
  j["convergence_round"] =
      log.convergence_round ? nlohmann::ordered_json(*log.convergence_round) : nullptr;
  j["time_to_target_ms"] =
      log.time_to_target_ms ? nlohmann::ordered_json(*log.time_to_target_ms) : nullptr;
  if (log.selection) {
    j["selection"]["t_wavg_ms"] = log.selection->t_wavg_ms;
    j["selection"]["selected"] = log.selection->selected;
  }
  j["wall_clock_ms"] = log.wall_clock_ms;
  return j.dump(2);
}

}  // namespace flsim

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

#include "flsim/protocol.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>

#include "flsim/error.h"
#include "flsim/seed.h"

namespace flsim {

std::string_view StrategyName(Strategy s) {
  switch (s) {
    case Strategy::kSfl:
      return "sfl";
    case Strategy::kAfl:
      return "afl";
    case Strategy::kFedBuff:
      return "fedbuff";
    case Strategy::kBfl:
      return "bfl";
  }
  return "unknown";
}

Strategy ParseStrategy(std::string_view name) {
  for (Strategy s : kAllStrategies) {
    if (StrategyName(s) == name) return s;
  }
  throw ConfigError("strategy: unknown strategy '" + std::string(name) +
                    "' (expected sfl, afl, fedbuff or bfl)");
}

double WeightedAverageTime(std::span<const double> times_ms) {
  if (times_ms.empty()) throw DomainError("WeightedAverageTime: no training times");
  for (double t : times_ms) {
    if (!(t > 0) || !std::isfinite(t)) {
      throw DomainError("WeightedAverageTime: training times must be positive");
    }
  }
  std::vector<double> sorted(times_ms.begin(), times_ms.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  std::vector<double> weights(sorted.size());
  std::transform(sorted.begin(), sorted.end(), weights.begin(),
                 [](double t) { return 1.0 / t; });
  std::reverse(weights.begin(), weights.end());

  double weighted_time = 0.0;
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    weighted_time += sorted[i] * weights[i];
    weight_sum += weights[i];
  }
  // Rounding must not push the mean outside the observed range.
  return std::clamp(weighted_time / weight_sum, sorted.back(), sorted.front());
}

bool SelectionResult::Contains(ClientId id) const {
  return std::binary_search(selected.begin(), selected.end(), id);
}

SelectionResult SelectClients(std::span<const ClientTiming> timings) {
  if (timings.empty()) throw DomainError("SelectClients: no clients");
  std::vector<double> times;
  times.reserve(timings.size());
  for (const auto& t : timings) times.push_back(t.training_time_ms);

  SelectionResult result;
  result.t_wavg_ms = WeightedAverageTime(times);
  // A time equal to the deadline in exact arithmetic may sit an ulp above it.
  const double cutoff = result.t_wavg_ms * (1.0 + 1e-12);
  for (const auto& t : timings) {
    if (t.training_time_ms <= cutoff) result.selected.push_back(t.client_id);
  }
  std::sort(result.selected.begin(), result.selected.end());
  return result;
}

SelectionResult SelectClients(std::span<const ClientUpdate> updates) {
  std::vector<ClientTiming> timings;
  timings.reserve(updates.size());
  for (const auto& u : updates) timings.push_back({u.client_id, u.training_time_ms});
  return SelectClients(timings);
}

EncryptedVector EncryptVector(const he::PublicKey& pk, const FixedPointCodec& codec,
                              std::span<const double> values, he::RandomSource& rng) {
  EncryptedVector out;
  out.reserve(values.size());
  for (double v : values) out.push_back(he::Encrypt(pk, codec.Encode(v), rng));
  return out;
}

std::vector<double> DecryptVector(const he::SecretKey& sk,
                                  const FixedPointCodec& codec,
                                  const EncryptedVector& values, int scale_power) {
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& c : values) out.push_back(codec.Decode(he::Decrypt(sk, c), scale_power));
  return out;
}

namespace {

void CheckUpdates(const he::PublicKey& pk,
                  std::span<const EncryptedVector* const> updates,
                  const char* op) {
  if (updates.empty()) throw ProtocolError(std::string(op) + ": no updates");
  const std::size_t len = updates.front()->size();
  for (const EncryptedVector* u : updates) {
    if (u->size() != len) {
      throw ProtocolError(std::string(op) + ": update lengths differ (" +
                          std::to_string(u->size()) + " vs " +
                          std::to_string(len) + ")");
    }
    for (const auto& c : *u) {
      if (c.key_tag != pk.tag()) {
        throw ProtocolError(std::string(op) + ": update encrypted under another key");
      }
    }
  }
}

template <typename T>
void CheckPlain(std::span<const std::vector<T>* const> updates, const char* op) {
  if (updates.empty()) throw ProtocolError(std::string(op) + ": no updates");
  for (const auto* u : updates) {
    if (u->size() != updates.front()->size()) {
      throw ProtocolError(std::string(op) + ": update lengths differ");
    }
  }
}

}  // namespace

EncryptedVector EncryptedAggregate(const he::PublicKey& pk,
                                   const FixedPointCodec& codec,
                                   std::span<const EncryptedVector* const> updates) {
  CheckUpdates(pk, updates, "EncryptedAggregate");
  // round(scale^2 / m), computed exactly.
  const mpz_class m = static_cast<unsigned long>(updates.size());
  const mpz_class scale = static_cast<long>(codec.scale());
  const mpz_class inverse = (scale * scale + m / 2) / m;
  if (inverse * codec.scale() >= codec.modulus() / 2) {
    throw EncodingError("EncryptedAggregate: scale^3 does not fit the key modulus");
  }
  const std::size_t len = updates.front()->size();
  EncryptedVector out;
  out.reserve(len);
  for (std::size_t i = 0; i < len; ++i) {
    he::Ciphertext acc = (*updates.front())[i];
    for (std::size_t k = 1; k < updates.size(); ++k) {
      acc = he::Add(pk, acc, (*updates[k])[i]);
    }
    out.push_back(he::ScalarMul(pk, acc, inverse));
  }
  return out;
}

EncryptedVector EncryptedLiteralFold(const he::PublicKey& pk,
                                     const FixedPointCodec& codec,
                                     std::span<const EncryptedVector* const> updates,
                                     std::size_t divisor) {
  CheckUpdates(pk, updates, "EncryptedLiteralFold");
  if (divisor == 0) throw DomainError("EncryptedLiteralFold: divisor must be positive");

  // Final scale must leave headroom for values up to ~1e3 in magnitude.
  mpz_class final_scale;
  mpz_ui_pow_ui(final_scale.get_mpz_t(), static_cast<unsigned long>(codec.scale()),
                updates.size() + 1);
  if (final_scale * 2000 >= pk.n()) {
    throw EncodingError("EncryptedLiteralFold: scale^" +
                        std::to_string(updates.size() + 1) +
                        " exceeds the key modulus; use a larger key");
  }

  const mpz_class inverse = codec.Encode(1.0 / static_cast<double>(divisor));
  const std::size_t len = updates.front()->size();
  EncryptedVector acc(len, he::Zero(pk));
  mpz_class lift = 1;  // scale^k for the k-th update (0-based)
  for (std::size_t k = 0; k < updates.size(); ++k) {
    for (std::size_t i = 0; i < len; ++i) {
      he::Ciphertext term = (*updates[k])[i];
      if (k > 0) term = he::ScalarMul(pk, term, lift);
      acc[i] = he::ScalarMul(pk, he::Add(pk, term, acc[i]), inverse);
    }
    lift *= codec.scale();
  }
  return acc;
}

std::vector<double> PlainMean(std::span<const std::vector<double>* const> updates) {
  CheckPlain(updates, "PlainMean");
  std::vector<double> out(updates.front()->size(), 0.0);
  for (const auto* u : updates) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += (*u)[i];
  }
  const auto m = static_cast<double>(updates.size());
  for (double& v : out) v /= m;
  return out;
}

std::vector<double> PlainLiteralFold(std::span<const std::vector<double>* const> updates,
                                     std::size_t divisor) {
  CheckPlain(updates, "PlainLiteralFold");
  if (divisor == 0) throw DomainError("PlainLiteralFold: divisor must be positive");
  std::vector<double> acc(updates.front()->size(), 0.0);
  const auto d = static_cast<double>(divisor);
  for (const auto* u : updates) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = ((*u)[i] + acc[i]) / d;
  }
  return acc;
}

std::vector<double> AflMerge(std::span<const double> global,
                             std::span<const double> local, double alpha) {
  if (global.size() != local.size()) {
    throw ProtocolError("AflMerge: global has " + std::to_string(global.size()) +
                        " values, local has " + std::to_string(local.size()));
  }
  if (!(alpha > 0 && alpha <= 1)) throw DomainError("AflMerge: alpha must lie in (0, 1]");
  std::vector<double> out(global.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (1.0 - alpha) * global[i] + alpha * local[i];
  }
  return out;
}

std::size_t DefaultFedBuffCapacity(std::size_t clients) { return (clients + 1) / 2; }

ModelChannel::ModelChannel(std::optional<he::KeyPair> keys,
                           std::optional<FixedPointCodec> codec, AggregationRule rule)
    : keys_(std::move(keys)), codec_(std::move(codec)), rule_(rule) {}

ModelChannel ModelChannel::Plaintext(AggregationRule rule) {
  return ModelChannel(std::nullopt, std::nullopt, rule);
}

ModelChannel ModelChannel::Encrypted(he::KeyPair keys, std::int64_t scale,
                                     AggregationRule rule) {
  FixedPointCodec codec(keys.public_key.n(), scale);
  return ModelChannel(std::move(keys), std::move(codec), rule);
}

SealedModel ModelChannel::Seal(std::span<const double> params, std::uint64_t seed) const {
  SealedModel out;
  if (!encrypted()) {
    out.plain.assign(params.begin(), params.end());
    return out;
  }
  he::RandomSource rng = he::RandomSource::Seeded(seed);
  out.cipher = EncryptVector(keys_->public_key, *codec_, params, rng);
  out.scale_power = 1;
  return out;
}

std::vector<double> ModelChannel::Open(const SealedModel& model) const {
  std::vector<double> out =
      model.encrypted()
          ? DecryptVector(keys_->secret_key, *codec_, model.cipher, model.scale_power)
          : model.plain;
  for (double v : out) {
    if (!std::isfinite(v)) throw NumericError("global model has non-finite entries");
  }
  return out;
}

SealedModel ModelChannel::Aggregate(std::span<const SealedModel* const> updates,
                                    std::size_t literal_divisor) const {
  if (updates.empty()) throw ProtocolError("Aggregate: no updates");
  SealedModel out;
  if (!encrypted()) {
    std::vector<const std::vector<double>*> plain;
    for (const auto* u : updates) {
      if (u->encrypted()) throw ProtocolError("Aggregate: ciphertext on a plaintext channel");
      plain.push_back(&u->plain);
    }
    out.plain = rule_ == AggregationRule::kMean ? PlainMean(plain)
                                                : PlainLiteralFold(plain, literal_divisor);
    return out;
  }
  std::vector<const EncryptedVector*> cipher;
  for (const auto* u : updates) {
    if (!u->encrypted() || u->scale_power != 1) {
      throw ProtocolError("Aggregate: updates must be freshly sealed ciphertexts");
    }
    cipher.push_back(&u->cipher);
  }
  if (rule_ == AggregationRule::kMean) {
    out.cipher = EncryptedAggregate(keys_->public_key, *codec_, cipher);
    out.scale_power = kAggregateScalePower;
  } else {
    out.cipher = EncryptedLiteralFold(keys_->public_key, *codec_, cipher, literal_divisor);
    out.scale_power = static_cast<int>(updates.size()) + 1;
  }
  return out;
}

SealedModel ModelChannel::Mix(const SealedModel& global, const SealedModel& local,
                              double alpha, std::uint64_t seed) const {
  std::vector<double> merged = AflMerge(Open(global), Open(local), alpha);
  return Seal(merged, seed);
}

StrategyState::StrategyState(Strategy strategy, std::size_t client_count,
                             StrategyOptions options)
    : strategy_(strategy),
      client_count_(client_count),
      fedbuff_capacity_(options.fedbuff_capacity == 0
                            ? DefaultFedBuffCapacity(client_count)
                            : options.fedbuff_capacity),
      afl_alpha_(options.afl_alpha) {
  if (client_count_ == 0) throw ConfigError("clients: at least one client is required");
  if (fedbuff_capacity_ > client_count_) {
    throw ConfigError("strategy.fedbuff_k: buffer capacity " +
                      std::to_string(fedbuff_capacity_) + " exceeds the " +
                      std::to_string(client_count_) + " clients");
  }
  if (!(afl_alpha_ > 0 && afl_alpha_ <= 1)) {
    throw ConfigError("strategy.afl_alpha: must lie in (0, 1]");
  }
}

std::vector<ClientId> StrategyState::RoundParticipants(int round) const {
  if (strategy_ == Strategy::kBfl && round > 1) {
    if (!selection_) throw ProtocolError("BFL: selection requested before round 1 finished");
    return selection_->selected;
  }
  std::vector<ClientId> all(client_count_);
  for (std::size_t i = 0; i < client_count_; ++i) all[i] = static_cast<ClientId>(i);
  return all;
}

std::optional<AggregationEvent> StrategyState::FedBuffStep(const ModelChannel& channel,
                                                           Arrival arrival) {
  const double time = arrival.arrival_time_ms;
  buffer_.push_back(std::move(arrival));
  if (buffer_.size() < fedbuff_capacity_) return std::nullopt;

  AggregationEvent event;
  event.time_ms = time;
  std::vector<const SealedModel*> payloads;
  for (const auto& a : buffer_) {
    payloads.push_back(&a.payload);
    event.contributors.push_back(a.client_id);
  }
  event.global = channel.Aggregate(payloads, buffer_.size());
  buffer_.clear();
  return event;
}

AggregationEvent StrategyState::AflStep(const ModelChannel& channel,
                                        const SealedModel& global,
                                        const Arrival& arrival,
                                        std::uint64_t seed) const {
  AggregationEvent event;
  event.time_ms = arrival.arrival_time_ms;
  event.contributors = {arrival.client_id};
  event.global = channel.Mix(global, arrival.payload, afl_alpha_, seed);
  return event;
}

RoundOutcome StrategyState::RunRound(const ModelChannel& channel,
                                     const SealedModel& global,
                                     std::vector<Arrival> arrivals, std::uint64_t seed) {
  if (arrivals.empty()) throw ProtocolError("RunRound: no arrivals");
  std::stable_sort(arrivals.begin(), arrivals.end(), [](const Arrival& a, const Arrival& b) {
    if (a.arrival_time_ms != b.arrival_time_ms) return a.arrival_time_ms < b.arrival_time_ms;
    return a.client_id < b.client_id;
  });

  RoundOutcome outcome;
  std::set<ClientId> seen;
  for (const auto& a : arrivals) {
    if (a.client_id < 0 || static_cast<std::size_t>(a.client_id) >= client_count_) {
      throw ProtocolError("RunRound: unknown client " + std::to_string(a.client_id));
    }
    if (!seen.insert(a.client_id).second) {
      throw ProtocolError("RunRound: duplicate arrival from client " +
                          std::to_string(a.client_id));
    }
    outcome.duration_ms = std::max(outcome.duration_ms, a.training_time_ms);
  }
  outcome.participants.assign(seen.begin(), seen.end());

  const int round = rounds_completed_ + 1;
  switch (strategy_) {
    case Strategy::kSfl:
    case Strategy::kBfl: {
      std::vector<ClientId> expected = RoundParticipants(round);
      if (outcome.participants != expected) {
        throw ProtocolError("RunRound: round " + std::to_string(round) + " of " +
                            std::string(StrategyName(strategy_)) +
                            " received updates from an unexpected client set");
      }
      std::vector<const SealedModel*> payloads;
      std::vector<ClientTiming> timings;
      for (const auto& a : arrivals) {
        payloads.push_back(&a.payload);
        timings.push_back({a.client_id, a.training_time_ms});
      }
      AggregationEvent event;
      event.time_ms = arrivals.back().arrival_time_ms;
      event.contributors = outcome.participants;
      event.global = channel.Aggregate(payloads, client_count_);
      outcome.aggregations.push_back(std::move(event));
      if (strategy_ == Strategy::kBfl && round == 1) selection_ = SelectClients(timings);
      break;
    }
    case Strategy::kAfl: {
      const SealedModel* current = &global;
      for (std::size_t i = 0; i < arrivals.size(); ++i) {
        outcome.aggregations.push_back(
            AflStep(channel, *current, arrivals[i], derive_seed(seed, {i})));
        current = &outcome.aggregations.back().global;
      }
      break;
    }
    case Strategy::kFedBuff: {
      for (auto& a : arrivals) {
        if (auto event = FedBuffStep(channel, std::move(a))) {
          outcome.aggregations.push_back(std::move(*event));
        }
      }
      break;
    }
  }
  ++rounds_completed_;
  return outcome;
}

}  // namespace flsim

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

#ifndef FLSIM_PROTOCOL_H_
#define FLSIM_PROTOCOL_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "flsim/fixed_point.h"
#include "flsim/paillier.h"

namespace flsim {

using ClientId = int;

enum class Strategy { kSfl, kAfl, kFedBuff, kBfl };

inline constexpr std::array<Strategy, 4> kAllStrategies = {
    Strategy::kSfl, Strategy::kAfl, Strategy::kFedBuff, Strategy::kBfl};

std::string_view StrategyName(Strategy s);
// "sfl" | "afl" | "fedbuff" | "bfl"; throws ConfigError otherwise.
Strategy ParseStrategy(std::string_view name);

// BFL deadline. Times are sorted in descending order, each gets the initial
// weight 1/t, and the weight list is reversed before the weighted mean, so
// the slowest time is paired with the largest weight (1 / fastest time).
// Throws DomainError on an empty list or a non-positive / non-finite time.
double WeightedAverageTime(std::span<const double> times_ms);

struct ClientTiming {
  ClientId client_id;
  double training_time_ms;
};

struct SelectionResult {
  double t_wavg_ms = 0.0;
  std::vector<ClientId> selected;  // ascending

  bool Contains(ClientId id) const;
};

// Admits every client whose training time is <= the weighted average time.
SelectionResult SelectClients(std::span<const ClientTiming> timings);

using EncryptedVector = std::vector<he::Ciphertext>;

struct ClientUpdate {
  ClientId client_id = 0;
  EncryptedVector encrypted_params;
  double training_time_ms = 0.0;
  int round_index = 0;
};

SelectionResult SelectClients(std::span<const ClientUpdate> updates);

EncryptedVector EncryptVector(const he::PublicKey& pk, const FixedPointCodec& codec,
                              std::span<const double> values, he::RandomSource& rng);

// Decodes with `scale_power` factors of the codec scale stripped.
std::vector<double> DecryptVector(const he::SecretKey& sk,
                                  const FixedPointCodec& codec,
                                  const EncryptedVector& values, int scale_power);

// Scale factors carried by the output of EncryptedAggregate.
inline constexpr int kAggregateScalePower = 3;

// Element-wise homomorphic sum of all updates followed by one scalar
// multiplication with 1 / m encoded at scale^2, m = updates.size(). The
// result carries scale^3, so the reciprocal's rounding stays below the codec
// resolution. Throws ProtocolError on empty input, length or key mismatch.
EncryptedVector EncryptedAggregate(const he::PublicKey& pk,
                                   const FixedPointCodec& codec,
                                   std::span<const EncryptedVector* const> updates);

// Running fold M = (u (+) M) (x) Encode(1 / divisor) over the updates in
// order, each update lifted to the accumulator's scale first. The result
// carries scale^(m + 1) and weights update k by divisor^-(m - k + 1).
// Throws EncodingError when scale^(m + 1) no longer fits the modulus.
EncryptedVector EncryptedLiteralFold(const he::PublicKey& pk,
                                     const FixedPointCodec& codec,
                                     std::span<const EncryptedVector* const> updates,
                                     std::size_t divisor);

std::vector<double> PlainMean(std::span<const std::vector<double>* const> updates);
std::vector<double> PlainLiteralFold(std::span<const std::vector<double>* const> updates,
                                     std::size_t divisor);

// (1 - alpha) * global + alpha * local, 0 < alpha <= 1.
std::vector<double> AflMerge(std::span<const double> global,
                             std::span<const double> local, double alpha);

// ceil(clients / 2).
std::size_t DefaultFedBuffCapacity(std::size_t clients);

enum class AggregationRule {
  kMean,         // sum, then scale once by 1/m
  kLiteralFold,  // running fold, for studying the unnormalized variant
};

// A model in transit: plaintext when HE is off, otherwise ciphertexts with the
// number of fixed-point scale factors they carry.
struct SealedModel {
  std::vector<double> plain;
  EncryptedVector cipher;
  int scale_power = 1;

  bool encrypted() const { return !cipher.empty(); }
  std::size_t size() const { return encrypted() ? cipher.size() : plain.size(); }
};

// Everything that touches model parameters on their way between clients and
// the server. With HE on, the key pair stands in for the key authority:
// clients seal with the public key and open with the secret key, the server
// only ever combines ciphertexts.
class ModelChannel {
 public:
  static ModelChannel Plaintext(AggregationRule rule = AggregationRule::kMean);
  static ModelChannel Encrypted(he::KeyPair keys,
                                std::int64_t scale = kDefaultFixedPointScale,
                                AggregationRule rule = AggregationRule::kMean);

  bool encrypted() const { return keys_.has_value(); }
  AggregationRule rule() const { return rule_; }
  const he::KeyPair* keys() const { return keys_ ? &*keys_ : nullptr; }
  const FixedPointCodec* codec() const { return codec_ ? &*codec_ : nullptr; }

  SealedModel Seal(std::span<const double> params, std::uint64_t seed) const;

  // Throws NumericError if the recovered model has NaN/Inf entries.
  std::vector<double> Open(const SealedModel& model) const;

  // `literal_divisor` is only read by kLiteralFold.
  SealedModel Aggregate(std::span<const SealedModel* const> updates,
                        std::size_t literal_divisor) const;

  // AFL merge: opens global and local on the client side, mixes in plaintext
  // and reseals the result.
  SealedModel Mix(const SealedModel& global, const SealedModel& local,
                  double alpha, std::uint64_t seed) const;

 private:
  ModelChannel(std::optional<he::KeyPair> keys, std::optional<FixedPointCodec> codec,
               AggregationRule rule);

  std::optional<he::KeyPair> keys_;
  std::optional<FixedPointCodec> codec_;
  AggregationRule rule_;
};

struct Arrival {
  ClientId client_id = 0;
  double arrival_time_ms = 0.0;
  double training_time_ms = 0.0;
  int round_index = 0;
  SealedModel payload;
};

struct AggregationEvent {
  double time_ms = 0.0;  // arrival time of the update that triggered it
  std::vector<ClientId> contributors;
  SealedModel global;
};

struct RoundOutcome {
  std::vector<AggregationEvent> aggregations;
  double duration_ms = 0.0;
  std::vector<ClientId> participants;  // ascending
};

struct StrategyOptions {
  std::size_t fedbuff_capacity = 0;  // 0 -> DefaultFedBuffCapacity
  double afl_alpha = 0.5;
};

// Server-side state machine for one strategy. Owned by the simulator's event
// loop; not thread-safe.
class StrategyState {
 public:
  StrategyState(Strategy strategy, std::size_t client_count, StrategyOptions options);

  Strategy strategy() const { return strategy_; }
  std::size_t client_count() const { return client_count_; }
  std::size_t fedbuff_capacity() const { return fedbuff_capacity_; }
  double afl_alpha() const { return afl_alpha_; }
  int rounds_completed() const { return rounds_completed_; }
  std::size_t buffered() const { return buffer_.size(); }
  // Fixed once BFL finishes round 1.
  const std::optional<SelectionResult>& selection() const { return selection_; }

  // Clients that train in synchronous round `round` (1-based): everybody for
  // SFL and BFL round 1, the selected set for later BFL rounds, everybody for
  // the asynchronous strategies.
  std::vector<ClientId> RoundParticipants(int round) const;

  // Buffers one update; when the buffer holds `fedbuff_capacity` updates
  // they are aggregated and the buffer is cleared.
  std::optional<AggregationEvent> FedBuffStep(const ModelChannel& channel,
                                              Arrival arrival);

  AggregationEvent AflStep(const ModelChannel& channel, const SealedModel& global,
                           const Arrival& arrival, std::uint64_t seed) const;

  // Consumes arrivals in (time, client id) order.
  //  SFL: needs every client; one aggregate, duration = max training time.
  //  BFL: round 1 needs every client and fixes the selection; later rounds
  //       need exactly the selected clients and average over them.
  //  AFL: one merge per arrival.   FedBuff: per FedBuffStep.
  // Throws ProtocolError on empty, duplicate or unexpected arrivals.
  RoundOutcome RunRound(const ModelChannel& channel, const SealedModel& global,
                        std::vector<Arrival> arrivals, std::uint64_t seed);

 private:
  Strategy strategy_;
  std::size_t client_count_;
  std::size_t fedbuff_capacity_;
  double afl_alpha_;
  int rounds_completed_ = 0;
  std::optional<SelectionResult> selection_;
  std::vector<Arrival> buffer_;
};

}  // namespace flsim

#endif  // FLSIM_PROTOCOL_H_

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

// Acceptance checks. Prints one PASS/FAIL line per criterion; `--criterion N`
// runs a single one. Exit status is nonzero when any selected check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "commands.h"
#include "config.h"
#include "flsim/fixed_point.h"
#include "flsim/mlp.h"
#include "flsim/paillier.h"
#include "flsim/protocol.h"
#include "flsim/simulator.h"
#include "oracles.h"

namespace flsim::testing {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double SecondsSince(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string Fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path BundledConfig() { return fs::path(FLSIM_CONFIG_DIR) / "paper_scenario_bfl.toml"; }

cli::LoadedConfig PaperScenario() { return cli::LoadConfig(BundledConfig()); }

// Training time the simulator assigns to a client under the model cost.
double ModelTrainingTime(const ClientProfile& p, std::size_t rows, const Architecture& arch,
                         const CostModel& cost) {
  const double compute_ms = static_cast<double>(p.hyper.local_epochs) *
                            static_cast<double>(rows) *
                            static_cast<double>(arch.ParameterCount()) *
                            cost.compute_ns_per_sample_param * 1e-6;
  return ClientTrainingTime(p, compute_ms);
}

Outcome Criterion1() {
  const auto start = Clock::now();
  const cli::LoadedConfig cfg = PaperScenario();
  const ExperimentConfig& x = cfg.experiment;
  const PreparedData data = PrepareData(x);

  const auto enum_start = Clock::now();
  std::vector<ClientProfile> profiles = x.clients;
  int draws = 0;
  int exact = 0;
  std::string first_counter;
  for (int a = 1; a <= 3; ++a)
    for (int b = 1; b <= 3; ++b)
      for (int c = 1; c <= 3; ++c)
        for (int d = 5; d <= 10; ++d)
          for (int e = 5; e <= 10; ++e) {
            const int delays[5] = {a, b, c, d, e};
            std::vector<ClientTiming> timings;
            for (int k = 0; k < 5; ++k) {
              profiles[k].speed_delay_s = delays[k];
              timings.push_back(
                  {k, ModelTrainingTime(profiles[k], data.shards[k].size(), x.arch, x.cost)});
            }
            const SelectionResult sel = SelectClients(timings);
            ++draws;
            if (sel.selected == std::vector<ClientId>{0, 1, 2}) {
              ++exact;
            } else if (first_counter.empty()) {
              std::ostringstream s;
              s << "delays " << a << "," << b << "," << c << "," << d << "," << e
                << " s -> " << sel.selected.size() << " selected, t_wavg "
                << Fmt("%.3f", sel.t_wavg_ms / 1000.0) << " s";
              first_counter = s.str();
            }
          }
  const double enum_secs = SecondsSince(enum_start);

  ExperimentConfig run = x;
  run.rounds = 2;
  const MetricsLog log = RunExperiment(run, data);
  const bool seeded_ok =
      log.selection && log.selection->selected == std::vector<ClientId>{0, 1, 2};
  const double secs = SecondsSince(start);

  std::ostringstream s;
  s << "exactly the 3 fast clients selected in " << exact << "/" << draws
    << " delay draws; seeded scenario " << (seeded_ok ? "selects {0,1,2}" : "does not")
    << "; selection " << Fmt("%.3f", enum_secs) << " s (< 1), total " << Fmt("%.2f", secs)
    << " s";
  if (!first_counter.empty()) s << "; counterexample: " << first_counter;
  return {exact == draws && seeded_ok && enum_secs < 1.0, s.str()};
}

Outcome Criterion2() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20260101);
  std::uniform_int_distribution<int> len(2, 50);
  std::uniform_real_distribution<double> mag(-3.0, 4.0);
  double worst = 0.0;
  int invariant_failures = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> t(static_cast<std::size_t>(len(rng)));
    for (double& v : t) v = std::pow(10.0, mag(rng));
    const double got = WeightedAverageTime(t);
    worst = std::max(worst, RelativeError(got, OracleWeightedAverageTime(t), 1e-300));

    const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
    if (got < *lo || got > *hi) ++invariant_failures;

    std::vector<ClientTiming> timings;
    for (std::size_t i = 0; i < t.size(); ++i) {
      timings.push_back({static_cast<ClientId>(i), t[i]});
    }
    const SelectionResult sel = SelectClients(timings);
    const ClientId fastest = static_cast<ClientId>(lo - t.begin());
    if (!sel.Contains(fastest)) ++invariant_failures;
    for (std::size_t i = 0; i < t.size(); ++i) {
      for (std::size_t j = 0; j < t.size(); ++j) {
        if (sel.Contains(static_cast<ClientId>(j)) && t[i] <= t[j] &&
            !sel.Contains(static_cast<ClientId>(i))) {
          ++invariant_failures;
        }
      }
    }

    const double c = std::pow(10.0, mag(rng) / 2.0);
    std::vector<double> scaled = t;
    for (double& v : scaled) v *= c;
    if (RelativeError(WeightedAverageTime(scaled), c * got, 1e-300) > 1e-9) {
      ++invariant_failures;
    }
  }
  const double secs = SecondsSince(start);
  std::ostringstream s;
  s << "10000 vectors, max relative error " << Fmt("%.3g", worst) << " (<= 1e-9), "
    << invariant_failures << " invariant violations, " << Fmt("%.2f", secs) << " s (< 10)";
  return {worst <= 1e-9 && invariant_failures == 0 && secs < 10.0, s.str()};
}

Outcome Criterion3() {
  const auto start = Clock::now();
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> clients(1, 5);
  std::uniform_int_distribution<int> len(1, 50);
  std::uniform_real_distribution<double> value(-10.0, 10.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const he::KeyPair keys = he::KeyGen(512, 1000 + trial);
    const FixedPointCodec codec(keys.public_key.n());
    he::RandomSource enc_rng = he::RandomSource::Seeded(2000 + trial);
    const int m = clients(rng);
    const std::size_t d = static_cast<std::size_t>(len(rng));
    std::vector<std::vector<double>> plain(m, std::vector<double>(d));
    std::vector<EncryptedVector> cipher;
    for (auto& u : plain) {
      for (double& v : u) v = value(rng);
      cipher.push_back(EncryptVector(keys.public_key, codec, u, enc_rng));
    }
    std::vector<const EncryptedVector*> cptr;
    for (int k = 0; k < m; ++k) {
      cptr.push_back(&cipher[k]);
    }
    const auto got = DecryptVector(keys.secret_key, codec,
                                   EncryptedAggregate(keys.public_key, codec, cptr),
                                   kAggregateScalePower);
    for (std::size_t i = 0; i < d; ++i) {
      long double mean = 0.0L;
      for (int k = 0; k < m; ++k) mean += plain[k][i];
      mean /= m;
      worst = std::max(worst, static_cast<double>(std::fabs(got[i] - mean)));
    }
  }
  const double secs = SecondsSince(start);
  const double tol = 2.0 / static_cast<double>(kDefaultFixedPointScale);
  std::ostringstream s;
  s << "100 trials, 512-bit keys, max |error| " << Fmt("%.3g", worst) << " (<= 2e-6), "
    << Fmt("%.2f", secs) << " s (< 60)";
  return {worst <= tol && secs < 60.0, s.str()};
}

Outcome Criterion4() {
  const he::KeyPair keys = he::KeyGen(256, 44);
  const mpz_class& n = keys.public_key.n();
  he::RandomSource rng = he::RandomSource::Seeded(45);
  int add_bad = 0;
  int mul_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const mpz_class a = rng.Below(n);
    const mpz_class b = rng.Below(n);
    const mpz_class sum =
        he::Decrypt(keys.secret_key, he::Add(keys.public_key, he::Encrypt(keys.public_key, a, rng),
                                      he::Encrypt(keys.public_key, b, rng)));
    mpz_class expected = (a + b) % n;
    if (sum != expected) ++add_bad;

    const mpz_class k = rng.Below(n);
    const mpz_class prod =
        he::Decrypt(keys.secret_key, he::ScalarMul(keys.public_key, he::Encrypt(keys.public_key, a, rng), k));
    expected = (a * k) % n;
    if (prod != expected) ++mul_bad;
  }
  std::set<std::string> seen;
  const mpz_class m = rng.Below(n);
  for (int i = 0; i < 100; ++i) {
    seen.insert(he::CiphertextToString(he::Encrypt(keys.public_key, m, rng)));
  }
  std::ostringstream s;
  s << "add mismatches " << add_bad << "/1000, scalar-mul mismatches " << mul_bad
    << "/1000, distinct ciphertexts " << seen.size() << "/100";
  return {add_bad == 0 && mul_bad == 0 && seen.size() == 100, s.str()};
}

Outcome Criterion5() {
  const Architecture arch{{4, 5, 3}};
  const ModelParams params = InitModel(arch, 17);
  std::mt19937_64 rng(18);
  std::normal_distribution<double> x(0.0, 1.0);
  Matrix batch(6, 4);
  for (Eigen::Index r = 0; r < batch.rows(); ++r)
    for (Eigen::Index c = 0; c < batch.cols(); ++c) batch(r, c) = x(rng);
  const std::vector<int> labels = {0, 1, 2, 2, 1, 0};
  const auto analytic = FlattenLayers(ComputeLossAndGradient(params, batch, labels).gradient);
  const auto numeric = FiniteDifferenceGradient(params, batch, labels, 1e-5);
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, RelativeError(analytic[i], numeric[i]));
  }
  std::ostringstream s;
  s << arch.ParameterCount() << " parameters, max relative error " << Fmt("%.3g", worst)
    << " (<= 1e-4)";
  return {arch.ParameterCount() <= 50 && worst <= 1e-4, s.str()};
}

std::vector<double> RoundDurations(const MetricsLog& log) {
  std::vector<double> out;
  double prev = 0.0;
  for (const RoundRecord& r : log.rounds) {
    out.push_back(r.sim_time_ms - prev);
    prev = r.sim_time_ms;
  }
  return out;
}

Outcome Criterion6() {
  const auto start = Clock::now();
  cli::LoadedConfig cfg = PaperScenario();
  ExperimentConfig base = cfg.experiment;
  base.rounds = 60;
  base.target.stop_at_target = true;
  const PreparedData data = PrepareData(base);
  const double target = CentralizedAccuracy(base, data) - base.target.margin;
  base.target.from_centralized = false;
  base.target.accuracy = target;

  ExperimentConfig sfl_cfg = base;
  sfl_cfg.strategy = Strategy::kSfl;
  ExperimentConfig bfl_cfg = base;
  bfl_cfg.strategy = Strategy::kBfl;
  const MetricsLog sfl = RunExperiment(sfl_cfg, data);
  const MetricsLog bfl = RunExperiment(bfl_cfg, data);

  const auto sd = RoundDurations(sfl);
  const auto bd = RoundDurations(bfl);
  const double sfl_min = *std::min_element(sd.begin(), sd.end());
  double bfl_max = 0.0;
  for (std::size_t i = 1; i < bd.size(); ++i) bfl_max = std::max(bfl_max, bd[i]);
  const bool per_round = bd.size() >= 2 && bfl_max < sfl_min;
  const bool faster = sfl.time_to_target_ms && bfl.time_to_target_ms &&
                      *bfl.time_to_target_ms < *sfl.time_to_target_ms;
  const double secs = SecondsSince(start);

  auto ttt = [](const MetricsLog& l) {
    if (!l.time_to_target_ms) return std::string("not reached");
    return Fmt("%.0f ms", *l.time_to_target_ms) + " (round " +
           std::to_string(*l.convergence_round) + ")";
  };
  std::ostringstream s;
  s << "target " << Fmt("%.4f", target) << "; BFL round>=2 max " << Fmt("%.0f", bfl_max)
    << " ms vs SFL min " << Fmt("%.0f", sfl_min) << " ms (" << (per_round ? "ok" : "violated")
    << "); time-to-target BFL " << ttt(bfl) << " vs SFL " << ttt(sfl) << "; "
    << Fmt("%.1f", secs) << " s";
  return {per_round && faster && secs < 120.0, s.str()};
}

Outcome Criterion7() {
  int ok = 0;
  int runs = 0;
  std::string bad;
  for (std::uint64_t seed : {42u, 1u, 2u, 3u, 4u, 5u, 6u, 7u, 8u, 9u}) {
    cli::LoadedConfig cfg = PaperScenario();
    cli::Overrides o;
    o.seed = seed;
    o.strategy = Strategy::kFedBuff;
    cli::ApplyOverrides(cfg, o);
    cfg.experiment.rounds = 2;
    cfg.experiment.strategy_options.fedbuff_capacity = 2;
    const MetricsLog log = RunExperiment(cfg.experiment);
    const auto contributors = log.AggregationContributors();
    ++runs;
    const bool fast_only =
        !contributors.empty() && contributors[0].size() == 2 &&
        std::all_of(contributors[0].begin(), contributors[0].end(),
                    [](ClientId id) { return id >= 0 && id <= 2; });
    if (fast_only) {
      ++ok;
    } else if (bad.empty()) {
      bad = "seed " + std::to_string(seed);
    }
  }
  std::ostringstream s;
  s << "K=2 first buffer holds only fast clients in " << ok << "/" << runs << " seeds";
  if (!bad.empty()) s << "; first violation " << bad;
  return {ok == runs, s.str()};
}

Outcome Criterion8() {
  cli::LoadedConfig cfg = PaperScenario();
  ExperimentConfig base = cfg.experiment;
  base.horizon_ms = 60000.0;
  base.rounds = 100000;
  base.target = TargetSettings{};
  const PreparedData data = PrepareData(base);
  std::size_t counts[3];
  const Strategy order[3] = {Strategy::kAfl, Strategy::kSfl, Strategy::kBfl};
  for (int i = 0; i < 3; ++i) {
    ExperimentConfig x = base;
    x.strategy = order[i];
    counts[i] = RunExperiment(x, data).AggregationCount();
  }
  std::ostringstream s;
  s << "aggregations within 60 s simulated: AFL " << counts[0] << ", SFL " << counts[1]
    << ", BFL " << counts[2];
  return {counts[0] > counts[1] && counts[0] > counts[2], s.str()};
}

Outcome Criterion9() {
  const fs::path dir = fs::temp_directory_path() / "flsim_acceptance_9";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::string outputs[2];
  int codes[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path csv = dir / ("run" + std::to_string(i) + ".csv");
    std::ostringstream out, err;
    codes[i] = cli::RunCli({"run", "--config", BundledConfig().string(), "--out", csv.string()},
                           out, err);
    std::ifstream in(csv, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    outputs[i] = buf.str();
  }
  fs::remove_all(dir);
  const bool same = codes[0] == 0 && codes[1] == 0 && !outputs[0].empty() &&
                    outputs[0] == outputs[1];
  std::ostringstream s;
  s << "two runs exit " << codes[0] << "/" << codes[1] << ", CSVs of " << outputs[0].size()
    << " bytes " << (outputs[0] == outputs[1] ? "identical" : "differ");
  return {same, s.str()};
}

Outcome Criterion10() {
  cli::LoadedConfig cfg = PaperScenario();
  ExperimentConfig base = cfg.experiment;
  base.rounds = 100;
  base.target.stop_at_target = true;
  base.clients = UniformProfiles(2, 1.0, cfg.hyper);
  const PreparedData probe = PrepareData(base);
  const double target = CentralizedAccuracy(base, probe) - base.target.margin;
  base.target.from_centralized = false;
  base.target.accuracy = target;

  std::vector<double> times;
  std::ostringstream s;
  s << "target " << Fmt("%.4f", target) << "; BFL time-to-target";
  bool ok = true;
  for (std::size_t n : {2u, 5u, 10u}) {
    ExperimentConfig x = base;
    x.strategy = Strategy::kBfl;
    x.clients = UniformProfiles(n, 1.0, cfg.hyper);
    const MetricsLog log = RunExperiment(x);
    if (!log.time_to_target_ms) {
      s << " N=" << n << ": not reached";
      ok = false;
      continue;
    }
    s << " N=" << n << ": " << Fmt("%.0f ms", *log.time_to_target_ms) << " (round "
      << *log.convergence_round << ")";
    if (!times.empty() && *log.time_to_target_ms < times.back()) ok = false;
    times.push_back(*log.time_to_target_ms);
  }
  return {ok, s.str()};
}

const std::vector<std::function<Outcome()>>& Criteria() {
  static const std::vector<std::function<Outcome()>> all = {
      Criterion1, Criterion2, Criterion3, Criterion4, Criterion5,
      Criterion6, Criterion7, Criterion8, Criterion9, Criterion10};
  return all;
}

}  // namespace
}  // namespace flsim::testing

int main(int argc, char** argv) {
  using flsim::testing::Criteria;
  flsim::cli::ConfigureLogging();
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: flsim_acceptance [--criterion N]\n";
      return 2;
    }
  }
  const int count = static_cast<int>(Criteria().size());
  if (only < 0 || only > count) {
    std::cerr << "criterion must be in 1.." << count << "\n";
    return 2;
  }
  int failures = 0;
  for (int n = 1; n <= count; ++n) {
    if (only != 0 && n != only) continue;
    flsim::testing::Outcome r;
    try {
      r = Criteria()[n - 1]();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << n << ": " << r.detail << std::endl;
    if (!r.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}

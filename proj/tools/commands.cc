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

#include "commands.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "config.h"
#include "flsim/dataset.h"
#include "flsim/error.h"
#include "flsim/paillier.h"
#include "flsim/simulator.h"

namespace flsim::cli {

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> strategy;
  std::optional<std::string> out;
  bool no_he = false;
};

void AddCommonFlags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "Experiment TOML file")->required();
  cmd->add_option("--seed", flags.seed, "Master seed (overrides the file)");
  cmd->add_option("--strategy", flags.strategy, "sfl, afl, fedbuff or bfl");
  cmd->add_option("--out", flags.out, "Metrics CSV path, '-' for stdout");
  cmd->add_flag("--no-he", flags.no_he, "Aggregate in plaintext");
}

LoadedConfig Load(const CommonFlags& flags) {
  LoadedConfig cfg = LoadConfig(flags.config);
  Overrides o;
  o.seed = flags.seed;
  if (flags.strategy) o.strategy = ParseStrategy(*flags.strategy);
  if (flags.out) o.out = *flags.out;
  o.no_he = flags.no_he;
  ApplyOverrides(cfg, o);
  return cfg;
}

std::ofstream OpenForWrite(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  return f;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream f = OpenForWrite(path);
  f << text;
  if (!f.flush()) throw IoError("write failed for '" + path.string() + "'");
}

bool IsStdout(const fs::path& p) { return p == "-"; }

fs::path SummaryPath(const OutputPaths& output, std::string_view suffix) {
  if (!output.summary.empty()) return output.summary;
  fs::path p = output.csv;
  p.replace_extension();
  return p.string() + std::string(suffix);
}

// Writes to `out` when the path is "-", to the file otherwise.
template <typename Fn>
void Emit(const fs::path& path, std::ostream& out, Fn&& write) {
  if (IsStdout(path)) {
    write(out);
    out.flush();
    return;
  }
  std::ofstream f = OpenForWrite(path);
  write(f);
  if (!f.flush()) throw IoError("write failed for '" + path.string() + "'");
}

int Keygen(unsigned bits, const std::string& prefix, std::optional<std::uint64_t> seed,
           std::ostream& out) {
  const he::KeyPair keys = seed ? he::KeyGen(bits, *seed) : [&] {
    he::RandomSource rng = he::RandomSource::FromEntropy();
    return he::KeyGen(bits, rng);
  }();
  const fs::path pub = prefix + ".pub.json";
  const fs::path sec = prefix + ".sec.json";
  WriteText(pub, he::PublicKeyToJson(keys.public_key) + "\n");
  WriteText(sec, he::SecretKeyToJson(keys.secret_key) + "\n");
  out << pub.string() << "\n" << sec.string() << "\n";
  return kExitOk;
}

int Run(const CommonFlags& flags, std::ostream& out) {
  const LoadedConfig cfg = Load(flags);
  const MetricsLog log = RunExperiment(cfg.experiment);
  Emit(cfg.output.csv, out, [&](std::ostream& os) { WriteMetricsCsv(log, os); });
  if (!IsStdout(cfg.output.csv) || !cfg.output.summary.empty()) {
    const fs::path summary = SummaryPath(cfg.output, ".summary.json");
    if (!IsStdout(summary)) WriteText(summary, SummaryJson(log) + "\n");
  }
  if (!cfg.output.events.empty()) {
    Emit(cfg.output.events, out, [&](std::ostream& os) { WriteEventsCsv(log, os); });
  }
  return kExitOk;
}

std::string Optional(const std::optional<double>& v, int digits) {
  if (!v) return "";
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << *v;
  return s.str();
}

std::string Optional(const std::optional<int>& v) { return v ? std::to_string(*v) : ""; }

int Compare(const CommonFlags& flags, std::ostream& out, std::ostream& err) {
  LoadedConfig cfg = Load(flags);
  ExperimentConfig base = cfg.experiment;
  const PreparedData data = PrepareData(base);
  if (base.target.from_centralized) {
    const double centralized = CentralizedAccuracy(base, data);
    base.target.accuracy = centralized - base.target.margin;
    base.target.from_centralized = false;
    spdlog::info("centralized validation accuracy {:.4f}", centralized);
  }

  std::vector<MetricsLog> logs;
  ExperimentConfig sfl = base;
  sfl.strategy = Strategy::kSfl;
  logs.push_back(RunExperiment(sfl, data));
  // Asynchronous strategies have no notion of a round count; they get the
  // same simulated time budget SFL needed.
  const double horizon =
      base.horizon_ms > 0 ? base.horizon_ms : logs.front().total_sim_time_ms;
  for (Strategy s : {Strategy::kAfl, Strategy::kFedBuff, Strategy::kBfl}) {
    ExperimentConfig x = base;
    x.strategy = s;
    if (s != Strategy::kBfl) {
      x.rounds = cfg.compare.async_max_events;
      x.horizon_ms = horizon;
    }
    logs.push_back(RunExperiment(x, data));
  }

  Emit(cfg.output.csv, out, [&](std::ostream& os) {
    os << "strategy,round,sim_time_ms,val_accuracy,participants\n";
    for (const MetricsLog& log : logs) {
      std::ostringstream rows;
      WriteMetricsCsv(log, rows);
      std::istringstream in(rows.str());
      std::string line;
      std::getline(in, line);  // header
      while (std::getline(in, line)) os << StrategyName(log.strategy) << "," << line << "\n";
    }
  });

  std::ostringstream summary;
  summary << "strategy,aggregations,convergence_round,time_to_target_ms,"
             "final_val_accuracy,final_test_accuracy,total_sim_time_ms\n";
  for (const MetricsLog& log : logs) {
    summary << StrategyName(log.strategy) << "," << log.AggregationCount() << ","
            << Optional(log.convergence_round) << ","
            << Optional(log.time_to_target_ms, 3) << ","
            << Optional(std::optional<double>(log.final_val_accuracy), 6) << ","
            << Optional(std::optional<double>(log.final_test_accuracy), 6) << ","
            << Optional(std::optional<double>(log.total_sim_time_ms), 3) << "\n";
  }
  if (!IsStdout(cfg.output.csv) || !cfg.output.summary.empty()) {
    const fs::path path = SummaryPath(cfg.output, ".summary.csv");
    if (!IsStdout(path)) WriteText(path, summary.str());
  }

  std::ostream& table = IsStdout(cfg.output.csv) ? err : out;
  table << std::left << std::setw(9) << "strategy" << std::right << std::setw(6) << "aggs"
        << std::setw(11) << "conv_round" << std::setw(16) << "time_to_target" << std::setw(10)
        << "val_acc" << std::setw(10) << "test_acc" << std::setw(14) << "sim_time_ms"
        << "\n";
  for (const MetricsLog& log : logs) {
    table << std::left << std::setw(9) << StrategyName(log.strategy) << std::right
          << std::setw(6) << log.AggregationCount() << std::setw(11)
          << (log.convergence_round ? std::to_string(*log.convergence_round) : "-")
          << std::setw(16)
          << (log.time_to_target_ms ? Optional(log.time_to_target_ms, 1) : "-")
          << std::setw(10) << Optional(std::optional<double>(log.final_val_accuracy), 4)
          << std::setw(10) << Optional(std::optional<double>(log.final_test_accuracy), 4)
          << std::setw(14) << Optional(std::optional<double>(log.total_sim_time_ms), 1)
          << "\n";
  }
  return kExitOk;
}

int Synth(const std::string& preset, std::size_t samples, std::uint64_t seed,
          const std::string& out_path, std::ostream& out) {
  const Dataset data = SynthGenerate(SynthSpec::FromPreset(preset), samples, seed);
  if (out_path == "-") {
    WriteCsv(data, out);
  } else {
    SaveCsv(data, out_path);
  }
  return kExitOk;
}

}  // namespace

void ConfigureLogging() {
  auto logger = std::make_shared<spdlog::logger>(
      "flsim", std::make_shared<spdlog::sinks::stderr_sink_mt>());
  logger->set_pattern("[%l] %v");
  const char* env = std::getenv("FLSIM_LOG");
  logger->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
  spdlog::set_default_logger(std::move(logger));
}

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated learning strategy simulator with Paillier aggregation", "flsim"};
  app.require_subcommand(1);

  unsigned bits = he::kDefaultKeyBits;
  std::string key_prefix;
  std::optional<std::uint64_t> key_seed;
  CLI::App* keygen = app.add_subcommand("keygen", "Write a Paillier key pair as JSON");
  keygen->add_option("--bits", bits, "Modulus size in bits");
  keygen->add_option("--out", key_prefix, "Writes PREFIX.pub.json and PREFIX.sec.json")
      ->required();
  keygen->add_option("--seed", key_seed, "Deterministic key generation");

  CommonFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "Run one experiment");
  AddCommonFlags(run, run_flags);

  CommonFlags compare_flags;
  CLI::App* compare =
      app.add_subcommand("compare", "Run sfl, afl, fedbuff and bfl on identical data");
  AddCommonFlags(compare, compare_flags);

  std::string preset = "gas-like";
  std::size_t samples = 1000;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic dataset as CSV");
  synth->add_option("--preset", preset, "gas-like or wustl-like");
  synth->add_option("--samples", samples, "Row count");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--out", synth_out, "CSV path, '-' for stdout")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "flsim: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (keygen->parsed()) return Keygen(bits, key_prefix, key_seed, out);
    if (run->parsed()) return Run(run_flags, out);
    if (compare->parsed()) return Compare(compare_flags, out, err);
    if (synth->parsed()) return Synth(preset, samples, synth_seed, synth_out, out);
  } catch (const ConfigError& e) {
    err << "flsim: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "flsim: numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "flsim: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace flsim::cli

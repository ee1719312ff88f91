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

#include "config.h"

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#define TOML_EXCEPTIONS 1
#include "toml.hpp"

#include "flsim/error.h"

namespace flsim::cli {

namespace {

// One TOML table plus the keys read from it, so leftovers can be reported.
class Section {
 public:
  Section(const toml::table* table, std::string name)
      : table_(table), name_(std::move(name)) {}

  std::string Key(std::string_view key) const {
    return name_.empty() ? std::string(key) : name_ + "." + std::string(key);
  }

  const toml::node* Find(std::string_view key) {
    used_.insert(std::string(key));
    return table_ ? table_->get(key) : nullptr;
  }

  template <typename T>
  std::optional<T> Get(std::string_view key, const char* type_name) {
    const toml::node* node = Find(key);
    if (!node) return std::nullopt;
    if constexpr (std::is_same_v<T, double>) {
      if (!node->is_number()) throw ConfigError(Key(key) + ": expected a number");
    } else if constexpr (std::is_same_v<T, std::int64_t>) {
      if (!node->is_integer()) throw ConfigError(Key(key) + ": expected an integer");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!node->is_boolean()) throw ConfigError(Key(key) + ": expected true or false");
    } else {
      if (!node->is_string()) throw ConfigError(Key(key) + ": expected a string");
    }
    std::optional<T> v = node->value<T>();
    if (!v) throw ConfigError(Key(key) + ": expected " + type_name);
    return v;
  }

  std::optional<double> Number(std::string_view key) { return Get<double>(key, "a number"); }
  std::optional<std::int64_t> Integer(std::string_view key) {
    return Get<std::int64_t>(key, "an integer");
  }
  std::optional<std::int64_t> NonNegative(std::string_view key) {
    auto v = Integer(key);
    if (v && *v < 0) throw ConfigError(Key(key) + ": must be >= 0");
    return v;
  }
  std::optional<bool> Bool(std::string_view key) { return Get<bool>(key, "a boolean"); }
  std::optional<std::string> String(std::string_view key) {
    return Get<std::string>(key, "a string");
  }

  std::optional<std::vector<double>> Numbers(std::string_view key) {
    const toml::node* node = Find(key);
    if (!node) return std::nullopt;
    const toml::array* arr = node->as_array();
    if (!arr) throw ConfigError(Key(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (const toml::node& item : *arr) {
      std::optional<double> v = item.is_number() ? item.value<double>() : std::nullopt;
      if (!v) throw ConfigError(Key(key) + ": expected an array of numbers");
      out.push_back(*v);
    }
    return out;
  }

  std::optional<std::vector<std::size_t>> Sizes(std::string_view key) {
    const toml::node* node = Find(key);
    if (!node) return std::nullopt;
    const toml::array* arr = node->as_array();
    if (!arr) throw ConfigError(Key(key) + ": expected an array of integers");
    std::vector<std::size_t> out;
    for (const toml::node& item : *arr) {
      std::optional<std::int64_t> v = item.is_integer() ? item.value<std::int64_t>() : std::nullopt;
      if (!v || *v <= 0) throw ConfigError(Key(key) + ": expected positive integers");
      out.push_back(static_cast<std::size_t>(*v));
    }
    return out;
  }

  // Throws on keys nobody asked for.
  void Finish() const {
    if (!table_) return;
    for (const auto& [key, node] : *table_) {
      if (!used_.count(std::string(key.str()))) {
        throw ConfigError(Key(key.str()) + ": unknown key");
      }
    }
  }

 private:
  const toml::table* table_;
  std::string name_;
  std::set<std::string> used_;
};

const toml::table* SubTable(const toml::table& root, std::string_view name) {
  const toml::node* node = root.get(name);
  if (!node) return nullptr;
  const toml::table* t = node->as_table();
  if (!t) throw ConfigError(std::string(name) + ": expected a table");
  return t;
}

}  // namespace

std::vector<ClientProfile> BuildProfiles(const ClientScenario& scenario,
                                         std::uint64_t seed, const HyperParams& hyper) {
  switch (scenario.kind) {
    case ClientScenario::Kind::kPaper:
      return PaperScenarioProfiles(seed, hyper);
    case ClientScenario::Kind::kUniform:
      return UniformProfiles(scenario.count, scenario.delay_s, hyper);
    case ClientScenario::Kind::kCustom: {
      std::vector<ClientProfile> profiles;
      for (std::size_t i = 0; i < scenario.delays_s.size(); ++i) {
        profiles.push_back(ClientProfile{static_cast<ClientId>(i), scenario.delays_s[i],
                                         scenario.fractions[i], hyper});
      }
      return profiles;
    }
  }
  return {};
}

LoadedConfig ParseConfig(std::string_view toml_text, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: TOML syntax error at line " << e.source().begin.line << ": "
        << e.description();
    throw ConfigError(msg.str());
  }

  static const std::set<std::string> kSections = {
      "experiment", "target", "data", "model", "he", "strategy",
      "clients",    "cost",   "output", "compare"};
  for (const auto& [key, node] : root) {
    if (!kSections.count(std::string(key.str()))) {
      throw ConfigError(std::string(key.str()) + ": unknown section");
    }
  }

  LoadedConfig cfg;
  ExperimentConfig& x = cfg.experiment;

  Section experiment(SubTable(root, "experiment"), "experiment");
  if (auto s = experiment.String("strategy")) x.strategy = ParseStrategy(*s);
  if (auto v = experiment.Integer("rounds")) {
    if (*v < 1) throw ConfigError("experiment.rounds: must be >= 1");
    x.rounds = static_cast<int>(*v);
  }
  auto seed = experiment.NonNegative("seed");
  if (!seed) throw ConfigError("experiment.seed: required (runs never use implicit entropy)");
  x.seed = static_cast<std::uint64_t>(*seed);
  if (auto v = experiment.Number("horizon_ms")) x.horizon_ms = *v;
  experiment.Finish();

  Section target(SubTable(root, "target"), "target");
  if (auto v = target.Number("accuracy")) x.target.accuracy = *v;
  if (auto v = target.Bool("from_centralized")) x.target.from_centralized = *v;
  if (auto v = target.Number("margin")) x.target.margin = *v;
  if (auto v = target.NonNegative("centralized_epochs")) {
    x.target.centralized_epochs = static_cast<std::size_t>(*v);
  }
  if (auto v = target.Bool("stop_at_target")) x.target.stop_at_target = *v;
  target.Finish();

  Section data(SubTable(root, "data"), "data");
  if (auto s = data.String("source")) {
    if (*s == "synthetic") {
      x.data.kind = DataSource::Kind::kSynthetic;
    } else if (*s == "csv") {
      x.data.kind = DataSource::Kind::kCsv;
    } else {
      throw ConfigError("data.source: expected synthetic or csv, got '" + *s + "'");
    }
  }
  if (auto s = data.String("preset")) x.data.preset = *s;
  if (auto v = data.NonNegative("samples")) x.data.samples = static_cast<std::size_t>(*v);
  if (auto s = data.String("csv_path")) {
    std::filesystem::path p(*s);
    x.data.csv_path = p.is_absolute() ? p : base_dir / p;
  }
  if (auto s = data.String("label_column")) x.data.label_column = *s;
  if (auto v = data.Integer("class_count")) x.data.class_count = static_cast<int>(*v);
  if (auto v = data.Numbers("split")) {
    if (v->size() != 3) throw ConfigError("data.split: expected [train, validation, test]");
    x.data.split = SplitRatios{(*v)[0], (*v)[1], (*v)[2]};
  }
  data.Finish();

  Section model(SubTable(root, "model"), "model");
  std::string preset = "gas";
  if (auto s = model.String("preset")) preset = *s;
  if (auto dims = model.Sizes("layer_dims")) {
    x.arch = Architecture{*dims};
  } else {
    x.arch = Architecture::FromPreset(preset);
  }
  cfg.hyper = preset == "wustl" ? HyperParams::Wustl() : HyperParams::GasPipeline();
  if (auto v = model.Number("learning_rate")) cfg.hyper.learning_rate = *v;
  if (auto v = model.Number("momentum")) cfg.hyper.momentum = *v;
  if (auto v = model.Integer("batch_size")) {
    if (*v < 1) throw ConfigError("model.batch_size: must be positive");
    cfg.hyper.batch_size = static_cast<std::size_t>(*v);
  }
  if (auto v = model.Integer("local_epochs")) {
    if (*v < 1) throw ConfigError("model.local_epochs: must be positive");
    cfg.hyper.local_epochs = static_cast<std::size_t>(*v);
  }
  model.Finish();
  try {
    x.arch.Validate();
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("model.layer_dims: ") + e.what());
  }

  Section he(SubTable(root, "he"), "he");
  if (auto v = he.Bool("enabled")) x.he.enabled = *v;
  if (auto v = he.NonNegative("key_bits")) x.he.key_bits = static_cast<unsigned>(*v);
  if (auto v = he.Integer("scale")) {
    if (*v <= 0) throw ConfigError("he.scale: must be positive");
    x.he.scale = *v;
  }
  if (auto s = he.String("aggregation")) {
    if (*s == "mean") {
      x.he.rule = AggregationRule::kMean;
    } else if (*s == "literal") {
      x.he.rule = AggregationRule::kLiteralFold;
    } else {
      throw ConfigError("he.aggregation: expected mean or literal, got '" + *s + "'");
    }
  }
  he.Finish();

  Section strategy(SubTable(root, "strategy"), "strategy");
  if (auto v = strategy.NonNegative("fedbuff_k")) {
    x.strategy_options.fedbuff_capacity = static_cast<std::size_t>(*v);
  }
  if (auto v = strategy.Number("afl_alpha")) x.strategy_options.afl_alpha = *v;
  strategy.Finish();

  Section clients(SubTable(root, "clients"), "clients");
  std::string scenario = "paper";
  if (auto s = clients.String("scenario")) scenario = *s;
  if (scenario == "paper") {
    cfg.clients.kind = ClientScenario::Kind::kPaper;
  } else if (scenario == "uniform") {
    cfg.clients.kind = ClientScenario::Kind::kUniform;
    if (auto v = clients.Integer("count")) {
      if (*v < 1) throw ConfigError("clients.count: must be >= 1");
      cfg.clients.count = static_cast<std::size_t>(*v);
    }
    if (auto v = clients.Number("delay_s")) cfg.clients.delay_s = *v;
  } else if (scenario == "custom") {
    cfg.clients.kind = ClientScenario::Kind::kCustom;
    auto delays = clients.Numbers("delays_s");
    auto fractions = clients.Numbers("fractions");
    if (!delays || !fractions) {
      throw ConfigError("clients: custom scenario needs delays_s and fractions");
    }
    if (delays->size() != fractions->size() || delays->empty()) {
      throw ConfigError("clients.fractions: must have one entry per delays_s entry");
    }
    cfg.clients.delays_s = *delays;
    cfg.clients.fractions = *fractions;
  } else {
    throw ConfigError("clients.scenario: expected paper, uniform or custom, got '" +
                      scenario + "'");
  }
  clients.Finish();

  Section cost(SubTable(root, "cost"), "cost");
  if (auto s = cost.String("compute")) {
    if (*s == "model") {
      x.cost.compute = CostModel::ComputeSource::kModel;
    } else if (*s == "wallclock") {
      x.cost.compute = CostModel::ComputeSource::kWallClock;
    } else {
      throw ConfigError("cost.compute: expected model or wallclock, got '" + *s + "'");
    }
  }
  if (auto v = cost.Number("compute_ns_per_sample_param")) x.cost.compute_ns_per_sample_param = *v;
  if (auto v = cost.Number("encrypt_us_per_param")) x.cost.encrypt_us_per_param = *v;
  if (auto v = cost.Number("server_ms_per_update")) x.cost.server_ms_per_update = *v;
  cost.Finish();

  Section output(SubTable(root, "output"), "output");
  if (auto s = output.String("csv")) cfg.output.csv = *s;
  if (auto s = output.String("summary")) cfg.output.summary = *s;
  if (auto s = output.String("events")) cfg.output.events = *s;
  output.Finish();

  Section compare(SubTable(root, "compare"), "compare");
  if (auto v = compare.Integer("async_max_events")) {
    if (*v < 1) throw ConfigError("compare.async_max_events: must be >= 1");
    cfg.compare.async_max_events = static_cast<int>(*v);
  }
  compare.Finish();

  x.clients = BuildProfiles(cfg.clients, x.seed, cfg.hyper);
  x.Validate();
  return cfg;
}

LoadedConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseConfig(buffer.str(), path.parent_path().empty() ? "." : path.parent_path());
}

void ApplyOverrides(LoadedConfig& config, const Overrides& overrides) {
  ExperimentConfig& x = config.experiment;
  if (overrides.seed) {
    x.seed = *overrides.seed;
    x.clients = BuildProfiles(config.clients, x.seed, config.hyper);
  }
  if (overrides.strategy) x.strategy = *overrides.strategy;
  if (overrides.out) config.output.csv = *overrides.out;
  if (overrides.no_he) x.he.enabled = false;
  x.Validate();
}

}  // namespace flsim::cli

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

#ifndef FLSIM_TOOLS_CONFIG_H_
#define FLSIM_TOOLS_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flsim/simulator.h"

namespace flsim::cli {

struct OutputPaths {
  std::filesystem::path csv = "metrics.csv";
  std::filesystem::path summary;  // empty -> <csv stem>.summary.json
  std::filesystem::path events;   // empty -> not written
};

struct CompareSettings {
  // Event cap for AFL/FedBuff, which run until the SFL horizon instead of a
  // round count.
  int async_max_events = 5000;
};

// How client profiles are built; kept so a --seed override can redraw the
// paper scenario delays.
struct ClientScenario {
  enum class Kind { kPaper, kUniform, kCustom };
  Kind kind = Kind::kPaper;
  std::size_t count = 5;   // uniform
  double delay_s = 1.0;    // uniform
  std::vector<double> delays_s;   // custom
  std::vector<double> fractions;  // custom
};

std::vector<ClientProfile> BuildProfiles(const ClientScenario& scenario,
                                         std::uint64_t seed, const HyperParams& hyper);

struct LoadedConfig {
  ExperimentConfig experiment;
  ClientScenario clients;
  HyperParams hyper;
  OutputPaths output;
  CompareSettings compare;
};

// Command-line flags that take precedence over the file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<Strategy> strategy;
  std::optional<std::filesystem::path> out;
  bool no_he = false;
};

// Parses a TOML experiment file. Relative data paths resolve against the
// file's directory. Unknown keys, wrong types and invalid values raise
// ConfigError naming the key, e.g. "data.split: ratios sum to 0.9".
LoadedConfig ParseConfig(std::string_view toml_text,
                         const std::filesystem::path& base_dir = ".");
LoadedConfig LoadConfig(const std::filesystem::path& path);

// Applies the flags, rebuilding client profiles when the seed changes the
// scenario draw, then validates.
void ApplyOverrides(LoadedConfig& config, const Overrides& overrides);

}  // namespace flsim::cli

#endif  // FLSIM_TOOLS_CONFIG_H_

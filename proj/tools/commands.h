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

#ifndef FLSIM_TOOLS_COMMANDS_H_
#define FLSIM_TOOLS_COMMANDS_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace flsim::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // IO, parse and other runtime errors
inline constexpr int kExitConfig = 2;   // bad flags or configuration
inline constexpr int kExitNumeric = 3;  // NaN/Inf during training or aggregation

// Entry point behind the `flsim` binary. `args` excludes the program name.
// CSV written to "-" goes to `out`; diagnostics go to `err`.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Sends spdlog output to stderr at the level named by FLSIM_LOG
// (trace|debug|info|warn|error|off, default warn).
void ConfigureLogging();

}  // namespace flsim::cli

#endif  // FLSIM_TOOLS_COMMANDS_H_

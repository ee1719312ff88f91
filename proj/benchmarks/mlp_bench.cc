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

#include <benchmark/benchmark.h>

#include "flsim/dataset.h"
#include "flsim/mlp.h"

namespace flsim {
namespace {

void BM_TrainEpochGas(benchmark::State& state) {
  const Dataset data =
      SynthGenerate(SynthSpec::GasLike(), static_cast<std::size_t>(state.range(0)), 1);
  const ModelParams init = InitModel(Architecture::GasPipeline(), 2);
  HyperParams hyper = HyperParams::GasPipeline();
  hyper.local_epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(TrainEpochs(init, data, hyper, 3));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainEpochGas)->Arg(200)->Arg(4000)->Unit(benchmark::kMicrosecond);

void BM_Evaluate(benchmark::State& state) {
  const Dataset data = SynthGenerate(SynthSpec::GasLike(), 1000, 1);
  const ModelParams params = InitModel(Architecture::GasPipeline(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(Evaluate(params, data));
}
BENCHMARK(BM_Evaluate);

}  // namespace
}  // namespace flsim

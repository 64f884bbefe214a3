// Copyright 2026 The Refsieve Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "refsieve/data.hpp"
#include "refsieve/eval.hpp"
#include "refsieve/perturb.hpp"
#include "refsieve/sieves.hpp"

namespace refsieve {

// Validated run configuration. The JSON schema is strict: unknown keys are
// rejected (with a nearest-key suggestion), ranges are checked before any
// work starts, and defaults follow the training recipe baked into
// TrainConfig (6 epochs, lr 0.01, decay 0.4).
struct SynthSection {
  SynthConfig config;
  std::string out;
};

struct PerturbSection {
  std::string dataset;
  std::string out;
  PerturbationSpec spec;
};

struct TrainSection {
  std::string dataset;
  std::string checkpoint_out;
  std::string log_out;   // empty: log lines go to stdout
  std::string init;      // optional warm-start checkpoint
  TrainConfig config;
};

struct EvalStageConfig {
  std::string stage;  // sieve1 | sieve2 | sieve2_oracle | sieve3
  std::string checkpoint;
  std::optional<int> keep_top;  // sieve1; defaults to 3, JSON null disables
  std::string rule = "argmax_category";  // sieve2: argmax_category | threshold
  double threshold = 0.5;
};

struct EvalSection {
  std::string dataset;
  std::vector<EvalStageConfig> pipeline;
  std::vector<int> k_list = {1, 2, 3, 4, 5};
  std::string report_out;  // empty: stdout
  std::string format = "json";
  std::string histogram_out;  // optional
};

struct StatsSection {
  std::string dataset;
  std::string out;  // empty: stdout
  double rare_threshold = 0.01;
  std::vector<int> k_list = {1, 2, 3, 4, 5};
};

struct CheckSection {
  int seeds = 3;
  double step = 1e-4;
  double tolerance = 1e-4;
};

struct ReproSection {
  std::string train_dataset;
  std::string test_dataset;
  std::string out;  // empty: stdout
  std::string format = "json";
  std::vector<int> k_list = {1, 2, 3, 4, 5};
  int keep_top = 3;  // sieve1 cutoff inside composed pipelines
  TrainConfig train;
};

struct RunConfig {
  std::string subcommand;
  std::uint64_t seed = 0;
  std::optional<SynthSection> synth;
  std::optional<PerturbSection> perturb;
  std::optional<TrainSection> train;
  std::optional<EvalSection> eval;
  std::optional<StatsSection> stats;
  std::optional<CheckSection> check;
  std::optional<ReproSection> repro;
};

// Parses and validates the raw config document for one subcommand. Throws
// ConfigError on unknown keys (suggesting the closest known one), missing
// required fields, or out-of-range values.
RunConfig validate_config(const nlohmann::json& raw, const std::string& subcommand);

// Subcommand bodies. All of them throw refsieve::Error subclasses; run()
// maps those to exit codes (0 success, 1 rejected input, 2 runtime failure).
int run_synth(const RunConfig& config);
int run_perturb(const RunConfig& config);
int run_train(const RunConfig& config);
int run_eval(const RunConfig& config);
int run_stats(const RunConfig& config);
int run_check(const RunConfig& config);
int run_repro(const RunConfig& config);

// Full CLI entry point (argv parsing, config loading, dispatch).
int run(int argc, const char* const* argv);

// Builds an evaluation pipeline from stage configs by loading the referenced
// checkpoints. Exposed for the repro driver and tests.
PipelineSpec build_pipeline(const std::vector<EvalStageConfig>& stages);

}  // namespace refsieve

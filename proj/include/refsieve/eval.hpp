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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "refsieve/data.hpp"
#include "refsieve/sieves.hpp"

namespace refsieve {

// Full ordering of one instance's boxes, best first. Filtering stages demote
// rather than delete, so `order` is always a permutation of [0, n) and
// precision@n is 1. Scores are ordinal strengths derived from the final
// position ((n - position) / n); composed pipelines are filters, not score
// mixers, so no calibrated probability survives composition.
struct Ranking {
  std::string image_id;
  std::vector<int> order;
  std::vector<double> scores;
};

enum class StageKind { kSieve1, kSieve2, kSieve2Oracle, kSieve3 };

const char* stage_kind_name(StageKind kind);

// How the learned sieve 2 turns per-box probabilities into a kept category:
// either the category of the highest-probability surviving box, or every box
// whose probability clears a threshold.
enum class Sieve2Rule { kArgmaxCategory, kThreshold };

struct PipelineStage {
  StageKind kind = StageKind::kSieve1;
  // Sieve 1 only: survivors = top keep_top boxes. Unset keeps everything
  // (pure re-scoring).
  std::optional<int> keep_top;
  // Learned sieve 2 only.
  Sieve2Rule rule = Sieve2Rule::kArgmaxCategory;
  double threshold = 0.5;
  // Model state; sieve1 stages use sieve1, sieve2/sieve3 stages use fusion
  // plus vocab. sieve2_oracle needs no model.
  std::optional<SieveIParams> sieve1;
  std::optional<FusionParams> fusion;
  std::optional<Vocabulary> vocab;
};

struct PipelineSpec {
  std::vector<PipelineStage> stages;

  void validate() const;  // throws ConfigError
};

// Applies the stages in order over a shrinking survivor list (initially all
// boxes in index order):
//   sieve1        orders survivors by its scores; with keep_top set, the
//                 tail is demoted below every survivor.
//   sieve2        predicts a category (per `rule`) from the survivors and
//                 demotes survivors of other categories, keeping relative
//                 order on both sides.
//   sieve2_oracle same, but the predicted category is the target's true one.
//   sieve3        reorders survivors by its scores.
// The final ranking lists survivors first, then demoted groups in reverse
// order of demotion (later demotions outrank earlier ones). All internal
// ties resolve to the lowest box index.
Ranking rank_instance(const PipelineSpec& pipeline, const SceneInstance& instance);

// Mean over instances of [target within the first min(k, n) entries].
double precision_at_k(const std::vector<Ranking>& rankings, const std::vector<int>& targets,
                      int k);

struct EvalResult {
  std::vector<int> k_list;
  std::vector<double> precisions;                 // aligned with k_list
  std::vector<std::map<int, int>> survivor_hist;  // per stage: survivor count -> instances
};

EvalResult evaluate(const PipelineSpec& pipeline, const std::vector<SceneInstance>& dataset,
                    const std::vector<int>& k_list);

// Expected precision@k of a uniform random ranker: mean of min(k, n) / n.
double random_baseline(const std::vector<SceneInstance>& dataset, int k);

struct CategoryStat {
  int occurrences = 0;
  int target_selections = 0;
  double rate = 0.0;
};

struct CategoryTargetReport {
  std::map<std::string, CategoryStat> per_category;
  double rare_threshold = 0.01;
  int rare_categories = 0;  // categories with rate below rare_threshold
};

// Annotation-bias audit: how often each category occurs vs how often it is
// the referred object's category.
CategoryTargetReport category_target_rate(const std::vector<SceneInstance>& dataset,
                                          double rare_threshold = 0.01);

enum class ReportFormat { kTsv, kJson, kMarkdown };

ReportFormat parse_report_format(const std::string& name);

struct ReportRow {
  std::string model;
  std::vector<double> precisions;  // aligned with the report's k_list
  std::string notes;
};

// Renders rows with the fixed column order model | P@k... | notes. The JSON
// form parses back losslessly.
std::string emit_report(const std::vector<ReportRow>& rows, const std::vector<int>& k_list,
                        ReportFormat format);

std::vector<ReportRow> parse_json_report(const std::string& text, std::vector<int>* k_list);

// Survivor-size histograms as JSON.
std::string emit_survivor_histogram(const PipelineSpec& pipeline, const EvalResult& result);

}  // namespace refsieve

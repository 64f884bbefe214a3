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

#include "refsieve/eval.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "refsieve/error.hpp"

namespace refsieve {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Stable order by descending score; equal scores keep index order, and the
// incoming list is already sorted by box index within each group.
void sort_by_scores(std::vector<int>& boxes, const Tensor& scores) {
  std::stable_sort(boxes.begin(), boxes.end(), [&](int a, int b) {
    return scores[a] > scores[b];
  });
}

}  // namespace

const char* stage_kind_name(StageKind kind) {
  switch (kind) {
    case StageKind::kSieve1: return "sieve1";
    case StageKind::kSieve2: return "sieve2";
    case StageKind::kSieve2Oracle: return "sieve2_oracle";
    case StageKind::kSieve3: return "sieve3";
  }
  return "?";
}

void PipelineSpec::validate() const {
  if (stages.empty()) throw ConfigError("pipeline: needs at least one stage");
  int category_stages = 0;
  for (const PipelineStage& stage : stages) {
    switch (stage.kind) {
      case StageKind::kSieve1:
        if (!stage.sieve1) throw ConfigError("pipeline: sieve1 stage needs a sieve1 checkpoint");
        if (stage.keep_top && *stage.keep_top < 1) {
          throw ConfigError("pipeline: sieve1 keep_top must be >= 1");
        }
        break;
      case StageKind::kSieve2:
        if (!stage.fusion || !stage.vocab) {
          throw ConfigError("pipeline: sieve2 stage needs a sieve2 checkpoint");
        }
        ++category_stages;
        break;
      case StageKind::kSieve2Oracle:
        ++category_stages;
        break;
      case StageKind::kSieve3:
        if (!stage.fusion || !stage.vocab) {
          throw ConfigError("pipeline: sieve3 stage needs a sieve3 checkpoint");
        }
        break;
    }
  }
  if (category_stages > 1) {
    throw ConfigError("pipeline: at most one of sieve2 / sieve2_oracle is allowed");
  }
}

namespace {

// Core stage walk. stage_survivors, when given, receives the survivor count
// after each stage.
Ranking rank_instance_impl(const PipelineSpec& pipeline, const SceneInstance& instance,
                           std::vector<int>* stage_survivors) {
  const int n = instance.box_count();

  std::vector<int> survivors(static_cast<std::size_t>(n));
  for (int b = 0; b < n; ++b) survivors[static_cast<std::size_t>(b)] = b;
  std::vector<std::vector<int>> demoted_groups;

  for (const PipelineStage& stage : pipeline.stages) {
    if (survivors.empty()) {
      if (stage_survivors != nullptr) stage_survivors->push_back(0);
      continue;
    }
    switch (stage.kind) {
      case StageKind::kSieve1: {
        const Tensor scores = sieve1_scores(instance, *stage.sieve1);
        sort_by_scores(survivors, scores);
        if (stage.keep_top && *stage.keep_top < static_cast<int>(survivors.size())) {
          demoted_groups.emplace_back(survivors.begin() + *stage.keep_top, survivors.end());
          survivors.resize(static_cast<std::size_t>(*stage.keep_top));
        }
        break;
      }
      case StageKind::kSieve2:
      case StageKind::kSieve2Oracle: {
        int predicted_category = -1;
        if (stage.kind == StageKind::kSieve2Oracle) {
          predicted_category = instance.target_box().category_id;
        } else {
          const Tensor probs =
              sigmoid_values(fusion_scores(instance, *stage.fusion, *stage.vocab));
          if (stage.rule == Sieve2Rule::kArgmaxCategory) {
            int best = survivors.front();
            for (int b : survivors) {
              if (probs[b] > probs[best]) best = b;
            }
            predicted_category = instance.boxes[static_cast<std::size_t>(best)].category_id;
          } else {
            // Threshold rule: keep every box the classifier accepts.
            std::vector<int> kept;
            std::vector<int> dropped;
            for (int b : survivors) {
              (probs[b] >= stage.threshold ? kept : dropped).push_back(b);
            }
            if (!dropped.empty()) demoted_groups.push_back(std::move(dropped));
            survivors = std::move(kept);
            break;
          }
        }
        std::vector<int> kept;
        std::vector<int> dropped;
        for (int b : survivors) {
          const bool match =
              instance.boxes[static_cast<std::size_t>(b)].category_id == predicted_category;
          (match ? kept : dropped).push_back(b);
        }
        if (!dropped.empty()) demoted_groups.push_back(std::move(dropped));
        survivors = std::move(kept);
        break;
      }
      case StageKind::kSieve3: {
        const Tensor scores = fusion_scores(instance, *stage.fusion, *stage.vocab);
        sort_by_scores(survivors, scores);
        break;
      }
    }
    if (stage_survivors != nullptr) {
      stage_survivors->push_back(static_cast<int>(survivors.size()));
    }
  }

  Ranking ranking;
  ranking.image_id = instance.image_id;
  ranking.order = std::move(survivors);
  for (auto group = demoted_groups.rbegin(); group != demoted_groups.rend(); ++group) {
    ranking.order.insert(ranking.order.end(), group->begin(), group->end());
  }
  ranking.scores.reserve(static_cast<std::size_t>(n));
  for (int position = 0; position < n; ++position) {
    ranking.scores.push_back(static_cast<double>(n - position) / static_cast<double>(n));
  }
  return ranking;
}

}  // namespace

Ranking rank_instance(const PipelineSpec& pipeline, const SceneInstance& instance) {
  pipeline.validate();
  return rank_instance_impl(pipeline, instance, nullptr);
}

double precision_at_k(const std::vector<Ranking>& rankings, const std::vector<int>& targets,
                      int k) {
  if (rankings.empty()) throw DomainError("precision_at_k: empty evaluation set");
  if (rankings.size() != targets.size()) {
    throw DomainError("precision_at_k: rankings and targets must be aligned");
  }
  if (k < 1) throw DomainError("precision_at_k: k must be >= 1");
  int hits = 0;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    const std::vector<int>& order = rankings[i].order;
    const int prefix = std::min<int>(k, static_cast<int>(order.size()));
    for (int position = 0; position < prefix; ++position) {
      if (order[static_cast<std::size_t>(position)] == targets[i]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

EvalResult evaluate(const PipelineSpec& pipeline, const std::vector<SceneInstance>& dataset,
                    const std::vector<int>& k_list) {
  pipeline.validate();
  if (dataset.empty()) throw DomainError("evaluate: empty dataset");

  EvalResult result;
  result.k_list = k_list;
  result.survivor_hist.resize(pipeline.stages.size());

  std::vector<Ranking> rankings;
  std::vector<int> targets;
  rankings.reserve(dataset.size());
  targets.reserve(dataset.size());
  for (const SceneInstance& instance : dataset) {
    std::vector<int> counts;
    rankings.push_back(rank_instance_impl(pipeline, instance, &counts));
    targets.push_back(instance.target);
    for (std::size_t s = 0; s < counts.size(); ++s) {
      ++result.survivor_hist[s][counts[s]];
    }
  }
  result.precisions.reserve(k_list.size());
  for (int k : k_list) result.precisions.push_back(precision_at_k(rankings, targets, k));
  return result;
}

double random_baseline(const std::vector<SceneInstance>& dataset, int k) {
  if (dataset.empty()) throw DomainError("random_baseline: empty dataset");
  if (k < 1) throw DomainError("random_baseline: k must be >= 1");
  double total = 0.0;
  for (const SceneInstance& instance : dataset) {
    total += static_cast<double>(std::min(k, instance.box_count())) /
             static_cast<double>(instance.box_count());
  }
  return total / static_cast<double>(dataset.size());
}

CategoryTargetReport category_target_rate(const std::vector<SceneInstance>& dataset,
                                          double rare_threshold) {
  CategoryTargetReport report;
  report.rare_threshold = rare_threshold;
  for (const SceneInstance& instance : dataset) {
    for (const BoxRecord& box : instance.boxes) ++report.per_category[box.category].occurrences;
    ++report.per_category[instance.target_box().category].target_selections;
  }
  for (auto& [name, stat] : report.per_category) {
    stat.rate = stat.occurrences == 0
                    ? 0.0
                    : static_cast<double>(stat.target_selections) /
                          static_cast<double>(stat.occurrences);
    if (stat.rate < rare_threshold) ++report.rare_categories;
  }
  return report;
}

ReportFormat parse_report_format(const std::string& name) {
  if (name == "tsv") return ReportFormat::kTsv;
  if (name == "json") return ReportFormat::kJson;
  if (name == "markdown") return ReportFormat::kMarkdown;
  throw ConfigError("unknown report format '" + name + "' (expected tsv|json|markdown)");
}

std::string emit_report(const std::vector<ReportRow>& rows, const std::vector<int>& k_list,
                        ReportFormat format) {
  for (const ReportRow& row : rows) {
    if (row.precisions.size() != k_list.size()) {
      throw DomainError("emit_report: row '" + row.model + "' has " +
                        std::to_string(row.precisions.size()) + " precisions for " +
                        std::to_string(k_list.size()) + " k values");
    }
  }
  std::ostringstream out;
  switch (format) {
    case ReportFormat::kTsv: {
      out << "model";
      for (int k : k_list) out << "\tP@" << k;
      out << "\tnotes\n";
      for (const ReportRow& row : rows) {
        out << row.model;
        for (double p : row.precisions) out << '\t' << p;
        out << '\t' << row.notes << '\n';
      }
      break;
    }
    case ReportFormat::kJson: {
      ordered_json doc;
      doc["k_list"] = k_list;
      ordered_json jrows = ordered_json::array();
      for (const ReportRow& row : rows) {
        ordered_json jrow;
        jrow["model"] = row.model;
        jrow["precisions"] = row.precisions;
        jrow["notes"] = row.notes;
        jrows.push_back(std::move(jrow));
      }
      doc["rows"] = std::move(jrows);
      out << doc.dump(2) << '\n';
      break;
    }
    case ReportFormat::kMarkdown: {
      out << "| model |";
      for (int k : k_list) out << " P@" << k << " |";
      out << " notes |\n|---|";
      for (std::size_t i = 0; i < k_list.size(); ++i) out << "---|";
      out << "---|\n";
      for (const ReportRow& row : rows) {
        out << "| " << row.model << " |";
        for (double p : row.precisions) out << ' ' << p << " |";
        out << ' ' << row.notes << " |\n";
      }
      break;
    }
  }
  return out.str();
}

std::vector<ReportRow> parse_json_report(const std::string& text, std::vector<int>* k_list) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  try {
    if (k_list != nullptr) *k_list = doc.at("k_list").get<std::vector<int>>();
    std::vector<ReportRow> rows;
    for (const json& jrow : doc.at("rows")) {
      ReportRow row;
      row.model = jrow.at("model").get<std::string>();
      row.precisions = jrow.at("precisions").get<std::vector<double>>();
      row.notes = jrow.at("notes").get<std::string>();
      rows.push_back(std::move(row));
    }
    return rows;
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

std::string emit_survivor_histogram(const PipelineSpec& pipeline, const EvalResult& result) {
  ordered_json stages = ordered_json::array();
  for (std::size_t s = 0; s < result.survivor_hist.size(); ++s) {
    ordered_json entry;
    entry["stage"] = stage_kind_name(pipeline.stages[s].kind);
    ordered_json sizes;
    for (const auto& [size, count] : result.survivor_hist[s]) {
      sizes[std::to_string(size)] = count;
    }
    entry["survivor_sizes"] = std::move(sizes);
    stages.push_back(std::move(entry));
  }
  ordered_json doc;
  doc["stages"] = std::move(stages);
  return doc.dump(2) + "\n";
}

}  // namespace refsieve

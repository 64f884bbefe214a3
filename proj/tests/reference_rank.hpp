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

#include <vector>

#include "refsieve/eval.hpp"
#include "refsieve/sieves.hpp"

namespace refsieve {
namespace testing_support {

// Brute-force reimplementation of the pipeline ranking semantics, kept
// deliberately independent of eval.cpp: it extracts maxima one at a time
// instead of sorting, and tracks demotion depths explicitly. Used to verify
// rank_instance on small instances.
inline std::vector<int> reference_rank(const PipelineSpec& pipeline,
                                       const SceneInstance& instance) {
  const int n = instance.box_count();
  std::vector<int> alive;
  for (int b = 0; b < n; ++b) alive.push_back(b);
  std::vector<std::vector<int>> demoted_stack;

  auto order_by_scores = [](const std::vector<int>& pool, const Tensor& scores) {
    std::vector<int> remaining = pool;
    std::vector<int> ordered;
    while (!remaining.empty()) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < remaining.size(); ++i) {
        // Ties go to the lowest box index.
        if (scores[remaining[i]] > scores[remaining[best]]) best = i;
        if (scores[remaining[i]] == scores[remaining[best]] &&
            remaining[i] < remaining[best]) {
          best = i;
        }
      }
      ordered.push_back(remaining[best]);
      remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
    }
    return ordered;
  };

  for (const PipelineStage& stage : pipeline.stages) {
    if (alive.empty()) continue;
    switch (stage.kind) {
      case StageKind::kSieve1: {
        const Tensor scores = sieve1_scores(instance, *stage.sieve1);
        std::vector<int> ordered = order_by_scores(alive, scores);
        if (stage.keep_top && *stage.keep_top < static_cast<int>(ordered.size())) {
          demoted_stack.emplace_back(ordered.begin() + *stage.keep_top, ordered.end());
          ordered.resize(static_cast<std::size_t>(*stage.keep_top));
        }
        alive = std::move(ordered);
        break;
      }
      case StageKind::kSieve2:
      case StageKind::kSieve2Oracle: {
        Tensor probs;
        if (stage.kind == StageKind::kSieve2) {
          probs = sigmoid_values(fusion_scores(instance, *stage.fusion, *stage.vocab));
        }
        std::vector<int> kept;
        std::vector<int> dropped;
        if (stage.kind == StageKind::kSieve2 && stage.rule == Sieve2Rule::kThreshold) {
          for (int b : alive) {
            if (probs[b] >= stage.threshold) {
              kept.push_back(b);
            } else {
              dropped.push_back(b);
            }
          }
        } else {
          int category;
          if (stage.kind == StageKind::kSieve2Oracle) {
            category = instance.target_box().category_id;
          } else {
            int best = alive.front();
            for (int b : alive) {
              if (probs[b] > probs[best]) best = b;
            }
            category = instance.boxes[static_cast<std::size_t>(best)].category_id;
          }
          for (int b : alive) {
            if (instance.boxes[static_cast<std::size_t>(b)].category_id == category) {
              kept.push_back(b);
            } else {
              dropped.push_back(b);
            }
          }
        }
        if (!dropped.empty()) demoted_stack.push_back(std::move(dropped));
        alive = std::move(kept);
        break;
      }
      case StageKind::kSieve3: {
        const Tensor scores = fusion_scores(instance, *stage.fusion, *stage.vocab);
        alive = order_by_scores(alive, scores);
        break;
      }
    }
  }

  std::vector<int> order = alive;
  while (!demoted_stack.empty()) {
    order.insert(order.end(), demoted_stack.back().begin(), demoted_stack.back().end());
    demoted_stack.pop_back();
  }
  return order;
}

}  // namespace testing_support
}  // namespace refsieve

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
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "refsieve/data.hpp"

namespace refsieve {

// Expression-level dataset transformations, applied identically to train and
// test splits. Boxes, geometry, features and the target index are never
// touched; only tokens and POS tags change.
enum class PerturbKind { kNone, kShuffle, kKeepPos, kDropExpression };

PerturbKind parse_perturb_kind(const std::string& name);
const char* perturb_kind_name(PerturbKind kind);

struct PerturbationSpec {
  PerturbKind kind = PerturbKind::kNone;
  std::set<Pos> keep_set;   // required iff kind == kKeepPos, must be non-empty
  std::uint64_t seed = 0;   // used iff kind == kShuffle

  void validate() const;  // throws ConfigError
};

// One Fisher-Yates permutation applied identically to tokens and tags. The
// permutation stream is SplitMix64 seeded with seed ^ instance_index, so a
// given instance shuffles the same way regardless of dataset order. The
// exact PRNG and loop are documented in rng.hpp and pinned by golden tests.
std::pair<std::vector<std::string>, std::vector<Pos>> shuffle_expression(
    const std::vector<std::string>& tokens, const std::vector<Pos>& pos, std::uint64_t seed,
    std::uint64_t instance_index);

// Order-preserving subsequence of positions whose tag is in keep_set. May
// be empty; downstream encoders map empty expressions to the zero vector.
std::pair<std::vector<std::string>, std::vector<Pos>> filter_pos(
    const std::vector<std::string>& tokens, const std::vector<Pos>& pos,
    const std::set<Pos>& keep_set);

// Clears tokens and tags, leaving every other field intact. Idempotent.
SceneInstance drop_expression(SceneInstance instance);

// Applies the spec instance-wise; count and order are preserved and the
// result is deterministic given the spec.
std::vector<SceneInstance> perturb_dataset(const std::vector<SceneInstance>& dataset,
                                           const PerturbationSpec& spec);

}  // namespace refsieve

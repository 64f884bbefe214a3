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

#include "refsieve/perturb.hpp"

#include "refsieve/error.hpp"
#include "refsieve/rng.hpp"

namespace refsieve {

PerturbKind parse_perturb_kind(const std::string& name) {
  if (name == "none") return PerturbKind::kNone;
  if (name == "shuffle") return PerturbKind::kShuffle;
  if (name == "keep_pos") return PerturbKind::kKeepPos;
  if (name == "drop_expression") return PerturbKind::kDropExpression;
  throw ConfigError("unknown perturbation kind '" + name +
                    "' (expected none|shuffle|keep_pos|drop_expression)");
}

const char* perturb_kind_name(PerturbKind kind) {
  switch (kind) {
    case PerturbKind::kNone: return "none";
    case PerturbKind::kShuffle: return "shuffle";
    case PerturbKind::kKeepPos: return "keep_pos";
    case PerturbKind::kDropExpression: return "drop_expression";
  }
  return "?";
}

void PerturbationSpec::validate() const {
  if (kind == PerturbKind::kKeepPos && keep_set.empty()) {
    throw ConfigError("perturbation: keep_pos requires a non-empty keep_set");
  }
}

std::pair<std::vector<std::string>, std::vector<Pos>> shuffle_expression(
    const std::vector<std::string>& tokens, const std::vector<Pos>& pos, std::uint64_t seed,
    std::uint64_t instance_index) {
  if (tokens.size() != pos.size()) {
    throw ValidationError("shuffle_expression: tokens and pos must be aligned");
  }
  SplitMix64 rng(seed ^ instance_index);
  const std::vector<int> perm = rng.permutation(static_cast<int>(tokens.size()));
  std::vector<std::string> out_tokens(tokens.size());
  std::vector<Pos> out_pos(pos.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out_tokens[i] = tokens[static_cast<std::size_t>(perm[i])];
    out_pos[i] = pos[static_cast<std::size_t>(perm[i])];
  }
  return {std::move(out_tokens), std::move(out_pos)};
}

std::pair<std::vector<std::string>, std::vector<Pos>> filter_pos(
    const std::vector<std::string>& tokens, const std::vector<Pos>& pos,
    const std::set<Pos>& keep_set) {
  if (tokens.size() != pos.size()) {
    throw ValidationError("filter_pos: tokens and pos must be aligned");
  }
  std::vector<std::string> out_tokens;
  std::vector<Pos> out_pos;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (keep_set.count(pos[i]) != 0) {
      out_tokens.push_back(tokens[i]);
      out_pos.push_back(pos[i]);
    }
  }
  return {std::move(out_tokens), std::move(out_pos)};
}

SceneInstance drop_expression(SceneInstance instance) {
  instance.tokens.clear();
  instance.pos.clear();
  return instance;
}

std::vector<SceneInstance> perturb_dataset(const std::vector<SceneInstance>& dataset,
                                           const PerturbationSpec& spec) {
  spec.validate();
  std::vector<SceneInstance> out;
  out.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    SceneInstance instance = dataset[i];
    switch (spec.kind) {
      case PerturbKind::kNone:
        break;
      case PerturbKind::kShuffle:
        std::tie(instance.tokens, instance.pos) =
            shuffle_expression(instance.tokens, instance.pos, spec.seed,
                               static_cast<std::uint64_t>(i));
        break;
      case PerturbKind::kKeepPos:
        std::tie(instance.tokens, instance.pos) =
            filter_pos(instance.tokens, instance.pos, spec.keep_set);
        break;
      case PerturbKind::kDropExpression:
        instance = drop_expression(std::move(instance));
        break;
    }
    out.push_back(std::move(instance));
  }
  return out;
}

}  // namespace refsieve

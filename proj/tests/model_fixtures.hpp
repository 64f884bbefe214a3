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

#include "refsieve/sieves.hpp"

namespace refsieve {
namespace testing_support {

inline Tensor uniform_fill(std::vector<int> shape, SplitMix64& rng, double scale) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-scale, scale);
  return t;
}

// Random model at an O(1) parameter scale. Gradient checks need this: at the
// training-time 0.08 init the fused joint vector has norm ~1e-5, so an h=1e-4
// central difference steps across the L2-normalization's curvature scale and
// measures the nonlinearity instead of the (correct) derivative.
inline SieveModel gradcheck_model(ModelKind kind, const Vocabulary& vocab, int d_vis, int hidden,
                                  int embed_dim, int attn_dim, std::uint64_t seed,
                                  double scale = 0.8) {
  SplitMix64 rng(seed);
  SieveModel model;
  model.kind = kind;
  model.vocab = vocab;
  if (kind == ModelKind::kSieve1) {
    SieveIParams params;
    params.score_w = uniform_fill({1, d_vis + 5}, rng, scale);
    model.sieve1 = std::move(params);
    return model;
  }
  FusionParams fusion;
  fusion.encoder.embedding = uniform_fill({vocab.size(), embed_dim}, rng, scale);
  for (int layer = 0; layer < 2; ++layer) {
    for (int direction = 0; direction < 2; ++direction) {
      LstmWeights& w =
          fusion.encoder.lstm[static_cast<std::size_t>(layer)][static_cast<std::size_t>(direction)];
      w.w_input = uniform_fill({4 * hidden, layer == 0 ? embed_dim : 2 * hidden}, rng, scale);
      w.w_recur = uniform_fill({4 * hidden, hidden}, rng, scale);
      w.bias = Tensor({4 * hidden});
      for (int u = hidden; u < 2 * hidden; ++u) w.bias[u] = 1.0;
    }
  }
  fusion.encoder.attn_proj = uniform_fill({attn_dim, 2 * hidden}, rng, scale);
  fusion.encoder.attn_query = uniform_fill({attn_dim}, rng, scale);
  fusion.project_w = uniform_fill({2 * hidden, d_vis + 5}, rng, scale);
  fusion.score_w = uniform_fill({1, 2 * hidden}, rng, scale);
  model.fusion = std::move(fusion);
  return model;
}

}  // namespace testing_support
}  // namespace refsieve

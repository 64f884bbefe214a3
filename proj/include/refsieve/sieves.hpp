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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "refsieve/checkpoint.hpp"
#include "refsieve/data.hpp"
#include "refsieve/encoder.hpp"
#include "refsieve/graph.hpp"
#include "refsieve/tensor.hpp"

namespace refsieve {

enum class ModelKind { kSieve1, kSieve2, kSieve3 };

ModelKind parse_model_kind(const std::string& name);
const char* model_kind_name(ModelKind kind);

// Sieve 1 ranks boxes from image evidence alone: each box's visual features
// concatenated with its 5 spatial features go through one scoring row, and
// the scores are softmaxed across the instance. The expression never enters.
struct SieveIParams {
  Tensor score_w;  // [1 x (d_vis + 5)]

  int d_vis() const { return score_w.dim(1) - 5; }

  friend bool operator==(const SieveIParams&, const SieveIParams&) = default;
};

// Shared parameterization of sieves 2 and 3: project box features to the
// encoder's output width, gate them elementwise with the encoded expression,
// L2-normalize, and score with a single linear row. Sieve 2 reads the score
// through a per-box sigmoid (category filter); sieve 3 softmaxes scores
// across boxes (localization).
struct FusionParams {
  Tensor project_w;  // [2h x (d_vis + 5)]
  Tensor score_w;    // [1 x 2h]
  EncoderParams encoder;

  int d_vis() const { return project_w.dim(1) - 5; }

  friend bool operator==(const FusionParams&, const FusionParams&) = default;
};

using SieveIIParams = FusionParams;
using SieveIIIParams = FusionParams;

// [xmin/W, ymin/H, xmax/W, ymax/H, area(box)/area(image)], all in [0, 1].
Tensor spatial_features(const BoxRecord& box, double image_width, double image_height);

// Box feature vector [vis || spatial], size d_vis + 5.
Tensor box_features(const SceneInstance& instance, int box_index);

// Probability distribution over the instance's boxes. Ignores tokens.
Tensor sieve1_forward(const SceneInstance& instance, const SieveIParams& params);

// Independent per-box probabilities that each box shares the referred
// object's category. No normalization across boxes.
Tensor sieve2_forward(const SceneInstance& instance, const SieveIIParams& params,
                      const Vocabulary& vocab);

// Probability distribution over boxes from the full expression.
Tensor sieve3_forward(const SceneInstance& instance, const SieveIIIParams& params,
                      const Vocabulary& vocab);

// Raw pre-softmax / pre-sigmoid scores, one per box. Ordering boxes by score
// is equivalent to ordering by the corresponding probabilities.
Tensor sieve1_scores(const SceneInstance& instance, const SieveIParams& params);
Tensor fusion_scores(const SceneInstance& instance, const FusionParams& params,
                     const Vocabulary& vocab);

// A trained (or initialized) model of any kind plus the vocabulary it was
// trained with. Exactly one of sieve1/fusion is populated.
struct SieveModel {
  ModelKind kind = ModelKind::kSieve1;
  std::optional<SieveIParams> sieve1;
  std::optional<FusionParams> fusion;
  Vocabulary vocab;

  int d_vis() const { return sieve1 ? sieve1->d_vis() : fusion->d_vis(); }
};

// Training objective. Sieves 1 and 3 use cross-entropy against the target
// box; sieve 2 uses mean per-box binary cross-entropy against the label
// "box category equals target category".
double loss(const SceneInstance& instance, const SieveModel& model);

struct TrainConfig {
  ModelKind kind = ModelKind::kSieve1;
  int epochs = 6;
  double lr0 = 0.01;
  double decay = 0.4;  // learning rate at epoch e is lr0 * decay^e
  std::uint64_t seed = 0;
  // Model dimensions (fusion models only; sieve 1 needs none of them).
  int hidden = 64;
  int embed_dim = 16;
  int attn_dim = 64;
  int min_count = 1;
  std::string embeddings_path;  // optional pretrained table

  void validate() const;  // throws ConfigError
};

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Per-instance SGD (batch size 1). Instance order is reshuffled every epoch
// from the run seed; everything is deterministic given (dataset, config,
// seed, init). A non-finite loss aborts with the epoch and instance named.
// `init` warm-starts from an existing checkpoint of the same kind.
Checkpoint train(const std::vector<SceneInstance>& dataset, const TrainConfig& config,
                 const std::optional<Checkpoint>& init = std::nullopt,
                 const EpochCallback& on_epoch = nullptr);

// Checkpoint <-> model conversion. Shapes are validated against the
// checkpoint's declared hyperparameters.
Checkpoint model_to_checkpoint(const SieveModel& model, std::uint64_t seed, int epochs);
SieveModel model_from_checkpoint(const Checkpoint& checkpoint);

// Fresh models with uniform [-0.08, 0.08] weights from the stream.
SieveIParams init_sieve1(int d_vis, SplitMix64& rng);
FusionParams init_fusion(int d_vis, int hidden, int embed_dim, int attn_dim, Tensor embedding,
                         SplitMix64& rng);

// Graph builders shared by training, inference and the gradient checker.
struct Sieve1Nodes {
  NodeId score_w;
};
Sieve1Nodes register_sieve1(Graph& graph, const SieveIParams& params);
NodeId sieve1_scores_node(Graph& graph, const Sieve1Nodes& nodes, const SceneInstance& instance);

struct FusionNodes {
  NodeId project_w;
  NodeId score_w;
  EncoderNodes encoder;
  int hidden = 0;
};
FusionNodes register_fusion(Graph& graph, const FusionParams& params);
NodeId fusion_scores_node(Graph& graph, const FusionNodes& nodes, const SceneInstance& instance,
                          const Vocabulary& vocab);

// Loss node for a full model over one instance; used by the finite
// difference acceptance checks.
NodeId loss_node(Graph& graph, const SceneInstance& instance, const SieveModel& model);

}  // namespace refsieve

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

#include "refsieve/sieves.hpp"

#include <cmath>
#include <utility>

#include "refsieve/error.hpp"

namespace refsieve {

namespace {

constexpr double kNormalizeEpsilon = 1e-8;

std::vector<double> category_labels(const SceneInstance& instance) {
  const int target_cat = instance.target_box().category_id;
  std::vector<double> labels(instance.boxes.size());
  for (std::size_t b = 0; b < instance.boxes.size(); ++b) {
    labels[b] = instance.boxes[b].category_id == target_cat ? 1.0 : 0.0;
  }
  return labels;
}

void check_d_vis(const SceneInstance& instance, int expected, const char* what) {
  const int actual = static_cast<int>(instance.boxes.front().vis.size());
  if (actual != expected) {
    throw ShapeError(std::string(what) + ": model expects d_vis " + std::to_string(expected) +
                     ", instance '" + instance.image_id + "' has " + std::to_string(actual));
  }
}

}  // namespace

ModelKind parse_model_kind(const std::string& name) {
  if (name == "sieve1") return ModelKind::kSieve1;
  if (name == "sieve2") return ModelKind::kSieve2;
  if (name == "sieve3") return ModelKind::kSieve3;
  throw ConfigError("unknown model kind '" + name + "' (expected sieve1|sieve2|sieve3)");
}

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kSieve1: return "sieve1";
    case ModelKind::kSieve2: return "sieve2";
    case ModelKind::kSieve3: return "sieve3";
  }
  return "?";
}

Tensor spatial_features(const BoxRecord& box, double image_width, double image_height) {
  if (!(image_width > 0.0) || !(image_height > 0.0)) {
    throw DomainError("spatial_features: image area must be positive");
  }
  const double area = image_width * image_height;
  return Tensor::vec({box.xmin / image_width, box.ymin / image_height, box.xmax / image_width,
                      box.ymax / image_height, box.area() / area});
}

Tensor box_features(const SceneInstance& instance, int box_index) {
  const BoxRecord& box = instance.boxes[static_cast<std::size_t>(box_index)];
  const Tensor spatial = spatial_features(box, instance.width, instance.height);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(box.vis.size()) + 5);
  values.insert(values.end(), box.vis.data().begin(), box.vis.data().end());
  values.insert(values.end(), spatial.data().begin(), spatial.data().end());
  return Tensor::vec(std::move(values));
}

Sieve1Nodes register_sieve1(Graph& graph, const SieveIParams& params) {
  return Sieve1Nodes{graph.parameter("score_w", params.score_w)};
}

NodeId sieve1_scores_node(Graph& graph, const Sieve1Nodes& nodes, const SceneInstance& instance) {
  std::vector<NodeId> scores;
  scores.reserve(instance.boxes.size());
  for (int b = 0; b < instance.box_count(); ++b) {
    scores.push_back(graph.matvec(nodes.score_w, graph.input(box_features(instance, b))));
  }
  return graph.concat(scores);
}

FusionNodes register_fusion(Graph& graph, const FusionParams& params) {
  FusionNodes nodes;
  nodes.project_w = graph.parameter("project_w", params.project_w);
  nodes.score_w = graph.parameter("score_w", params.score_w);
  nodes.encoder = register_encoder(graph, params.encoder, "encoder.");
  nodes.hidden = params.encoder.hidden_size();
  return nodes;
}

NodeId fusion_scores_node(Graph& graph, const FusionNodes& nodes, const SceneInstance& instance,
                          const Vocabulary& vocab) {
  const NodeId text = encode_expression_node(graph, nodes.encoder,
                                             encode_tokens(instance.tokens, vocab), nodes.hidden);
  std::vector<NodeId> scores;
  scores.reserve(instance.boxes.size());
  for (int b = 0; b < instance.box_count(); ++b) {
    const NodeId projected =
        graph.matvec(nodes.project_w, graph.input(box_features(instance, b)));
    const NodeId joint = graph.l2_normalize(graph.mul(projected, text), kNormalizeEpsilon);
    scores.push_back(graph.matvec(nodes.score_w, joint));
  }
  return graph.concat(scores);
}

Tensor sieve1_scores(const SceneInstance& instance, const SieveIParams& params) {
  check_d_vis(instance, params.d_vis(), "sieve1");
  Graph graph;
  const Sieve1Nodes nodes = register_sieve1(graph, params);
  return graph.value(sieve1_scores_node(graph, nodes, instance));
}

Tensor fusion_scores(const SceneInstance& instance, const FusionParams& params,
                     const Vocabulary& vocab) {
  check_d_vis(instance, params.d_vis(), "fusion");
  Graph graph;
  const FusionNodes nodes = register_fusion(graph, params);
  return graph.value(fusion_scores_node(graph, nodes, instance, vocab));
}

Tensor sieve1_forward(const SceneInstance& instance, const SieveIParams& params) {
  return softmax_values(sieve1_scores(instance, params));
}

Tensor sieve2_forward(const SceneInstance& instance, const SieveIIParams& params,
                      const Vocabulary& vocab) {
  return sigmoid_values(fusion_scores(instance, params, vocab));
}

Tensor sieve3_forward(const SceneInstance& instance, const SieveIIIParams& params,
                      const Vocabulary& vocab) {
  return softmax_values(fusion_scores(instance, params, vocab));
}

NodeId loss_node(Graph& graph, const SceneInstance& instance, const SieveModel& model) {
  switch (model.kind) {
    case ModelKind::kSieve1: {
      const Sieve1Nodes nodes = register_sieve1(graph, *model.sieve1);
      return graph.softmax_cross_entropy(sieve1_scores_node(graph, nodes, instance),
                                         instance.target);
    }
    case ModelKind::kSieve2: {
      const FusionNodes nodes = register_fusion(graph, *model.fusion);
      return graph.sigmoid_cross_entropy(
          fusion_scores_node(graph, nodes, instance, model.vocab), category_labels(instance));
    }
    case ModelKind::kSieve3: {
      const FusionNodes nodes = register_fusion(graph, *model.fusion);
      return graph.softmax_cross_entropy(fusion_scores_node(graph, nodes, instance, model.vocab),
                                         instance.target);
    }
  }
  throw DomainError("loss_node: unreachable model kind");
}

double loss(const SceneInstance& instance, const SieveModel& model) {
  Graph graph;
  return graph.value(loss_node(graph, instance, model))[0];
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (!(lr0 > 0.0)) throw ConfigError("train: lr0 must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("train: decay must lie in (0, 1]");
  if (hidden < 1) throw ConfigError("train: hidden must be >= 1");
  if (embed_dim < 1) throw ConfigError("train: embed_dim must be >= 1");
  if (attn_dim < 1) throw ConfigError("train: attn_dim must be >= 1");
  if (min_count < 1) throw ConfigError("train: min_count must be >= 1");
}

SieveIParams init_sieve1(int d_vis, SplitMix64& rng) {
  SieveIParams params;
  params.score_w = Tensor({1, d_vis + 5});
  for (std::int64_t i = 0; i < params.score_w.size(); ++i) {
    params.score_w[i] = rng.uniform(-0.08, 0.08);
  }
  return params;
}

FusionParams init_fusion(int d_vis, int hidden, int embed_dim, int attn_dim, Tensor embedding,
                         SplitMix64& rng) {
  if (embedding.ndim() != 2 || embedding.dim(1) != embed_dim) {
    throw ShapeError("init_fusion: embedding " + embedding.shape_str() + " must be [|V| x " +
                     std::to_string(embed_dim) + "]");
  }
  FusionParams params;
  params.encoder = init_encoder(std::move(embedding), hidden, attn_dim, rng);
  params.project_w = Tensor({2 * hidden, d_vis + 5});
  for (std::int64_t i = 0; i < params.project_w.size(); ++i) {
    params.project_w[i] = rng.uniform(-0.08, 0.08);
  }
  params.score_w = Tensor({1, 2 * hidden});
  for (std::int64_t i = 0; i < params.score_w.size(); ++i) {
    params.score_w[i] = rng.uniform(-0.08, 0.08);
  }
  return params;
}

namespace {

// Flat named views over a model's tensors, in checkpoint order.
std::vector<std::pair<std::string, Tensor*>> named_tensors(SieveModel& model) {
  std::vector<std::pair<std::string, Tensor*>> out;
  if (model.kind == ModelKind::kSieve1) {
    out.emplace_back("score_w", &model.sieve1->score_w);
    return out;
  }
  FusionParams& fusion = *model.fusion;
  out.emplace_back("project_w", &fusion.project_w);
  out.emplace_back("score_w", &fusion.score_w);
  out.emplace_back("encoder.embedding", &fusion.encoder.embedding);
  for (int layer = 0; layer < 2; ++layer) {
    for (int direction = 0; direction < 2; ++direction) {
      LstmWeights& w =
          fusion.encoder.lstm[static_cast<std::size_t>(layer)][static_cast<std::size_t>(direction)];
      const std::string base = "encoder.lstm" + std::to_string(layer) + "." +
                               (direction == 0 ? "fwd" : "bwd") + ".";
      out.emplace_back(base + "w_input", &w.w_input);
      out.emplace_back(base + "w_recur", &w.w_recur);
      out.emplace_back(base + "bias", &w.bias);
    }
  }
  out.emplace_back("encoder.attn_proj", &fusion.encoder.attn_proj);
  out.emplace_back("encoder.attn_query", &fusion.encoder.attn_query);
  return out;
}

}  // namespace

Checkpoint model_to_checkpoint(const SieveModel& model, std::uint64_t seed, int epochs) {
  Checkpoint checkpoint;
  checkpoint.model_kind = model_kind_name(model.kind);
  checkpoint.seed = seed;
  checkpoint.epochs = epochs;
  checkpoint.vocab = model.vocab.tokens();
  checkpoint.hyper["d_vis"] = model.d_vis();
  if (model.kind != ModelKind::kSieve1) {
    checkpoint.hyper["hidden"] = model.fusion->encoder.hidden_size();
    checkpoint.hyper["embed_dim"] = model.fusion->encoder.embed_dim();
    checkpoint.hyper["attn_dim"] = model.fusion->encoder.attn_proj.dim(0);
  }
  SieveModel snapshot = model;
  for (const auto& [name, tensor] : named_tensors(snapshot)) {
    checkpoint.tensors.emplace_back(name, *tensor);
  }
  return checkpoint;
}

SieveModel model_from_checkpoint(const Checkpoint& checkpoint) {
  SieveModel model;
  model.kind = parse_model_kind(checkpoint.model_kind);
  model.vocab = checkpoint.vocabulary();
  const int d_vis = static_cast<int>(checkpoint.hyper_value("d_vis"));
  if (model.kind == ModelKind::kSieve1) {
    SieveIParams params;
    params.score_w = checkpoint.tensor("score_w");
    if (params.score_w.ndim() != 2 || params.score_w.dim(0) != 1 ||
        params.score_w.dim(1) != d_vis + 5) {
      throw IntegrityError("checkpoint score_w " + params.score_w.shape_str() +
                           " does not match d_vis " + std::to_string(d_vis));
    }
    model.sieve1 = std::move(params);
    return model;
  }

  const int hidden = static_cast<int>(checkpoint.hyper_value("hidden"));
  const int embed_dim = static_cast<int>(checkpoint.hyper_value("embed_dim"));
  const int attn_dim = static_cast<int>(checkpoint.hyper_value("attn_dim"));
  FusionParams fusion;
  fusion.project_w = checkpoint.tensor("project_w");
  fusion.score_w = checkpoint.tensor("score_w");
  fusion.encoder.embedding = checkpoint.tensor("encoder.embedding");
  for (int layer = 0; layer < 2; ++layer) {
    for (int direction = 0; direction < 2; ++direction) {
      const std::string base = "encoder.lstm" + std::to_string(layer) + "." +
                               (direction == 0 ? "fwd" : "bwd") + ".";
      LstmWeights& w =
          fusion.encoder.lstm[static_cast<std::size_t>(layer)][static_cast<std::size_t>(direction)];
      w.w_input = checkpoint.tensor(base + "w_input");
      w.w_recur = checkpoint.tensor(base + "w_recur");
      w.bias = checkpoint.tensor(base + "bias");
    }
  }
  fusion.encoder.attn_proj = checkpoint.tensor("encoder.attn_proj");
  fusion.encoder.attn_query = checkpoint.tensor("encoder.attn_query");

  if (fusion.project_w.ndim() != 2 || fusion.project_w.dim(0) != 2 * hidden ||
      fusion.project_w.dim(1) != d_vis + 5 || fusion.score_w.dim(1) != 2 * hidden ||
      fusion.encoder.embedding.dim(1) != embed_dim ||
      fusion.encoder.attn_proj.dim(0) != attn_dim) {
    throw IntegrityError("checkpoint tensor shapes do not match declared hyperparameters");
  }
  model.fusion = std::move(fusion);
  return model;
}

Checkpoint train(const std::vector<SceneInstance>& dataset, const TrainConfig& config,
                 const std::optional<Checkpoint>& init, const EpochCallback& on_epoch) {
  config.validate();
  if (dataset.empty()) throw ConfigError("train: dataset is empty");
  const int d_vis = dataset_d_vis(dataset);

  SplitMix64 rng(config.seed);
  SieveModel model;
  if (init) {
    model = model_from_checkpoint(*init);
    if (model.kind != config.kind) {
      throw ConfigError(std::string("train: init checkpoint is ") +
                        model_kind_name(model.kind) + ", config asks for " +
                        model_kind_name(config.kind));
    }
    if (model.d_vis() != d_vis) {
      throw ConfigError("train: init checkpoint d_vis " + std::to_string(model.d_vis()) +
                        " does not match dataset d_vis " + std::to_string(d_vis));
    }
  } else {
    model.kind = config.kind;
    model.vocab = build_vocab(dataset, config.min_count);
    if (config.kind == ModelKind::kSieve1) {
      model.sieve1 = init_sieve1(d_vis, rng);
    } else {
      Tensor embedding =
          config.embeddings_path.empty()
              ? init_embeddings(model.vocab, config.embed_dim, rng)
              : load_embeddings(config.embeddings_path, model.vocab, config.embed_dim, rng);
      model.fusion = init_fusion(d_vis, config.hidden, config.embed_dim, config.attn_dim,
                                 std::move(embedding), rng);
    }
  }

  auto tensors = named_tensors(model);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.lr0 * std::pow(config.decay, epoch);
    const std::vector<int> order = rng.permutation(static_cast<int>(dataset.size()));
    double loss_sum = 0.0;
    for (int pick : order) {
      const SceneInstance& instance = dataset[static_cast<std::size_t>(pick)];
      Graph graph;
      const NodeId loss_id = loss_node(graph, instance, model);
      const double loss_value = graph.value(loss_id)[0];
      if (!std::isfinite(loss_value)) {
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) +
                            ", instance '" + instance.image_id + "'");
      }
      loss_sum += loss_value;
      const Graph::GradientMap grads = graph.gradients(loss_id);
      for (auto& [name, tensor] : tensors) {
        const Tensor& grad = grads.at(name);
        for (std::int64_t i = 0; i < tensor->size(); ++i) (*tensor)[i] -= lr * grad[i];
      }
    }
    if (on_epoch) {
      on_epoch(EpochStats{epoch, lr, loss_sum / static_cast<double>(dataset.size())});
    }
  }

  return model_to_checkpoint(model, config.seed,
                             (init ? init->epochs : 0) + config.epochs);
}

}  // namespace refsieve

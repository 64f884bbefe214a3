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

#include "refsieve/encoder.hpp"

#include <algorithm>

#include "refsieve/error.hpp"

namespace refsieve {

namespace {

Tensor uniform_tensor(std::vector<int> shape, SplitMix64& rng) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-0.08, 0.08);
  return t;
}

LstmWeights init_lstm_weights(int input_dim, int hidden, SplitMix64& rng) {
  LstmWeights w;
  w.w_input = uniform_tensor({4 * hidden, input_dim}, rng);
  w.w_recur = uniform_tensor({4 * hidden, hidden}, rng);
  w.bias = Tensor({4 * hidden});
  // Forget-gate rows start at 1.0 so early training does not wipe state.
  for (int i = hidden; i < 2 * hidden; ++i) w.bias[i] = 1.0;
  return w;
}

const char* direction_name(int direction) { return direction == 0 ? "fwd" : "bwd"; }

}  // namespace

EncoderParams init_encoder(Tensor embedding, int hidden, int attn_dim, SplitMix64& rng) {
  if (hidden < 1 || attn_dim < 1) {
    throw ConfigError("encoder: hidden and attention sizes must be >= 1");
  }
  EncoderParams params;
  params.embedding = std::move(embedding);
  const int d_emb = params.embedding.dim(1);
  for (int layer = 0; layer < 2; ++layer) {
    const int input_dim = layer == 0 ? d_emb : 2 * hidden;
    for (int direction = 0; direction < 2; ++direction) {
      params.lstm[static_cast<std::size_t>(layer)][static_cast<std::size_t>(direction)] =
          init_lstm_weights(input_dim, hidden, rng);
    }
  }
  params.attn_proj = uniform_tensor({attn_dim, 2 * hidden}, rng);
  params.attn_query = uniform_tensor({attn_dim}, rng);
  return params;
}

EncoderNodes register_encoder(Graph& graph, const EncoderParams& params,
                              const std::string& prefix) {
  EncoderNodes nodes;
  nodes.embedding = graph.parameter(prefix + "embedding", params.embedding);
  for (int layer = 0; layer < 2; ++layer) {
    for (int direction = 0; direction < 2; ++direction) {
      const LstmWeights& w =
          params.lstm[static_cast<std::size_t>(layer)][static_cast<std::size_t>(direction)];
      const std::string base =
          prefix + "lstm" + std::to_string(layer) + "." + direction_name(direction) + ".";
      auto& slot = nodes.lstm[static_cast<std::size_t>(layer)][static_cast<std::size_t>(direction)];
      slot.w_input = graph.parameter(base + "w_input", w.w_input);
      slot.w_recur = graph.parameter(base + "w_recur", w.w_recur);
      slot.bias = graph.parameter(base + "bias", w.bias);
    }
  }
  nodes.attn_proj = graph.parameter(prefix + "attn_proj", params.attn_proj);
  nodes.attn_query = graph.parameter(prefix + "attn_query", params.attn_query);
  return nodes;
}

std::pair<NodeId, NodeId> lstm_cell_node(Graph& graph, NodeId x, NodeId h_prev, NodeId c_prev,
                                         const LstmWeightNodes& weights, int hidden) {
  const NodeId pre = graph.add(
      graph.add(graph.matvec(weights.w_input, x), graph.matvec(weights.w_recur, h_prev)),
      weights.bias);
  const NodeId gate_in = graph.sigmoid(graph.slice(pre, 0, hidden));
  const NodeId gate_forget = graph.sigmoid(graph.slice(pre, hidden, hidden));
  const NodeId candidate = graph.tanh(graph.slice(pre, 2 * hidden, hidden));
  const NodeId gate_out = graph.sigmoid(graph.slice(pre, 3 * hidden, hidden));
  const NodeId c = graph.add(graph.mul(gate_forget, c_prev), graph.mul(gate_in, candidate));
  const NodeId h = graph.mul(gate_out, graph.tanh(c));
  return {h, c};
}

namespace {

// One direction of one layer over the whole sequence; zero initial state.
std::vector<NodeId> run_direction(Graph& graph, const std::vector<NodeId>& inputs,
                                  const EncoderNodes::LayerNodes& layer, int hidden,
                                  bool backward) {
  const int t = static_cast<int>(inputs.size());
  LstmWeightNodes weights{layer.w_input, layer.w_recur, layer.bias};
  NodeId h = graph.input(Tensor::zeros({hidden}));
  NodeId c = graph.input(Tensor::zeros({hidden}));
  std::vector<NodeId> states(inputs.size());
  for (int step = 0; step < t; ++step) {
    const int k = backward ? t - 1 - step : step;
    std::tie(h, c) = lstm_cell_node(graph, inputs[static_cast<std::size_t>(k)], h, c, weights, hidden);
    states[static_cast<std::size_t>(k)] = h;
  }
  return states;
}

std::vector<NodeId> run_layer(Graph& graph, const std::vector<NodeId>& inputs,
                              const EncoderNodes::LayerNodes& fwd,
                              const EncoderNodes::LayerNodes& bwd, int hidden) {
  const std::vector<NodeId> forward = run_direction(graph, inputs, fwd, hidden, false);
  const std::vector<NodeId> backward = run_direction(graph, inputs, bwd, hidden, true);
  std::vector<NodeId> merged;
  merged.reserve(inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    merged.push_back(graph.concat({forward[k], backward[k]}));
  }
  return merged;
}

}  // namespace

std::vector<NodeId> bilstm_encode_nodes(Graph& graph, const std::vector<NodeId>& embedded,
                                        const EncoderNodes& nodes, int hidden) {
  if (embedded.empty()) throw DomainError("bilstm_encode: sequence must be non-empty");
  const std::vector<NodeId> layer1 =
      run_layer(graph, embedded, nodes.lstm[0][0], nodes.lstm[0][1], hidden);
  return run_layer(graph, layer1, nodes.lstm[1][0], nodes.lstm[1][1], hidden);
}

NodeId attention_pool_node(Graph& graph, const std::vector<NodeId>& states,
                           const EncoderNodes& nodes, NodeId* attn_weights_out) {
  if (states.empty()) throw DomainError("attention_pool: sequence must be non-empty");
  std::vector<NodeId> energies;
  energies.reserve(states.size());
  for (NodeId state : states) {
    energies.push_back(
        graph.dot(nodes.attn_query, graph.tanh(graph.matvec(nodes.attn_proj, state))));
  }
  const NodeId weights = graph.softmax(graph.concat(energies));
  if (attn_weights_out != nullptr) *attn_weights_out = weights;
  NodeId pooled = graph.scale(states[0], graph.slice(weights, 0, 1));
  for (std::size_t k = 1; k < states.size(); ++k) {
    pooled = graph.add(pooled, graph.scale(states[k], graph.slice(weights, static_cast<int>(k), 1)));
  }
  return pooled;
}

NodeId encode_expression_node(Graph& graph, const EncoderNodes& nodes,
                              const std::vector<int>& token_ids, int hidden) {
  if (token_ids.empty()) {
    return graph.input(Tensor::zeros({2 * hidden}));
  }
  std::vector<NodeId> embedded;
  embedded.reserve(token_ids.size());
  for (int id : token_ids) embedded.push_back(graph.row(nodes.embedding, id));
  const std::vector<NodeId> states = bilstm_encode_nodes(graph, embedded, nodes, hidden);
  return attention_pool_node(graph, states, nodes);
}

std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                                    const LstmWeights& weights) {
  Graph graph;
  const LstmWeightNodes nodes{graph.parameter("w_input", weights.w_input),
                              graph.parameter("w_recur", weights.w_recur),
                              graph.parameter("bias", weights.bias)};
  const auto [h, c] = lstm_cell_node(graph, graph.input(x), graph.input(h_prev),
                                     graph.input(c_prev), nodes, weights.hidden_size());
  return {graph.value(h), graph.value(c)};
}

Tensor bilstm_encode(const std::vector<Tensor>& embedded, const EncoderParams& params) {
  if (embedded.empty()) throw DomainError("bilstm_encode: sequence must be non-empty");
  Graph graph;
  const EncoderNodes nodes = register_encoder(graph, params, "");
  std::vector<NodeId> inputs;
  inputs.reserve(embedded.size());
  for (const Tensor& e : embedded) inputs.push_back(graph.input(e));
  const std::vector<NodeId> states =
      bilstm_encode_nodes(graph, inputs, nodes, params.hidden_size());
  Tensor out({static_cast<int>(states.size()), params.output_dim()});
  for (std::size_t k = 0; k < states.size(); ++k) {
    const Tensor& state = graph.value(states[k]);
    for (int j = 0; j < params.output_dim(); ++j) out.at(static_cast<int>(k), j) = state[j];
  }
  return out;
}

Tensor attention_pool(const Tensor& states, const EncoderParams& params) {
  if (states.ndim() != 2 || states.dim(1) != params.output_dim()) {
    throw ShapeError("attention_pool: states " + states.shape_str() + " must be [t x " +
                     std::to_string(params.output_dim()) + "]");
  }
  Graph graph;
  const EncoderNodes nodes = register_encoder(graph, params, "");
  std::vector<NodeId> rows;
  rows.reserve(static_cast<std::size_t>(states.dim(0)));
  for (int k = 0; k < states.dim(0); ++k) {
    std::vector<double> values(static_cast<std::size_t>(states.dim(1)));
    for (int j = 0; j < states.dim(1); ++j) values[static_cast<std::size_t>(j)] = states.at(k, j);
    rows.push_back(graph.input(Tensor::vec(std::move(values))));
  }
  return graph.value(attention_pool_node(graph, rows, nodes));
}

Tensor encode_expression(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                         const EncoderParams& params) {
  Graph graph;
  const EncoderNodes nodes = register_encoder(graph, params, "");
  const NodeId pooled =
      encode_expression_node(graph, nodes, encode_tokens(tokens, vocab), params.hidden_size());
  return graph.value(pooled);
}

}  // namespace refsieve

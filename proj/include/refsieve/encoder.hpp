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

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "refsieve/data.hpp"
#include "refsieve/graph.hpp"
#include "refsieve/rng.hpp"
#include "refsieve/tensor.hpp"

namespace refsieve {

// Standard non-peephole LSTM weights for one direction of one layer. The
// input, recurrent and bias tensors stack the four gates row-wise in the
// fixed order input gate, forget gate, candidate, output gate.
struct LstmWeights {
  Tensor w_input;  // [4h x d_in]
  Tensor w_recur;  // [4h x h]
  Tensor bias;     // [4h]

  int hidden_size() const { return w_recur.dim(1); }
  int input_size() const { return w_input.dim(1); }

  friend bool operator==(const LstmWeights&, const LstmWeights&) = default;
};

// Expression encoder: embedding lookup, a 2-layer bidirectional LSTM, and
// additive attention pooling over the top-layer states. The pooled output
// has size 2h regardless of expression length; the empty expression encodes
// to the zero vector.
struct EncoderParams {
  Tensor embedding;                                 // [|V| x d_emb]
  std::array<std::array<LstmWeights, 2>, 2> lstm;   // [layer][0 = forward, 1 = backward]
  Tensor attn_proj;                                 // [d_a x 2h]
  Tensor attn_query;                                // [d_a]

  int hidden_size() const { return lstm[0][0].hidden_size(); }
  int embed_dim() const { return embedding.dim(1); }
  int output_dim() const { return 2 * hidden_size(); }

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

// Uniform [-0.08, 0.08] weights with forget-gate biases at 1.0. The
// embedding table is passed in so callers can splice in pretrained rows.
EncoderParams init_encoder(Tensor embedding, int hidden, int attn_dim, SplitMix64& rng);

// Graph-side handles to one registered copy of the encoder parameters.
struct EncoderNodes {
  NodeId embedding;
  struct LayerNodes {
    NodeId w_input, w_recur, bias;
  };
  std::array<std::array<LayerNodes, 2>, 2> lstm;
  NodeId attn_proj, attn_query;
};

// Registers every encoder tensor as a named parameter ("<prefix>embedding",
// "<prefix>lstm<L>.<fwd|bwd>.w_input", ..., "<prefix>attn_query").
EncoderNodes register_encoder(Graph& graph, const EncoderParams& params,
                              const std::string& prefix);

struct LstmWeightNodes {
  NodeId w_input, w_recur, bias;
};

// One cell update; returns (h, c).
std::pair<NodeId, NodeId> lstm_cell_node(Graph& graph, NodeId x, NodeId h_prev, NodeId c_prev,
                                         const LstmWeightNodes& weights, int hidden);

// Per-step top-layer states, each of size 2h, for a non-empty sequence.
std::vector<NodeId> bilstm_encode_nodes(Graph& graph, const std::vector<NodeId>& embedded,
                                        const EncoderNodes& nodes, int hidden);

// Additive attention pooling over per-step states. attn_weights_out, when
// given, receives the softmaxed attention weight node.
NodeId attention_pool_node(Graph& graph, const std::vector<NodeId>& states,
                           const EncoderNodes& nodes, NodeId* attn_weights_out = nullptr);

// Whole encoder over token ids. Empty input yields a zero-vector input node.
NodeId encode_expression_node(Graph& graph, const EncoderNodes& nodes,
                              const std::vector<int>& token_ids, int hidden);

// Value-level entry points; each builds a throwaway graph and evaluates it,
// so training and inference share a single implementation.
std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                                    const LstmWeights& weights);
Tensor bilstm_encode(const std::vector<Tensor>& embedded, const EncoderParams& params);  // [t x 2h]
Tensor attention_pool(const Tensor& states, const EncoderParams& params);                // [2h]
Tensor encode_expression(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                         const EncoderParams& params);  // [2h]

}  // namespace refsieve

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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "refsieve/error.hpp"
#include "refsieve/rng.hpp"

namespace refsieve {
namespace {

Tensor random_tensor(std::vector<int> shape, SplitMix64& rng) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-0.5, 0.5);
  return t;
}

LstmWeights random_weights(int input_dim, int hidden, SplitMix64& rng) {
  LstmWeights w;
  w.w_input = random_tensor({4 * hidden, input_dim}, rng);
  w.w_recur = random_tensor({4 * hidden, hidden}, rng);
  w.bias = random_tensor({4 * hidden}, rng);
  return w;
}

// Plain scalar re-implementation of the cell update, kept independent of the
// graph path on purpose.
std::pair<std::vector<double>, std::vector<double>> scalar_lstm_cell(
    const std::vector<double>& x, const std::vector<double>& h_prev,
    const std::vector<double>& c_prev, const LstmWeights& w) {
  const int hidden = w.hidden_size();
  const int input_dim = w.input_size();
  auto gate_row = [&](int row) {
    double acc = w.bias[row];
    for (int j = 0; j < input_dim; ++j) acc += w.w_input.at(row, j) * x[static_cast<std::size_t>(j)];
    for (int j = 0; j < hidden; ++j) acc += w.w_recur.at(row, j) * h_prev[static_cast<std::size_t>(j)];
    return acc;
  };
  auto logistic = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  std::vector<double> h(static_cast<std::size_t>(hidden));
  std::vector<double> c(static_cast<std::size_t>(hidden));
  for (int u = 0; u < hidden; ++u) {
    const double gi = logistic(gate_row(u));
    const double gf = logistic(gate_row(hidden + u));
    const double gg = std::tanh(gate_row(2 * hidden + u));
    const double go = logistic(gate_row(3 * hidden + u));
    c[static_cast<std::size_t>(u)] = gf * c_prev[static_cast<std::size_t>(u)] + gi * gg;
    h[static_cast<std::size_t>(u)] = go * std::tanh(c[static_cast<std::size_t>(u)]);
  }
  return {h, c};
}

TEST(LstmCellTest, AllZeroWeightsGiveZeroState) {
  LstmWeights w;
  w.w_input = Tensor::zeros({12, 2});
  w.w_recur = Tensor::zeros({12, 3});
  w.bias = Tensor::zeros({12});
  const auto [h, c] = lstm_cell(Tensor::vec({5.0, -3.0}), Tensor::zeros({3}), Tensor::zeros({3}), w);
  EXPECT_EQ(h, Tensor::zeros({3}));
  EXPECT_EQ(c, Tensor::zeros({3}));
}

TEST(LstmCellTest, SaturatedForgetGatePreservesCellState) {
  const int hidden = 2;
  LstmWeights w;
  w.w_input = Tensor::zeros({4 * hidden, 3});
  w.w_recur = Tensor::zeros({4 * hidden, hidden});
  w.bias = Tensor::zeros({4 * hidden});
  // Forget rows saturate high; input-gate rows saturate low so nothing new
  // is written.
  for (int u = 0; u < hidden; ++u) {
    w.bias[hidden + u] = 50.0;
    w.bias[u] = -50.0;
  }
  const Tensor c_prev = Tensor::vec({0.7, -0.4});
  const auto [h, c] = lstm_cell(Tensor::vec({1.0, 2.0, 3.0}), Tensor::zeros({hidden}), c_prev, w);
  EXPECT_NEAR(c[0], c_prev[0], 1e-12);
  EXPECT_NEAR(c[1], c_prev[1], 1e-12);
}

TEST(LstmCellTest, MatchesScalarOracle) {
  SplitMix64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const int hidden = 3;
    const LstmWeights w = random_weights(4, hidden, rng);
    const Tensor x = random_tensor({4}, rng);
    const Tensor h_prev = random_tensor({hidden}, rng);
    const Tensor c_prev = random_tensor({hidden}, rng);
    const auto [h, c] = lstm_cell(x, h_prev, c_prev, w);
    const auto [oh, oc] = scalar_lstm_cell(x.data(), h_prev.data(), c_prev.data(), w);
    for (int u = 0; u < hidden; ++u) {
      EXPECT_NEAR(h[u], oh[static_cast<std::size_t>(u)], 1e-12);
      EXPECT_NEAR(c[u], oc[static_cast<std::size_t>(u)], 1e-12);
    }
  }
}

EncoderParams random_encoder(int vocab_size, int d_emb, int hidden, int attn_dim,
                             std::uint64_t seed) {
  SplitMix64 rng(seed);
  return init_encoder(random_tensor({vocab_size, d_emb}, rng), hidden, attn_dim, rng);
}

TEST(BilstmTest, SingleStepTiedDirectionsAgree) {
  EncoderParams params = random_encoder(6, 3, 4, 3, 21);
  params.lstm[0][1] = params.lstm[0][0];
  params.lstm[1][1] = params.lstm[1][0];
  const Tensor out = bilstm_encode({Tensor::vec({0.3, -0.1, 0.5})}, params);
  ASSERT_EQ(out.shape(), (std::vector<int>{1, 8}));
  for (int j = 0; j < 4; ++j) {
    EXPECT_NEAR(out.at(0, j), out.at(0, 4 + j), 1e-12);
  }
}

TEST(BilstmTest, AllZeroWeightsGiveZeroOutputs) {
  EncoderParams params = random_encoder(6, 3, 4, 3, 22);
  for (int layer = 0; layer < 2; ++layer) {
    for (int dir = 0; dir < 2; ++dir) {
      LstmWeights& w = params.lstm[static_cast<std::size_t>(layer)][static_cast<std::size_t>(dir)];
      w.w_input = Tensor::zeros(w.w_input.shape());
      w.w_recur = Tensor::zeros(w.w_recur.shape());
      w.bias = Tensor::zeros(w.bias.shape());
    }
  }
  const Tensor out =
      bilstm_encode({Tensor::vec({1.0, 2.0, 3.0}), Tensor::vec({-1.0, 0.0, 1.0})}, params);
  EXPECT_EQ(out, Tensor::zeros({2, 8}));
}

TEST(BilstmTest, PalindromeWithTiedSymmetricWeightsIsReverseSymmetric) {
  const int hidden = 3;
  EncoderParams params = random_encoder(6, 2, hidden, 3, 23);
  // Tie the two directions of both layers, and make the second layer's input
  // weights identical on the forward-state and backward-state halves so the
  // layer cannot tell the halves apart.
  params.lstm[0][1] = params.lstm[0][0];
  for (int row = 0; row < 4 * hidden; ++row) {
    for (int col = 0; col < hidden; ++col) {
      params.lstm[1][0].w_input.at(row, hidden + col) = params.lstm[1][0].w_input.at(row, col);
    }
  }
  params.lstm[1][1] = params.lstm[1][0];

  const Tensor a = Tensor::vec({0.4, -0.2});
  const Tensor b = Tensor::vec({-0.7, 0.1});
  const Tensor out = bilstm_encode({a, b, a}, params);  // palindrome
  ASSERT_EQ(out.shape(), (std::vector<int>{3, 2 * hidden}));
  for (int k = 0; k < 3; ++k) {
    const int mirror = 2 - k;
    for (int j = 0; j < hidden; ++j) {
      EXPECT_NEAR(out.at(k, j), out.at(mirror, hidden + j), 1e-12);
      EXPECT_NEAR(out.at(k, hidden + j), out.at(mirror, j), 1e-12);
    }
  }
}

TEST(AttentionTest, SingleStateIsReturnedUnchanged) {
  const EncoderParams params = random_encoder(6, 3, 2, 3, 31);
  Tensor states({1, 4}, {0.1, 0.2, 0.3, 0.4});
  const Tensor pooled = attention_pool(states, params);
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(pooled[j], states.at(0, j), 1e-12);
}

TEST(AttentionTest, ZeroQueryAveragesStates) {
  EncoderParams params = random_encoder(6, 3, 2, 3, 32);
  params.attn_query = Tensor::zeros({3});
  Tensor states({2, 4}, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0});
  const Tensor pooled = attention_pool(states, params);
  for (int j = 0; j < 4; ++j) {
    EXPECT_NEAR(pooled[j], 0.5 * (states.at(0, j) + states.at(1, j)), 1e-12);
  }
}

TEST(AttentionTest, IdenticalStatesPoolToThatState) {
  const EncoderParams params = random_encoder(6, 3, 2, 3, 33);
  Tensor states({2, 4}, {0.5, -0.5, 0.25, 1.0, 0.5, -0.5, 0.25, 1.0});
  const Tensor pooled = attention_pool(states, params);
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(pooled[j], states.at(0, j), 1e-12);
}

TEST(AttentionTest, WeightsAreAProbabilityDistribution) {
  const EncoderParams params = random_encoder(8, 3, 3, 4, 34);
  SplitMix64 rng(77);
  Graph graph;
  const EncoderNodes nodes = register_encoder(graph, params, "");
  std::vector<NodeId> states;
  for (int k = 0; k < 5; ++k) states.push_back(graph.input(random_tensor({6}, rng)));
  NodeId weights;
  attention_pool_node(graph, states, nodes, &weights);
  const Tensor& alpha = graph.value(weights);
  double total = 0.0;
  for (int k = 0; k < 5; ++k) {
    EXPECT_GE(alpha[k], 0.0);
    total += alpha[k];
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
}

Vocabulary small_vocab() {
  Vocabulary vocab;
  vocab.add("red");
  vocab.add("cup");
  vocab.add("table");
  return vocab;
}

TEST(EncodeExpressionTest, EmptyExpressionIsZeroVector) {
  const EncoderParams params = random_encoder(5, 3, 4, 3, 41);
  EXPECT_EQ(encode_expression({}, small_vocab(), params), Tensor::zeros({8}));
}

TEST(EncodeExpressionTest, OovFallsBackToUnknown) {
  const EncoderParams params = random_encoder(5, 3, 4, 3, 42);
  const Vocabulary vocab = small_vocab();
  EXPECT_EQ(encode_expression({"zzz"}, vocab, params),
            encode_expression({"<unk>"}, vocab, params));
}

TEST(EncodeExpressionTest, DeterministicRepeat) {
  const EncoderParams params = random_encoder(5, 3, 4, 3, 43);
  const Vocabulary vocab = small_vocab();
  const std::vector<std::string> tokens = {"red", "cup"};
  EXPECT_EQ(encode_expression(tokens, vocab, params), encode_expression(tokens, vocab, params));
}

TEST(EncodeExpressionTest, OutputDimIsFixedAcrossLengths) {
  const EncoderParams params = random_encoder(5, 3, 4, 3, 44);
  const Vocabulary vocab = small_vocab();
  for (const auto& tokens : std::vector<std::vector<std::string>>{
           {}, {"red"}, {"red", "cup"}, {"red", "cup", "table", "cup", "red"}}) {
    EXPECT_EQ(encode_expression(tokens, vocab, params).shape(), (std::vector<int>{8}));
  }
}

TEST(EncodeExpressionTest, OrderSensitivityExists) {
  const EncoderParams params = random_encoder(5, 3, 4, 3, 45);
  const Vocabulary vocab = small_vocab();
  const Tensor ab = encode_expression({"red", "cup"}, vocab, params);
  const Tensor ba = encode_expression({"cup", "red"}, vocab, params);
  EXPECT_NE(ab, ba);
}

TEST(EncoderGradCheckTest, FullEncoderPassesEndToEnd) {
  const EncoderParams params = random_encoder(6, 3, 3, 4, 51);
  Graph graph;
  const EncoderNodes nodes = register_encoder(graph, params, "");
  const NodeId pooled = encode_expression_node(graph, nodes, {2, 4, 3}, 3);
  SplitMix64 rng(52);
  const NodeId loss = graph.dot(pooled, graph.input(random_tensor({6}, rng)));
  const FiniteDifferenceReport report = finite_difference_check(graph, loss, 1e-4, 1e-4);
  EXPECT_TRUE(report.passed) << report.summary();
}

TEST(EncoderInitTest, ForgetBiasStartsAtOne) {
  SplitMix64 rng(61);
  const EncoderParams params = init_encoder(random_tensor({5, 3}, rng), 4, 3, rng);
  for (int layer = 0; layer < 2; ++layer) {
    for (int dir = 0; dir < 2; ++dir) {
      const LstmWeights& w =
          params.lstm[static_cast<std::size_t>(layer)][static_cast<std::size_t>(dir)];
      for (int u = 0; u < 4; ++u) {
        EXPECT_DOUBLE_EQ(w.bias[4 + u], 1.0);
        EXPECT_DOUBLE_EQ(w.bias[u], 0.0);
      }
      for (std::int64_t i = 0; i < w.w_input.size(); ++i) {
        EXPECT_LE(std::abs(w.w_input[i]), 0.08);
      }
    }
  }
}

}  // namespace
}  // namespace refsieve

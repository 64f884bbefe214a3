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

#include "refsieve/graph.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "refsieve/error.hpp"
#include "refsieve/rng.hpp"
#include "refsieve/tensor.hpp"

namespace refsieve {
namespace {

Tensor random_tensor(std::vector<int> shape, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

TEST(GraphTest, SumGradientIsOnes) {
  Graph g;
  const NodeId x = g.parameter("x", Tensor::vec({1.0, 2.0, 3.0}));
  const NodeId loss = g.sum(x);
  const auto grads = g.gradients(loss);
  EXPECT_EQ(grads.at("x"), Tensor::vec({1.0, 1.0, 1.0}));
}

TEST(GraphTest, SoftmaxCrossEntropyClosedFormGradient) {
  Graph g;
  const NodeId scores = g.parameter("scores", Tensor::vec({0.0, 0.0}));
  const NodeId loss = g.softmax_cross_entropy(scores, 0);
  EXPECT_NEAR(g.value(loss)[0], std::log(2.0), 1e-12);
  const auto grads = g.gradients(loss);
  EXPECT_NEAR(grads.at("scores")[0], -0.5, 1e-12);
  EXPECT_NEAR(grads.at("scores")[1], 0.5, 1e-12);
}

TEST(GraphTest, UnusedParameterGetsZeroGradient) {
  Graph g;
  const NodeId x = g.parameter("x", Tensor::vec({1.0, 2.0}));
  const NodeId unused = g.parameter("w", Tensor::zeros({3, 3}));
  (void)unused;
  const auto grads = g.gradients(g.sum(x));
  EXPECT_EQ(grads.at("w"), Tensor::zeros({3, 3}));
}

TEST(GraphTest, NonScalarLossIsRejected) {
  Graph g;
  const NodeId x = g.parameter("x", Tensor::vec({1.0, 2.0}));
  EXPECT_THROW(g.gradients(x), DomainError);
}

TEST(GraphTest, DuplicateParameterNameIsRejected) {
  Graph g;
  g.parameter("w", Tensor::vec({1.0}));
  EXPECT_THROW(g.parameter("w", Tensor::vec({2.0})), DomainError);
}

TEST(GraphTest, RecomputeReplaysFromLeafValues) {
  Graph g;
  const NodeId x = g.parameter("x", Tensor::vec({1.0, 2.0}));
  const NodeId y = g.sum(g.mul(x, x));
  EXPECT_DOUBLE_EQ(g.value(y)[0], 5.0);
  g.leaf_value(x) = Tensor::vec({3.0, 4.0});
  g.recompute();
  EXPECT_DOUBLE_EQ(g.value(y)[0], 25.0);
}

TEST(GraphTest, LeafValueRejectsDerivedNodes) {
  Graph g;
  const NodeId x = g.parameter("x", Tensor::vec({1.0}));
  const NodeId y = g.sigmoid(x);
  EXPECT_THROW(g.leaf_value(y), DomainError);
}

TEST(GraphTest, ForwardIsDeterministic) {
  auto build = [] {
    Graph g;
    SplitMix64 rng(5);
    const NodeId w = g.parameter("w", random_tensor({4, 3}, rng));
    const NodeId x = g.input(random_tensor({3}, rng));
    return g.value(g.softmax(g.matvec(w, x)));
  };
  EXPECT_EQ(build(), build());
}

// Every differentiable op goes through the central-difference check at
// h = 1e-4 with relative tolerance 1e-4, in double precision.
struct OpCase {
  const char* name;
  // Builds a scalar loss over at least one parameter.
  NodeId (*build)(Graph&, SplitMix64&);
};

NodeId build_matvec(Graph& g, SplitMix64& rng) {
  const NodeId w = g.parameter("w", random_tensor({3, 4}, rng));
  const NodeId x = g.parameter("x", random_tensor({4}, rng));
  return g.sum(g.matvec(w, x));
}

NodeId build_add(Graph& g, SplitMix64& rng) {
  const NodeId a = g.parameter("a", random_tensor({5}, rng));
  const NodeId b = g.parameter("b", random_tensor({5}, rng));
  return g.sum(g.mul(g.add(a, b), g.add(a, b)));
}

NodeId build_mul(Graph& g, SplitMix64& rng) {
  const NodeId a = g.parameter("a", random_tensor({5}, rng));
  const NodeId b = g.parameter("b", random_tensor({5}, rng));
  return g.sum(g.mul(a, b));
}

NodeId build_scale(Graph& g, SplitMix64& rng) {
  const NodeId x = g.parameter("x", random_tensor({4}, rng));
  const NodeId s = g.parameter("s", random_tensor({1}, rng));
  return g.sum(g.scale(x, s));
}

NodeId build_dot(Graph& g, SplitMix64& rng) {
  const NodeId a = g.parameter("a", random_tensor({6}, rng));
  const NodeId b = g.parameter("b", random_tensor({6}, rng));
  return g.dot(a, b);
}

NodeId build_concat(Graph& g, SplitMix64& rng) {
  const NodeId a = g.parameter("a", random_tensor({2}, rng));
  const NodeId b = g.parameter("b", random_tensor({3}, rng));
  const NodeId joined = g.concat({a, b});
  return g.sum(g.mul(joined, joined));
}

NodeId build_slice(Graph& g, SplitMix64& rng) {
  const NodeId x = g.parameter("x", random_tensor({6}, rng));
  const NodeId part = g.slice(x, 2, 3);
  return g.sum(g.mul(part, part));
}

NodeId build_row(Graph& g, SplitMix64& rng) {
  const NodeId m = g.parameter("m", random_tensor({4, 3}, rng));
  const NodeId r = g.row(m, 2);
  return g.sum(g.mul(r, r));
}

NodeId build_sigmoid(Graph& g, SplitMix64& rng) {
  const NodeId x = g.parameter("x", random_tensor({5}, rng, -3.0, 3.0));
  return g.sum(g.sigmoid(x));
}

NodeId build_tanh(Graph& g, SplitMix64& rng) {
  const NodeId x = g.parameter("x", random_tensor({5}, rng, -3.0, 3.0));
  return g.sum(g.tanh(x));
}

NodeId build_softmax(Graph& g, SplitMix64& rng) {
  const NodeId x = g.parameter("x", random_tensor({5}, rng, -2.0, 2.0));
  const NodeId weights = g.input(random_tensor({5}, rng));
  return g.dot(g.softmax(x), weights);
}

NodeId build_l2_normalize(Graph& g, SplitMix64& rng) {
  const NodeId x = g.parameter("x", random_tensor({5}, rng, 0.5, 2.0));
  const NodeId weights = g.input(random_tensor({5}, rng));
  return g.dot(g.l2_normalize(x, 1e-8), weights);
}

NodeId build_sum(Graph& g, SplitMix64& rng) {
  const NodeId x = g.parameter("x", random_tensor({7}, rng));
  return g.sum(g.mul(x, x));
}

NodeId build_softmax_xent(Graph& g, SplitMix64& rng) {
  const NodeId x = g.parameter("x", random_tensor({5}, rng, -2.0, 2.0));
  return g.softmax_cross_entropy(x, 3);
}

NodeId build_sigmoid_xent(Graph& g, SplitMix64& rng) {
  const NodeId x = g.parameter("x", random_tensor({4}, rng, -2.0, 2.0));
  return g.sigmoid_cross_entropy(x, {1.0, 0.0, 1.0, 0.0});
}

TEST(GradCheckTest, EveryRegisteredOpPasses) {
  const OpCase cases[] = {
      {"matvec", build_matvec},       {"add", build_add},
      {"mul", build_mul},             {"scale", build_scale},
      {"dot", build_dot},             {"concat", build_concat},
      {"slice", build_slice},         {"row", build_row},
      {"sigmoid", build_sigmoid},     {"tanh", build_tanh},
      {"softmax", build_softmax},     {"l2_normalize", build_l2_normalize},
      {"sum", build_sum},             {"softmax_xent", build_softmax_xent},
      {"sigmoid_xent", build_sigmoid_xent},
  };
  for (const OpCase& c : cases) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      SplitMix64 rng(seed * 7919);
      Graph g;
      const NodeId loss = c.build(g, rng);
      const FiniteDifferenceReport report = finite_difference_check(g, loss, 1e-4, 1e-4);
      EXPECT_TRUE(report.passed) << c.name << " seed " << seed << ": " << report.summary();
    }
  }
}

TEST(GradCheckTest, LinearSoftmaxCrossEntropyToyGraph) {
  SplitMix64 rng(42);
  Graph g;
  const NodeId w = g.parameter("w", random_tensor({4, 6}, rng));
  const NodeId x = g.input(random_tensor({6}, rng));
  const NodeId loss = g.softmax_cross_entropy(g.matvec(w, x), 1);
  const FiniteDifferenceReport report = finite_difference_check(g, loss, 1e-4, 1e-4);
  EXPECT_TRUE(report.passed) << report.summary();
}

TEST(GradCheckTest, ZeroLossHasVanishingError) {
  Graph g;
  const NodeId x = g.parameter("x", Tensor::vec({1.0, 2.0, 3.0}));
  const NodeId loss = g.sum(g.mul(x, g.input(Tensor::zeros({3}))));
  const FiniteDifferenceReport report = finite_difference_check(g, loss, 1e-4, 1e-4);
  EXPECT_TRUE(report.passed);
  EXPECT_LT(report.max_rel_error, 1e-12);
}

TEST(GradCheckTest, CorruptedGradientFailsAsNegativeControl) {
  SplitMix64 rng(8);
  Graph g;
  const NodeId w = g.parameter("w", random_tensor({3, 3}, rng));
  const NodeId x = g.input(random_tensor({3}, rng));
  const NodeId loss = g.softmax_cross_entropy(g.matvec(w, x), 0);
  Graph::GradientMap corrupted = g.gradients(loss);
  corrupted.at("w")[0] += 0.5;
  const FiniteDifferenceReport report = finite_difference_check(g, loss, corrupted, 1e-4, 1e-4);
  EXPECT_FALSE(report.passed);
}

TEST(GradCheckTest, SamplesCoordinatesAboveCutoff) {
  SplitMix64 rng(3);
  Graph g;
  const NodeId w = g.parameter("w", random_tensor({20, 10}, rng));
  const NodeId x = g.input(random_tensor({10}, rng));
  const NodeId loss = g.softmax_cross_entropy(g.matvec(w, x), 0);
  const FiniteDifferenceReport report = finite_difference_check(g, loss, 1e-4, 1e-4, 17, 50);
  EXPECT_TRUE(report.passed) << report.summary();
  EXPECT_EQ(report.coords_checked, 50);
  EXPECT_EQ(report.coords_total, 200);
}

TEST(GradCheckTest, StepMustBePositive) {
  Graph g;
  const NodeId x = g.parameter("x", Tensor::vec({1.0}));
  EXPECT_THROW(finite_difference_check(g, g.sum(x), 0.0, 1e-4), DomainError);
}

TEST(GraphTest, ValuesStayFiniteThroughDeepChain) {
  SplitMix64 rng(21);
  Graph g;
  NodeId x = g.parameter("x", random_tensor({8}, rng, -100.0, 100.0));
  NodeId h = x;
  for (int i = 0; i < 10; ++i) {
    h = g.l2_normalize(g.tanh(h), 1e-8);
  }
  const NodeId loss = g.softmax_cross_entropy(h, 0);
  EXPECT_TRUE(g.value(loss).all_finite());
  const auto grads = g.gradients(loss);
  EXPECT_TRUE(grads.at("x").all_finite());
}

}  // namespace
}  // namespace refsieve

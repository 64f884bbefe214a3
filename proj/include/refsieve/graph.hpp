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
#include <map>
#include <string>
#include <vector>

#include "refsieve/tensor.hpp"

namespace refsieve {

enum class OpKind {
  kInput,
  kParameter,
  kMatVec,
  kAdd,
  kMul,
  kScale,
  kDot,
  kConcat,
  kSlice,
  kRow,
  kSigmoid,
  kTanh,
  kSoftmax,
  kL2Normalize,
  kSum,
  kSoftmaxXent,
  kSigmoidXent,
};

const char* op_name(OpKind kind);

struct NodeId {
  int index = -1;
  bool valid() const { return index >= 0; }
};

// Reverse-mode tape. Nodes are appended in topological order while the
// forward expression is built and values are computed eagerly, so inputs of
// a node always precede it. recompute() replays the whole tape from the
// current leaf values; the finite-difference checker and SGD both rely on
// that. The backward pass visits each node exactly once, in reverse tape
// order. A Graph instance is single-threaded.
class Graph {
 public:
  using GradientMap = std::map<std::string, Tensor>;

  // Leaves. Parameter names must be unique within a graph.
  NodeId input(Tensor value);
  NodeId parameter(const std::string& name, Tensor value);

  NodeId matvec(NodeId w, NodeId x);
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  // Vector times a scalar node of shape [1].
  NodeId scale(NodeId x, NodeId scalar);
  NodeId dot(NodeId a, NodeId b);
  NodeId concat(const std::vector<NodeId>& parts);
  NodeId slice(NodeId x, int offset, int length);
  // Row of a matrix node as a vector (embedding lookup).
  NodeId row(NodeId matrix, int row_index);
  NodeId sigmoid(NodeId x);
  NodeId tanh(NodeId x);
  NodeId softmax(NodeId x);
  NodeId l2_normalize(NodeId x, double epsilon);
  NodeId sum(NodeId x);
  // -log softmax(scores)[target], computed as logsumexp(scores) - scores[target].
  NodeId softmax_cross_entropy(NodeId scores, int target);
  // Mean binary cross-entropy of sigmoid(scores) against labels in {0, 1}.
  NodeId sigmoid_cross_entropy(NodeId scores, std::vector<double> labels);

  const Tensor& value(NodeId id) const;
  // Mutable storage of an input or parameter; other nodes are derived.
  Tensor& leaf_value(NodeId id);
  // Replays every node from the current leaf values.
  void recompute();

  // d(loss)/d(p) for every registered parameter p; parameters the loss does
  // not depend on get zero tensors. The loss node must be scalar.
  GradientMap gradients(NodeId loss);
  // Per-node gradient, valid after gradients().
  const Tensor& grad(NodeId id) const;

  int node_count() const { return static_cast<int>(nodes_.size()); }
  OpKind kind(NodeId id) const;
  std::vector<std::string> parameter_names() const;
  NodeId parameter_id(const std::string& name) const;

 private:
  struct Node {
    OpKind kind;
    std::vector<int> inputs;
    Tensor value;
    Tensor grad;
    std::string name;            // parameters only
    int arg0 = 0;                // slice offset / row index / xent target
    int arg1 = 0;                // slice length
    double scalar_arg = 0.0;     // l2_normalize epsilon
    std::vector<double> labels;  // sigmoid_cross_entropy targets
  };

  NodeId push(Node node);
  const Node& checked(NodeId id) const;
  Node& checked(NodeId id);
  void compute_value(Node& n);
  void backpropagate(Node& n);

  std::vector<Node> nodes_;
  std::vector<int> parameters_;
  std::map<std::string, int> parameter_index_;
};

struct FiniteDifferenceReport {
  bool passed = false;
  double max_rel_error = 0.0;
  double step = 0.0;
  double tolerance = 0.0;
  std::int64_t coords_checked = 0;
  std::int64_t coords_total = 0;
  std::string worst_parameter;
  std::int64_t worst_coordinate = -1;

  std::string summary() const;
};

// Central-difference check of analytic gradients: every parameter coordinate
// is perturbed by +/-step and (f(p+h) - f(p-h)) / 2h is compared against the
// analytic value. The relative error is |num - ana| / max(|num|, |ana|, 1),
// so near-zero gradients are compared absolutely. When the parameter count
// exceeds max_coords, a seeded random subset of coordinates is checked.
// Passes iff the max relative error stays below tolerance.
FiniteDifferenceReport finite_difference_check(Graph& graph, NodeId loss, double step,
                                               double tolerance, std::uint64_t seed = 0,
                                               std::int64_t max_coords = 4096);

// Same, but verifying a caller-supplied gradient map instead of computing
// one. Lets tests feed deliberately wrong gradients as a negative control.
FiniteDifferenceReport finite_difference_check(Graph& graph, NodeId loss,
                                               const Graph::GradientMap& analytic, double step,
                                               double tolerance, std::uint64_t seed = 0,
                                               std::int64_t max_coords = 4096);

}  // namespace refsieve

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

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "refsieve/error.hpp"
#include "refsieve/rng.hpp"

namespace refsieve {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kParameter: return "parameter";
    case OpKind::kMatVec: return "matvec";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kDot: return "dot";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kRow: return "row";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kL2Normalize: return "l2_normalize";
    case OpKind::kSum: return "sum";
    case OpKind::kSoftmaxXent: return "softmax_cross_entropy";
    case OpKind::kSigmoidXent: return "sigmoid_cross_entropy";
  }
  return "?";
}

namespace {

void require_vector(const Tensor& t, const char* op) {
  if (t.ndim() != 1) {
    throw ShapeError(std::string(op) + ": expected a vector, got " + t.shape_str());
  }
}

// Stable log(1 + exp(s)).
double softplus(double s) {
  if (s > 0.0) return s + std::log1p(std::exp(-s));
  return std::log1p(std::exp(s));
}

double stable_sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

}  // namespace

NodeId Graph::push(Node node) {
  compute_value(node);
  nodes_.push_back(std::move(node));
  return NodeId{static_cast<int>(nodes_.size()) - 1};
}

const Graph::Node& Graph::checked(NodeId id) const {
  if (!id.valid() || id.index >= node_count()) {
    throw DomainError("graph: node id " + std::to_string(id.index) + " out of range");
  }
  return nodes_[static_cast<std::size_t>(id.index)];
}

Graph::Node& Graph::checked(NodeId id) {
  return const_cast<Node&>(static_cast<const Graph*>(this)->checked(id));
}

NodeId Graph::input(Tensor value) {
  Node n;
  n.kind = OpKind::kInput;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return NodeId{node_count() - 1};
}

NodeId Graph::parameter(const std::string& name, Tensor value) {
  if (parameter_index_.count(name) != 0) {
    throw DomainError("graph: duplicate parameter name '" + name + "'");
  }
  Node n;
  n.kind = OpKind::kParameter;
  n.name = name;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  const int idx = node_count() - 1;
  parameters_.push_back(idx);
  parameter_index_[name] = idx;
  return NodeId{idx};
}

NodeId Graph::matvec(NodeId w, NodeId x) {
  Node n;
  n.kind = OpKind::kMatVec;
  n.inputs = {w.index, x.index};
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  Node n;
  n.kind = OpKind::kAdd;
  n.inputs = {a.index, b.index};
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  Node n;
  n.kind = OpKind::kMul;
  n.inputs = {a.index, b.index};
  return push(std::move(n));
}

NodeId Graph::scale(NodeId x, NodeId scalar) {
  Node n;
  n.kind = OpKind::kScale;
  n.inputs = {x.index, scalar.index};
  return push(std::move(n));
}

NodeId Graph::dot(NodeId a, NodeId b) {
  Node n;
  n.kind = OpKind::kDot;
  n.inputs = {a.index, b.index};
  return push(std::move(n));
}

NodeId Graph::concat(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw DomainError("concat: needs at least one part");
  Node n;
  n.kind = OpKind::kConcat;
  for (NodeId part : parts) n.inputs.push_back(part.index);
  return push(std::move(n));
}

NodeId Graph::slice(NodeId x, int offset, int length) {
  Node n;
  n.kind = OpKind::kSlice;
  n.inputs = {x.index};
  n.arg0 = offset;
  n.arg1 = length;
  return push(std::move(n));
}

NodeId Graph::row(NodeId matrix, int row_index) {
  Node n;
  n.kind = OpKind::kRow;
  n.inputs = {matrix.index};
  n.arg0 = row_index;
  return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId x) {
  Node n;
  n.kind = OpKind::kSigmoid;
  n.inputs = {x.index};
  return push(std::move(n));
}

NodeId Graph::tanh(NodeId x) {
  Node n;
  n.kind = OpKind::kTanh;
  n.inputs = {x.index};
  return push(std::move(n));
}

NodeId Graph::softmax(NodeId x) {
  Node n;
  n.kind = OpKind::kSoftmax;
  n.inputs = {x.index};
  return push(std::move(n));
}

NodeId Graph::l2_normalize(NodeId x, double epsilon) {
  if (epsilon <= 0.0) throw DomainError("l2_normalize: epsilon must be positive");
  Node n;
  n.kind = OpKind::kL2Normalize;
  n.inputs = {x.index};
  n.scalar_arg = epsilon;
  return push(std::move(n));
}

NodeId Graph::sum(NodeId x) {
  Node n;
  n.kind = OpKind::kSum;
  n.inputs = {x.index};
  return push(std::move(n));
}

NodeId Graph::softmax_cross_entropy(NodeId scores, int target) {
  Node n;
  n.kind = OpKind::kSoftmaxXent;
  n.inputs = {scores.index};
  n.arg0 = target;
  return push(std::move(n));
}

NodeId Graph::sigmoid_cross_entropy(NodeId scores, std::vector<double> labels) {
  Node n;
  n.kind = OpKind::kSigmoidXent;
  n.inputs = {scores.index};
  n.labels = std::move(labels);
  return push(std::move(n));
}

const Tensor& Graph::value(NodeId id) const { return checked(id).value; }

Tensor& Graph::leaf_value(NodeId id) {
  Node& n = checked(id);
  if (n.kind != OpKind::kInput && n.kind != OpKind::kParameter) {
    throw DomainError(std::string("graph: node ") + op_name(n.kind) + " is derived, not a leaf");
  }
  return n.value;
}

const Tensor& Graph::grad(NodeId id) const { return checked(id).grad; }

OpKind Graph::kind(NodeId id) const { return checked(id).kind; }

std::vector<std::string> Graph::parameter_names() const {
  std::vector<std::string> names;
  names.reserve(parameters_.size());
  for (int idx : parameters_) names.push_back(nodes_[static_cast<std::size_t>(idx)].name);
  return names;
}

NodeId Graph::parameter_id(const std::string& name) const {
  auto it = parameter_index_.find(name);
  if (it == parameter_index_.end()) {
    throw DomainError("graph: no parameter named '" + name + "'");
  }
  return NodeId{it->second};
}

void Graph::compute_value(Node& n) {
  auto in = [&](int i) -> const Tensor& {
    return nodes_[static_cast<std::size_t>(n.inputs[static_cast<std::size_t>(i)])].value;
  };
  switch (n.kind) {
    case OpKind::kInput:
    case OpKind::kParameter:
      break;
    case OpKind::kMatVec:
      n.value = matvec_values(in(0), in(1));
      break;
    case OpKind::kAdd: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (!a.same_shape(b)) {
        throw ShapeError("add: shapes " + a.shape_str() + " and " + b.shape_str() +
                         " must match exactly");
      }
      Tensor out(a.shape());
      for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
      n.value = std::move(out);
      break;
    }
    case OpKind::kMul:
      n.value = mul_values(in(0), in(1));
      break;
    case OpKind::kScale: {
      const Tensor& x = in(0);
      const Tensor& s = in(1);
      if (s.size() != 1) {
        throw ShapeError("scale: scalar operand must have one element, got " + s.shape_str());
      }
      Tensor out(x.shape());
      for (std::int64_t i = 0; i < x.size(); ++i) out[i] = x[i] * s[0];
      n.value = std::move(out);
      break;
    }
    case OpKind::kDot: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      require_vector(a, "dot");
      if (!a.same_shape(b)) {
        throw ShapeError("dot: shapes " + a.shape_str() + " and " + b.shape_str() +
                         " must match exactly");
      }
      double acc = 0.0;
      for (std::int64_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
      n.value = Tensor::vec({acc});
      break;
    }
    case OpKind::kConcat: {
      std::int64_t total = 0;
      for (int idx : n.inputs) {
        const Tensor& part = nodes_[static_cast<std::size_t>(idx)].value;
        require_vector(part, "concat");
        total += part.size();
      }
      Tensor out({static_cast<int>(total)});
      std::int64_t pos = 0;
      for (int idx : n.inputs) {
        const Tensor& part = nodes_[static_cast<std::size_t>(idx)].value;
        for (std::int64_t i = 0; i < part.size(); ++i) out[pos++] = part[i];
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::kSlice: {
      const Tensor& x = in(0);
      require_vector(x, "slice");
      if (n.arg0 < 0 || n.arg1 <= 0 || n.arg0 + n.arg1 > x.size()) {
        throw ShapeError("slice: range [" + std::to_string(n.arg0) + ", " +
                         std::to_string(n.arg0 + n.arg1) + ") out of bounds for " + x.shape_str());
      }
      Tensor out({n.arg1});
      for (int i = 0; i < n.arg1; ++i) out[i] = x[n.arg0 + i];
      n.value = std::move(out);
      break;
    }
    case OpKind::kRow: {
      const Tensor& m = in(0);
      if (m.ndim() != 2 || n.arg0 < 0 || n.arg0 >= m.dim(0)) {
        throw ShapeError("row: index " + std::to_string(n.arg0) + " invalid for " + m.shape_str());
      }
      const int cols = m.dim(1);
      Tensor out({cols});
      for (int j = 0; j < cols; ++j) out[j] = m.at(n.arg0, j);
      n.value = std::move(out);
      break;
    }
    case OpKind::kSigmoid:
      n.value = sigmoid_values(in(0));
      break;
    case OpKind::kTanh: {
      const Tensor& x = in(0);
      Tensor out(x.shape());
      for (std::int64_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
      n.value = std::move(out);
      break;
    }
    case OpKind::kSoftmax:
      n.value = softmax_values(in(0));
      break;
    case OpKind::kL2Normalize:
      n.value = l2_normalized(in(0), n.scalar_arg);
      break;
    case OpKind::kSum: {
      const Tensor& x = in(0);
      double acc = 0.0;
      for (std::int64_t i = 0; i < x.size(); ++i) acc += x[i];
      n.value = Tensor::vec({acc});
      break;
    }
    case OpKind::kSoftmaxXent: {
      const Tensor& s = in(0);
      require_vector(s, "softmax_cross_entropy");
      if (n.arg0 < 0 || n.arg0 >= s.size()) {
        throw DomainError("softmax_cross_entropy: target " + std::to_string(n.arg0) +
                          " out of range for " + s.shape_str());
      }
      double max_score = s[0];
      for (std::int64_t i = 1; i < s.size(); ++i) max_score = std::max(max_score, s[i]);
      double total = 0.0;
      for (std::int64_t i = 0; i < s.size(); ++i) total += std::exp(s[i] - max_score);
      n.value = Tensor::vec({max_score + std::log(total) - s[n.arg0]});
      break;
    }
    case OpKind::kSigmoidXent: {
      const Tensor& s = in(0);
      require_vector(s, "sigmoid_cross_entropy");
      if (static_cast<std::int64_t>(n.labels.size()) != s.size()) {
        throw ShapeError("sigmoid_cross_entropy: " + std::to_string(n.labels.size()) +
                         " labels for scores " + s.shape_str());
      }
      double acc = 0.0;
      for (std::int64_t i = 0; i < s.size(); ++i) {
        // max(s, 0) - s*y + log(1 + exp(-|s|)), the overflow-free form.
        acc += std::max(s[i], 0.0) - s[i] * n.labels[static_cast<std::size_t>(i)] +
               softplus(-std::abs(s[i]));
      }
      n.value = Tensor::vec({acc / static_cast<double>(s.size())});
      break;
    }
  }
}

void Graph::recompute() {
  for (Node& n : nodes_) {
    if (n.kind == OpKind::kInput || n.kind == OpKind::kParameter) continue;
    compute_value(n);
  }
}

void Graph::backpropagate(Node& n) {
  auto input_node = [&](int i) -> Node& {
    return nodes_[static_cast<std::size_t>(n.inputs[static_cast<std::size_t>(i)])];
  };
  const Tensor& g = n.grad;
  switch (n.kind) {
    case OpKind::kInput:
    case OpKind::kParameter:
      break;
    case OpKind::kMatVec: {
      Node& w = input_node(0);
      Node& x = input_node(1);
      const int rows = w.value.dim(0);
      const int cols = w.value.dim(1);
      for (int i = 0; i < rows; ++i) {
        const double gi = g[i];
        for (int j = 0; j < cols; ++j) {
          w.grad.at(i, j) += gi * x.value[j];
          x.grad[j] += gi * w.value.at(i, j);
        }
      }
      break;
    }
    case OpKind::kAdd: {
      Node& a = input_node(0);
      Node& b = input_node(1);
      for (std::int64_t i = 0; i < g.size(); ++i) {
        a.grad[i] += g[i];
        b.grad[i] += g[i];
      }
      break;
    }
    case OpKind::kMul: {
      Node& a = input_node(0);
      Node& b = input_node(1);
      for (std::int64_t i = 0; i < g.size(); ++i) {
        a.grad[i] += g[i] * b.value[i];
        b.grad[i] += g[i] * a.value[i];
      }
      break;
    }
    case OpKind::kScale: {
      Node& x = input_node(0);
      Node& s = input_node(1);
      for (std::int64_t i = 0; i < g.size(); ++i) {
        x.grad[i] += g[i] * s.value[0];
        s.grad[0] += g[i] * x.value[i];
      }
      break;
    }
    case OpKind::kDot: {
      Node& a = input_node(0);
      Node& b = input_node(1);
      const double g0 = g[0];
      for (std::int64_t i = 0; i < a.value.size(); ++i) {
        a.grad[i] += g0 * b.value[i];
        b.grad[i] += g0 * a.value[i];
      }
      break;
    }
    case OpKind::kConcat: {
      std::int64_t pos = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        Node& part = nodes_[static_cast<std::size_t>(n.inputs[k])];
        for (std::int64_t i = 0; i < part.value.size(); ++i) part.grad[i] += g[pos++];
      }
      break;
    }
    case OpKind::kSlice: {
      Node& x = input_node(0);
      for (int i = 0; i < n.arg1; ++i) x.grad[n.arg0 + i] += g[i];
      break;
    }
    case OpKind::kRow: {
      Node& m = input_node(0);
      const int cols = m.value.dim(1);
      for (int j = 0; j < cols; ++j) m.grad.at(n.arg0, j) += g[j];
      break;
    }
    case OpKind::kSigmoid: {
      Node& x = input_node(0);
      for (std::int64_t i = 0; i < g.size(); ++i) {
        const double y = n.value[i];
        x.grad[i] += g[i] * y * (1.0 - y);
      }
      break;
    }
    case OpKind::kTanh: {
      Node& x = input_node(0);
      for (std::int64_t i = 0; i < g.size(); ++i) {
        const double y = n.value[i];
        x.grad[i] += g[i] * (1.0 - y * y);
      }
      break;
    }
    case OpKind::kSoftmax: {
      Node& x = input_node(0);
      double weighted = 0.0;
      for (std::int64_t i = 0; i < g.size(); ++i) weighted += g[i] * n.value[i];
      for (std::int64_t i = 0; i < g.size(); ++i) {
        x.grad[i] += n.value[i] * (g[i] - weighted);
      }
      break;
    }
    case OpKind::kL2Normalize: {
      Node& x = input_node(0);
      const double norm = l2_norm(x.value);
      if (norm >= n.scalar_arg) {
        double projected = 0.0;
        for (std::int64_t i = 0; i < g.size(); ++i) projected += g[i] * n.value[i];
        for (std::int64_t i = 0; i < g.size(); ++i) {
          x.grad[i] += (g[i] - n.value[i] * projected) / norm;
        }
      } else {
        for (std::int64_t i = 0; i < g.size(); ++i) x.grad[i] += g[i] / n.scalar_arg;
      }
      break;
    }
    case OpKind::kSum: {
      Node& x = input_node(0);
      for (std::int64_t i = 0; i < x.value.size(); ++i) x.grad[i] += g[0];
      break;
    }
    case OpKind::kSoftmaxXent: {
      Node& s = input_node(0);
      const Tensor probs = softmax_values(s.value);
      for (std::int64_t i = 0; i < s.value.size(); ++i) {
        const double onehot = (static_cast<int>(i) == n.arg0) ? 1.0 : 0.0;
        s.grad[i] += g[0] * (probs[i] - onehot);
      }
      break;
    }
    case OpKind::kSigmoidXent: {
      Node& s = input_node(0);
      const double inv_n = 1.0 / static_cast<double>(s.value.size());
      for (std::int64_t i = 0; i < s.value.size(); ++i) {
        s.grad[i] += g[0] * inv_n *
                     (stable_sigmoid(s.value[i]) - n.labels[static_cast<std::size_t>(i)]);
      }
      break;
    }
  }
}

Graph::GradientMap Graph::gradients(NodeId loss) {
  const Node& loss_node = checked(loss);
  if (loss_node.value.size() != 1) {
    throw DomainError("gradients: loss node must be scalar, got " + loss_node.value.shape_str());
  }
  for (Node& n : nodes_) n.grad = Tensor::zeros(n.value.shape());
  nodes_[static_cast<std::size_t>(loss.index)].grad[0] = 1.0;
  for (int idx = loss.index; idx >= 0; --idx) {
    backpropagate(nodes_[static_cast<std::size_t>(idx)]);
  }
  GradientMap out;
  for (int idx : parameters_) {
    const Node& p = nodes_[static_cast<std::size_t>(idx)];
    out[p.name] = p.grad;
  }
  return out;
}

std::string FiniteDifferenceReport::summary() const {
  std::ostringstream out;
  out << (passed ? "PASS" : "FAIL") << " max_rel_err=" << max_rel_error << " (tol=" << tolerance
      << ", h=" << step << ", checked " << coords_checked << "/" << coords_total << " coords";
  if (!worst_parameter.empty()) {
    out << ", worst " << worst_parameter << "[" << worst_coordinate << "]";
  }
  out << ")";
  return out.str();
}

FiniteDifferenceReport finite_difference_check(Graph& graph, NodeId loss, double step,
                                               double tolerance, std::uint64_t seed,
                                               std::int64_t max_coords) {
  const Graph::GradientMap analytic = graph.gradients(loss);
  return finite_difference_check(graph, loss, analytic, step, tolerance, seed, max_coords);
}

FiniteDifferenceReport finite_difference_check(Graph& graph, NodeId loss,
                                               const Graph::GradientMap& analytic, double step,
                                               double tolerance, std::uint64_t seed,
                                               std::int64_t max_coords) {
  if (step <= 0.0) throw DomainError("finite_difference_check: step must be positive");
  if (graph.value(loss).size() != 1) {
    throw DomainError("finite_difference_check: loss node must be scalar");
  }

  struct Coord {
    std::string name;
    std::int64_t element;
  };
  std::vector<Coord> coords;
  for (const std::string& name : graph.parameter_names()) {
    if (analytic.find(name) == analytic.end()) {
      throw DomainError("finite_difference_check: analytic map misses parameter '" + name + "'");
    }
    const std::int64_t count = graph.value(graph.parameter_id(name)).size();
    for (std::int64_t e = 0; e < count; ++e) coords.push_back({name, e});
  }

  FiniteDifferenceReport report;
  report.step = step;
  report.tolerance = tolerance;
  report.coords_total = static_cast<std::int64_t>(coords.size());

  if (report.coords_total > max_coords) {
    // Partial Fisher-Yates: the first max_coords entries become the sample.
    SplitMix64 rng(seed);
    for (std::int64_t i = 0; i < max_coords; ++i) {
      const std::int64_t j =
          i + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(
                  report.coords_total - i)));
      std::swap(coords[static_cast<std::size_t>(i)], coords[static_cast<std::size_t>(j)]);
    }
    coords.resize(static_cast<std::size_t>(max_coords));
  }

  for (const Coord& c : coords) {
    Tensor& values = graph.leaf_value(graph.parameter_id(c.name));
    const double original = values[c.element];
    values[c.element] = original + step;
    graph.recompute();
    const double f_plus = graph.value(loss)[0];
    values[c.element] = original - step;
    graph.recompute();
    const double f_minus = graph.value(loss)[0];
    values[c.element] = original;

    const double numeric = (f_plus - f_minus) / (2.0 * step);
    const double expected = analytic.at(c.name)[c.element];
    const double rel = std::abs(numeric - expected) /
                       std::max({std::abs(numeric), std::abs(expected), 1.0});
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_parameter = c.name;
      report.worst_coordinate = c.element;
    }
  }
  graph.recompute();

  report.coords_checked = static_cast<std::int64_t>(coords.size());
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace refsieve

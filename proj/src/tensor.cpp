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

#include "refsieve/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "refsieve/error.hpp"

namespace refsieve {

namespace {

std::int64_t checked_element_count(const std::vector<int>& shape) {
  std::int64_t count = 1;
  for (int d : shape) {
    if (d <= 0) {
      throw ShapeError("tensor shape has non-positive dimension " + std::to_string(d));
    }
    count *= d;
  }
  return count;
}

std::string shape_to_string(const std::vector<int>& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shapes " + a.shape_str() + " and " +
                     b.shape_str() + " must match exactly");
  }
}

}  // namespace

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)),
      data_(static_cast<std::size_t>(checked_element_count(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values) : shape_(std::move(shape)) {
  const std::int64_t expected = checked_element_count(shape_);
  if (expected != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("tensor shape " + shape_to_string(shape_) + " expects " +
                     std::to_string(expected) + " values, got " + std::to_string(values.size()));
  }
  data_ = std::move(values);
}

Tensor Tensor::vec(std::vector<double> values) {
  const int count = static_cast<int>(values.size());
  return Tensor({count}, std::move(values));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::identity(int n) {
  Tensor eye({n, n});
  for (int i = 0; i < n; ++i) eye.at(i, i) = 1.0;
  return eye;
}

int Tensor::dim(int axis) const {
  if (axis < 0 || axis >= ndim()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str());
  }
  return shape_[static_cast<std::size_t>(axis)];
}

double Tensor::at(int row, int col) const {
  return data_[static_cast<std::size_t>(row) * static_cast<std::size_t>(dim(1)) +
               static_cast<std::size_t>(col)];
}

double& Tensor::at(int row, int col) {
  return data_[static_cast<std::size_t>(row) * static_cast<std::size_t>(dim(1)) +
               static_cast<std::size_t>(col)];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

Tensor matvec_values(const Tensor& w, const Tensor& x) {
  if (w.ndim() != 2 || x.ndim() != 1 || w.dim(1) != x.dim(0)) {
    throw ShapeError("matvec: weight " + w.shape_str() + " incompatible with vector " +
                     x.shape_str());
  }
  const int rows = w.dim(0);
  const int cols = w.dim(1);
  Tensor y({rows});
  for (int i = 0; i < rows; ++i) {
    double acc = 0.0;
    const double* wrow = w.data().data() + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) acc += wrow[j] * x[j];
    y[i] = acc;
  }
  return y;
}

Tensor softmax_values(const Tensor& scores) {
  if (scores.empty()) throw DomainError("softmax: input is empty");
  double max_score = scores[0];
  for (std::int64_t i = 1; i < scores.size(); ++i) max_score = std::max(max_score, scores[i]);
  Tensor probs(scores.shape());
  double total = 0.0;
  for (std::int64_t i = 0; i < scores.size(); ++i) {
    probs[i] = std::exp(scores[i] - max_score);
    total += probs[i];
  }
  for (std::int64_t i = 0; i < scores.size(); ++i) probs[i] /= total;
  return probs;
}

Tensor sigmoid_values(const Tensor& scores) {
  Tensor out(scores.shape());
  for (std::int64_t i = 0; i < scores.size(); ++i) {
    const double s = scores[i];
    if (s >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-s));
    } else {
      const double e = std::exp(s);
      out[i] = e / (1.0 + e);
    }
  }
  return out;
}

Tensor l2_normalized(const Tensor& z, double epsilon) {
  if (epsilon <= 0.0) throw DomainError("l2_normalize: epsilon must be positive");
  const double denom = std::max(l2_norm(z), epsilon);
  Tensor out(z.shape());
  for (std::int64_t i = 0; i < z.size(); ++i) out[i] = z[i] / denom;
  return out;
}

Tensor mul_values(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "elementwise_mul");
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

double l2_norm(const Tensor& v) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < v.size(); ++i) acc += v[i] * v[i];
  return std::sqrt(acc);
}

int argmax(const Tensor& v) {
  if (v.empty()) throw DomainError("argmax: input is empty");
  int best = 0;
  for (std::int64_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace refsieve

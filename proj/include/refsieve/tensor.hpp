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
#include <string>
#include <vector>

namespace refsieve {

// Dense row-major tensor of doubles. Dimensions are fixed at construction
// and must all be positive; a default-constructed Tensor is the empty
// placeholder. There is no broadcasting anywhere: shapes must match exactly
// or the operation throws ShapeError.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);  // zero-filled
  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor vec(std::vector<double> values);
  static Tensor matrix(int rows, int cols, std::vector<double> values);
  static Tensor zeros(std::vector<int> shape);
  static Tensor identity(int n);

  bool empty() const { return data_.empty(); }
  const std::vector<int>& shape() const { return shape_; }
  int dim(int axis) const;
  int ndim() const { return static_cast<int>(shape_.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }
  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double at(int row, int col) const;
  double& at(int row, int col);

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  std::string shape_str() const;  // e.g. "[2x3]"

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

// Forward kernels shared by the graph ops and by direct callers. All of them
// validate shapes and keep finite inputs finite.

// y_i = sum_j w[i][j] * x[j]
Tensor matvec_values(const Tensor& w, const Tensor& x);

// Max-subtracted softmax. Throws DomainError on an empty tensor.
Tensor softmax_values(const Tensor& scores);

// Elementwise logistic, branched on sign so large negative scores do not
// overflow exp().
Tensor sigmoid_values(const Tensor& scores);

// z / max(||z||_2, epsilon). epsilon must be positive; the clamp makes the
// zero vector map to itself instead of dividing by zero.
Tensor l2_normalized(const Tensor& z, double epsilon);

Tensor mul_values(const Tensor& a, const Tensor& b);

double l2_norm(const Tensor& v);

// Ties resolve to the lowest index.
int argmax(const Tensor& v);

}  // namespace refsieve

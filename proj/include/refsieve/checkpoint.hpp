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
#include <utility>
#include <vector>

#include "refsieve/data.hpp"
#include "refsieve/tensor.hpp"

namespace refsieve {

inline constexpr int kCheckpointFormatVersion = 1;

// Trained model state on disk: a JSON manifest (model kind, hyperparameters,
// vocabulary, shapes) with each tensor's payload hex-encoded from its
// little-endian IEEE-754 bits. The manifest stays human-inspectable while
// load(save(c)) == c holds bit-exactly.
struct Checkpoint {
  int format_version = kCheckpointFormatVersion;
  std::string model_kind;  // "sieve1" | "sieve2" | "sieve3"
  std::map<std::string, double> hyper;
  std::vector<std::pair<std::string, Tensor>> tensors;  // insertion order preserved
  std::vector<std::string> vocab;                       // token table by id
  std::uint64_t seed = 0;
  int epochs = 0;

  const Tensor& tensor(const std::string& name) const;
  double hyper_value(const std::string& name) const;
  Vocabulary vocabulary() const { return Vocabulary(vocab); }

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Atomic write: the file is staged next to `path` and renamed into place.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);

// Throws VersionError on a format-version mismatch and IntegrityError when
// a payload does not match its declared shape or the file is truncated.
Checkpoint load_checkpoint(const std::string& path);

// Exposed for tests: the exact double <-> hex payload encoding.
std::string encode_tensor_payload(const Tensor& tensor);
Tensor decode_tensor_payload(const std::string& hex, const std::vector<int>& shape);

}  // namespace refsieve

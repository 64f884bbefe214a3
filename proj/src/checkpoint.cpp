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

#include "refsieve/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "refsieve/error.hpp"

namespace refsieve {

namespace {

using nlohmann::ordered_json;

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [tensor_name, value] : tensors) {
    if (tensor_name == name) return value;
  }
  throw IntegrityError("checkpoint has no tensor named '" + name + "'");
}

double Checkpoint::hyper_value(const std::string& name) const {
  auto it = hyper.find(name);
  if (it == hyper.end()) {
    throw IntegrityError("checkpoint has no hyperparameter named '" + name + "'");
  }
  return it->second;
}

std::string encode_tensor_payload(const Tensor& tensor) {
  std::string hex;
  hex.reserve(static_cast<std::size_t>(tensor.size()) * 16);
  for (std::int64_t i = 0; i < tensor.size(); ++i) {
    std::uint64_t bits = 0;
    static_assert(sizeof(bits) == sizeof(double));
    const double v = tensor[i];
    std::memcpy(&bits, &v, sizeof(bits));
    // Little-endian byte order, two hex digits per byte.
    for (int byte = 0; byte < 8; ++byte) {
      const unsigned value = static_cast<unsigned>((bits >> (8 * byte)) & 0xffu);
      hex.push_back(kHexDigits[value >> 4]);
      hex.push_back(kHexDigits[value & 0xfu]);
    }
  }
  return hex;
}

Tensor decode_tensor_payload(const std::string& hex, const std::vector<int>& shape) {
  Tensor out(shape);
  if (hex.size() != static_cast<std::size_t>(out.size()) * 16) {
    throw IntegrityError("tensor payload holds " + std::to_string(hex.size() / 16) +
                         " doubles but shape " + out.shape_str() + " declares " +
                         std::to_string(out.size()));
  }
  for (std::int64_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int byte = 0; byte < 8; ++byte) {
      const int hi = hex_value(hex[static_cast<std::size_t>(i) * 16 + 2 * byte]);
      const int lo = hex_value(hex[static_cast<std::size_t>(i) * 16 + 2 * byte + 1]);
      if (hi < 0 || lo < 0) throw IntegrityError("tensor payload contains a non-hex character");
      bits |= static_cast<std::uint64_t>((hi << 4) | lo) << (8 * byte);
    }
    double v = 0.0;
    std::memcpy(&v, &bits, sizeof(v));
    out[i] = v;
  }
  return out;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  ordered_json doc;
  doc["format_version"] = checkpoint.format_version;
  doc["model"] = checkpoint.model_kind;
  doc["hyper"] = checkpoint.hyper;
  doc["seed"] = checkpoint.seed;
  doc["epochs"] = checkpoint.epochs;
  doc["vocab"] = checkpoint.vocab;
  ordered_json tensors = ordered_json::array();
  for (const auto& [name, tensor] : checkpoint.tensors) {
    ordered_json entry;
    entry["name"] = name;
    entry["shape"] = tensor.shape();
    entry["data"] = encode_tensor_payload(tensor);
    tensors.push_back(std::move(entry));
  }
  doc["tensors"] = std::move(tensors);

  const std::string staging = path + ".tmp";
  {
    std::ofstream out(staging, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + staging + "' for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("failed while writing '" + staging + "'");
  }
  std::error_code ec;
  std::filesystem::rename(staging, path, ec);
  if (ec) throw IoError("cannot rename '" + staging + "' to '" + path + "': " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();

  ordered_json doc;
  try {
    doc = ordered_json::parse(buffer.str());
  } catch (const ordered_json::exception& e) {
    throw IntegrityError("checkpoint '" + path + "' is not valid JSON (truncated?): " + e.what());
  }

  Checkpoint checkpoint;
  try {
    checkpoint.format_version = doc.at("format_version").get<int>();
    if (checkpoint.format_version != kCheckpointFormatVersion) {
      throw VersionError("checkpoint '" + path + "' has format version " +
                         std::to_string(checkpoint.format_version) + ", this build reads " +
                         std::to_string(kCheckpointFormatVersion));
    }
    checkpoint.model_kind = doc.at("model").get<std::string>();
    checkpoint.hyper = doc.at("hyper").get<std::map<std::string, double>>();
    checkpoint.seed = doc.at("seed").get<std::uint64_t>();
    checkpoint.epochs = doc.at("epochs").get<int>();
    checkpoint.vocab = doc.at("vocab").get<std::vector<std::string>>();
    for (const ordered_json& entry : doc.at("tensors")) {
      const std::string name = entry.at("name").get<std::string>();
      const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
      checkpoint.tensors.emplace_back(
          name, decode_tensor_payload(entry.at("data").get<std::string>(), shape));
      if (!checkpoint.tensors.back().second.all_finite()) {
        throw IntegrityError("checkpoint tensor '" + name + "' contains non-finite values");
      }
    }
  } catch (const ordered_json::exception& e) {
    throw IntegrityError("checkpoint '" + path + "' is malformed: " + e.what());
  }
  return checkpoint;
}

}  // namespace refsieve

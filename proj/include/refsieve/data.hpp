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
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "refsieve/rng.hpp"
#include "refsieve/tensor.hpp"

namespace refsieve {

// Part-of-speech tags carried by dataset files. Tags are data, not computed:
// real datasets must arrive pre-tagged, synthetic data is tagged by
// construction.
enum class Pos { kNoun, kAdj, kVerb, kAdp, kDet, kOther };

Pos parse_pos(const std::string& tag);
const char* pos_name(Pos tag);
const std::vector<Pos>& all_pos_tags();

// One candidate bounding box: geometry in pixels, a category label, and a
// precomputed visual feature vector. category_id is the dense dataset-level
// id assigned by intern_categories().
struct BoxRecord {
  double xmin = 0, ymin = 0, xmax = 0, ymax = 0;
  std::string category;
  int category_id = -1;
  Tensor vis;

  double area() const { return (xmax - xmin) * (ymax - ymin); }

  friend bool operator==(const BoxRecord&, const BoxRecord&) = default;
};

// One image with its candidate boxes, the referring expression (tokens +
// aligned POS tags) and the index of the referred box.
struct SceneInstance {
  std::string image_id;
  double width = 0, height = 0;
  std::vector<BoxRecord> boxes;
  std::vector<std::string> tokens;
  std::vector<Pos> pos;
  int target = 0;

  int box_count() const { return static_cast<int>(boxes.size()); }
  const BoxRecord& target_box() const { return boxes[static_cast<std::size_t>(target)]; }

  friend bool operator==(const SceneInstance&, const SceneInstance&) = default;
};

// Throws ValidationError naming the offending field. d_vis < 0 skips the
// cross-instance feature-width check.
void validate_instance(const SceneInstance& instance, int expected_d_vis = -1);

// Assigns dense category ids in order of first appearance and returns the
// id -> name table.
std::vector<std::string> intern_categories(std::vector<SceneInstance>& instances);

int dataset_d_vis(const std::vector<SceneInstance>& instances);

// JSON Lines, one instance per line:
//   {"image_id": str, "width": num, "height": num,
//    "boxes": [{"xmin","ymin","xmax","ymax": num, "category": str, "vis": [num...]}],
//    "tokens": [str], "pos": [str], "target": int}
std::vector<SceneInstance> load_dataset(const std::string& path);
void write_dataset(const std::vector<SceneInstance>& instances, const std::string& path);

// Token ids. Id 0 is the padding token, id 1 the unknown token; encode()
// falls back to unknown for out-of-vocabulary words.
class Vocabulary {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;

  Vocabulary();
  explicit Vocabulary(std::vector<std::string> tokens);  // from an id -> token table

  int add(const std::string& token);  // returns the existing id if present
  int encode(const std::string& token) const;
  const std::string& token(int id) const;
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// Tokens with frequency >= min_count, ids in order of first appearance.
Vocabulary build_vocab(const std::vector<SceneInstance>& instances, int min_count);

std::vector<int> encode_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab);

// Plain-text embedding file: one token per line, word followed by dim
// whitespace-separated reals. Rows for words present in the file are copied;
// everything else (padding and unknown included) is initialized uniformly in
// [-0.08, 0.08] from the supplied stream. The result is the trainable
// embedding table, one row per vocabulary id.
Tensor load_embeddings(const std::string& path, const Vocabulary& vocab, int dim, SplitMix64& rng);

// Same initialization path with no file: every row is drawn from the stream.
Tensor init_embeddings(const Vocabulary& vocab, int dim, SplitMix64& rng);

// Synthetic scenes that reproduce the annotation-rule bias: the referred
// box always belongs to a category with at least two instances in its image,
// while every other box in the image is the only one of its category.
struct SynthConfig {
  int images = 100;
  int categories = 8;
  int d_vis = 16;
  int boxes_min = 3;
  int boxes_max = 6;
  // Probability that the target is the largest box of its category group;
  // otherwise the target is uniform over the group. 1.0 makes the scene
  // fully predictable from the image, 0.0 removes the size cue.
  double bias = 0.9;
  // With the grammar on, expressions follow
  //   <ADJ> <NOUN=category> <ADP> <DET> <NOUN=other category>
  // with size adjectives matching the target's role in its group. Off
  // emits the bare category noun.
  bool grammar = true;
  double width = 640;
  double height = 480;

  void validate() const;  // throws ConfigError
};

// Deterministic per (config, seed): instance i draws from its own SplitMix64
// stream seeded with seed + (i+1) * 0x9e3779b97f4a7c15, so instances do not
// depend on how many precede them. Category prototypes come from a stream
// seeded with seed ^ 0x7ef7'6e5a'9d3c'1b08.
std::vector<SceneInstance> generate_synthetic(const SynthConfig& config, std::uint64_t seed);

}  // namespace refsieve

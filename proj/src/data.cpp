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

#include "refsieve/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "refsieve/error.hpp"

namespace refsieve {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;
constexpr std::uint64_t kPrototypeSalt = 0x7ef76e5a9d3c1b08ull;

const std::vector<std::pair<const char*, Pos>>& pos_table() {
  static const std::vector<std::pair<const char*, Pos>> table = {
      {"NOUN", Pos::kNoun}, {"ADJ", Pos::kAdj}, {"VERB", Pos::kVerb},
      {"ADP", Pos::kAdp},   {"DET", Pos::kDet}, {"OTHER", Pos::kOther},
  };
  return table;
}

std::string category_name(int index) {
  static const std::vector<std::string> nouns = {
      "ball", "box",  "chair", "table", "car", "dog",  "tree", "cup",
      "book", "lamp", "shoe",  "bird",  "fish", "hat", "key",  "door"};
  const int base = index % static_cast<int>(nouns.size());
  const int round = index / static_cast<int>(nouns.size());
  if (round == 0) return nouns[static_cast<std::size_t>(base)];
  return nouns[static_cast<std::size_t>(base)] + std::to_string(round);
}

}  // namespace

Pos parse_pos(const std::string& tag) {
  for (const auto& [name, value] : pos_table()) {
    if (tag == name) return value;
  }
  throw ValidationError("unknown POS tag '" + tag + "'");
}

const char* pos_name(Pos tag) {
  for (const auto& [name, value] : pos_table()) {
    if (tag == value) return name;
  }
  return "?";
}

const std::vector<Pos>& all_pos_tags() {
  static const std::vector<Pos> tags = {Pos::kNoun, Pos::kAdj, Pos::kVerb,
                                        Pos::kAdp,  Pos::kDet, Pos::kOther};
  return tags;
}

void validate_instance(const SceneInstance& instance, int expected_d_vis) {
  const std::string where = "instance '" + instance.image_id + "'";
  if (!(instance.width > 0.0) || !(instance.height > 0.0)) {
    throw ValidationError(where + ": width and height must be positive");
  }
  if (instance.boxes.empty()) {
    throw ValidationError(where + ": boxes must be non-empty");
  }
  int d_vis = expected_d_vis;
  for (std::size_t b = 0; b < instance.boxes.size(); ++b) {
    const BoxRecord& box = instance.boxes[b];
    const std::string box_where = where + " box " + std::to_string(b);
    if (!(box.xmin >= 0.0 && box.xmin < box.xmax && box.xmax <= instance.width)) {
      throw ValidationError(box_where + ": xmin/xmax must satisfy 0 <= xmin < xmax <= width");
    }
    if (!(box.ymin >= 0.0 && box.ymin < box.ymax && box.ymax <= instance.height)) {
      throw ValidationError(box_where + ": ymin/ymax must satisfy 0 <= ymin < ymax <= height");
    }
    if (box.vis.ndim() != 1 || box.vis.size() < 1) {
      throw ValidationError(box_where + ": vis must be a non-empty vector");
    }
    if (!box.vis.all_finite()) {
      throw ValidationError(box_where + ": vis contains non-finite values");
    }
    if (d_vis < 0) {
      d_vis = static_cast<int>(box.vis.size());
    } else if (static_cast<int>(box.vis.size()) != d_vis) {
      throw ValidationError(box_where + ": vis dimension " + std::to_string(box.vis.size()) +
                            " differs from expected " + std::to_string(d_vis));
    }
  }
  if (instance.pos.size() != instance.tokens.size()) {
    throw ValidationError(where + ": pos length " + std::to_string(instance.pos.size()) +
                          " does not match tokens length " + std::to_string(instance.tokens.size()));
  }
  if (instance.target < 0 || instance.target >= instance.box_count()) {
    throw ValidationError(where + ": target " + std::to_string(instance.target) +
                          " out of range for " + std::to_string(instance.box_count()) + " boxes");
  }
}

std::vector<std::string> intern_categories(std::vector<SceneInstance>& instances) {
  std::vector<std::string> names;
  std::unordered_map<std::string, int> ids;
  for (SceneInstance& instance : instances) {
    for (BoxRecord& box : instance.boxes) {
      auto [it, inserted] = ids.try_emplace(box.category, static_cast<int>(names.size()));
      if (inserted) names.push_back(box.category);
      box.category_id = it->second;
    }
  }
  return names;
}

int dataset_d_vis(const std::vector<SceneInstance>& instances) {
  if (instances.empty() || instances.front().boxes.empty()) {
    throw DomainError("dataset_d_vis: dataset is empty");
  }
  return static_cast<int>(instances.front().boxes.front().vis.size());
}

std::vector<SceneInstance> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file '" + path + "'");

  std::vector<SceneInstance> instances;
  std::string line;
  int line_number = 0;
  int d_vis = -1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_number);
    SceneInstance instance;
    try {
      const json doc = json::parse(line);
      instance.image_id = doc.at("image_id").get<std::string>();
      instance.width = doc.at("width").get<double>();
      instance.height = doc.at("height").get<double>();
      for (const json& jbox : doc.at("boxes")) {
        BoxRecord box;
        box.xmin = jbox.at("xmin").get<double>();
        box.ymin = jbox.at("ymin").get<double>();
        box.xmax = jbox.at("xmax").get<double>();
        box.ymax = jbox.at("ymax").get<double>();
        box.category = jbox.at("category").get<std::string>();
        box.vis = Tensor::vec(jbox.at("vis").get<std::vector<double>>());
        instance.boxes.push_back(std::move(box));
      }
      instance.tokens = doc.at("tokens").get<std::vector<std::string>>();
      for (const json& jtag : doc.at("pos")) {
        instance.pos.push_back(parse_pos(jtag.get<std::string>()));
      }
      instance.target = doc.at("target").get<int>();
    } catch (const json::exception& e) {
      throw ParseError(where + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    try {
      validate_instance(instance, d_vis);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (d_vis < 0) d_vis = static_cast<int>(instance.boxes.front().vis.size());
    instances.push_back(std::move(instance));
  }
  intern_categories(instances);
  return instances;
}

void write_dataset(const std::vector<SceneInstance>& instances, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (const SceneInstance& instance : instances) {
    ordered_json doc;
    doc["image_id"] = instance.image_id;
    doc["width"] = instance.width;
    doc["height"] = instance.height;
    ordered_json boxes = ordered_json::array();
    for (const BoxRecord& box : instance.boxes) {
      ordered_json jbox;
      jbox["xmin"] = box.xmin;
      jbox["ymin"] = box.ymin;
      jbox["xmax"] = box.xmax;
      jbox["ymax"] = box.ymax;
      jbox["category"] = box.category;
      jbox["vis"] = box.vis.data();
      boxes.push_back(std::move(jbox));
    }
    doc["boxes"] = std::move(boxes);
    doc["tokens"] = instance.tokens;
    ordered_json tags = ordered_json::array();
    for (Pos tag : instance.pos) tags.push_back(pos_name(tag));
    doc["pos"] = std::move(tags);
    doc["target"] = instance.target;
    out << doc.dump() << '\n';
  }
  if (!out) throw IoError("failed while writing '" + path + "'");
}

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  if (tokens.size() < 2) {
    throw ValidationError("vocabulary table must start with the padding and unknown tokens");
  }
  for (std::string& t : tokens) add(t);
}

int Vocabulary::add(const std::string& token) {
  auto [it, inserted] = ids_.try_emplace(token, static_cast<int>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

int Vocabulary::encode(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw DomainError("vocabulary id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(const std::string& token) const { return ids_.count(token) != 0; }

Vocabulary build_vocab(const std::vector<SceneInstance>& instances, int min_count) {
  if (min_count < 1) throw ConfigError("build_vocab: min_count must be >= 1");
  std::unordered_map<std::string, int> counts;
  for (const SceneInstance& instance : instances) {
    for (const std::string& token : instance.tokens) ++counts[token];
  }
  Vocabulary vocab;
  for (const SceneInstance& instance : instances) {
    for (const std::string& token : instance.tokens) {
      if (counts[token] >= min_count) vocab.add(token);
    }
  }
  return vocab;
}

std::vector<int> encode_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& token : tokens) ids.push_back(vocab.encode(token));
  return ids;
}

Tensor init_embeddings(const Vocabulary& vocab, int dim, SplitMix64& rng) {
  Tensor table({vocab.size(), dim});
  for (std::int64_t i = 0; i < table.size(); ++i) table[i] = rng.uniform(-0.08, 0.08);
  return table;
}

Tensor load_embeddings(const std::string& path, const Vocabulary& vocab, int dim, SplitMix64& rng) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file '" + path + "'");

  std::unordered_map<std::string, std::vector<double>> rows;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string word;
    fields >> word;
    std::vector<double> values;
    double v = 0.0;
    while (fields >> v) values.push_back(v);
    if (static_cast<int>(values.size()) != dim) {
      throw ParseError(path + ":" + std::to_string(line_number) + ": expected " +
                       std::to_string(dim) + " values for '" + word + "', got " +
                       std::to_string(values.size()));
    }
    rows[word] = std::move(values);
  }

  Tensor table({vocab.size(), dim});
  for (int id = 0; id < vocab.size(); ++id) {
    const auto it = id >= 2 ? rows.find(vocab.token(id)) : rows.end();
    if (it != rows.end()) {
      for (int j = 0; j < dim; ++j) table.at(id, j) = it->second[static_cast<std::size_t>(j)];
    } else {
      for (int j = 0; j < dim; ++j) table.at(id, j) = rng.uniform(-0.08, 0.08);
    }
  }
  return table;
}

void SynthConfig::validate() const {
  if (images < 1) throw ConfigError("synth: images must be >= 1");
  if (categories < 2) throw ConfigError("synth: categories must be >= 2");
  if (d_vis < 1) throw ConfigError("synth: d_vis must be >= 1");
  if (boxes_min < 2) throw ConfigError("synth: boxes_min must be >= 2");
  if (boxes_max < boxes_min) throw ConfigError("synth: boxes_max must be >= boxes_min");
  if (!(bias >= 0.0 && bias <= 1.0)) throw ConfigError("synth: bias must lie in [0, 1]");
  if (!(width > 0.0 && height > 0.0)) throw ConfigError("synth: width and height must be positive");
  // Every non-target box is the single instance of its own category.
  if (categories < std::max(2, boxes_max - 1)) {
    throw ConfigError("synth: need at least " + std::to_string(std::max(2, boxes_max - 1)) +
                      " categories for up to " + std::to_string(boxes_max) + " boxes");
  }
}

std::vector<SceneInstance> generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
  config.validate();

  SplitMix64 proto_rng(seed ^ kPrototypeSalt);
  std::vector<Tensor> prototypes;
  prototypes.reserve(static_cast<std::size_t>(config.categories));
  for (int c = 0; c < config.categories; ++c) {
    Tensor proto({config.d_vis});
    for (int j = 0; j < config.d_vis; ++j) proto[j] = proto_rng.uniform(-1.0, 1.0);
    prototypes.push_back(std::move(proto));
  }

  static const std::vector<std::string> large_adjs = {"big", "large", "huge"};
  static const std::vector<std::string> small_adjs = {"small", "tiny", "little"};
  static const std::vector<std::string> adps = {"near", "above", "beside", "below"};

  std::vector<SceneInstance> instances;
  instances.reserve(static_cast<std::size_t>(config.images));
  for (int i = 0; i < config.images; ++i) {
    SplitMix64 rng(seed + static_cast<std::uint64_t>(i + 1) * kGolden);

    const int n = rng.range_int(config.boxes_min, config.boxes_max);
    const int group_size = rng.range_int(2, std::min(4, n));
    const int target_cat = static_cast<int>(rng.below(static_cast<std::uint64_t>(config.categories)));

    // Distinct singleton categories for the remaining boxes.
    std::vector<int> others;
    for (int c = 0; c < config.categories; ++c) {
      if (c != target_cat) others.push_back(c);
    }
    rng.shuffle(others);
    others.resize(static_cast<std::size_t>(n - group_size));

    auto make_box = [&](int category) {
      BoxRecord box;
      const double w = rng.uniform(0.08, 0.45) * config.width;
      const double h = rng.uniform(0.08, 0.45) * config.height;
      box.xmin = rng.uniform(0.0, config.width - w);
      box.ymin = rng.uniform(0.0, config.height - h);
      box.xmax = box.xmin + w;
      box.ymax = box.ymin + h;
      box.category = category_name(category);
      box.vis = Tensor({config.d_vis});
      for (int j = 0; j < config.d_vis; ++j) {
        box.vis[j] = prototypes[static_cast<std::size_t>(category)][j] + rng.uniform(-0.1, 0.1);
      }
      return box;
    };

    std::vector<BoxRecord> boxes;
    boxes.reserve(static_cast<std::size_t>(n));
    for (int b = 0; b < group_size; ++b) boxes.push_back(make_box(target_cat));
    for (int c : others) boxes.push_back(make_box(c));

    int group_largest = 0;
    for (int b = 1; b < group_size; ++b) {
      if (boxes[static_cast<std::size_t>(b)].area() >
          boxes[static_cast<std::size_t>(group_largest)].area()) {
        group_largest = b;
      }
    }
    const bool cue_fires = rng.uniform() < config.bias;
    const int chosen =
        cue_fires ? group_largest : static_cast<int>(rng.below(static_cast<std::uint64_t>(group_size)));

    const std::vector<int> order = rng.permutation(n);
    SceneInstance instance;
    instance.image_id = [&] {
      std::ostringstream id;
      id << "synth-" << std::setw(6) << std::setfill('0') << i;
      return id.str();
    }();
    instance.width = config.width;
    instance.height = config.height;
    instance.boxes.resize(static_cast<std::size_t>(n));
    for (int pos_idx = 0; pos_idx < n; ++pos_idx) {
      instance.boxes[static_cast<std::size_t>(pos_idx)] =
          boxes[static_cast<std::size_t>(order[static_cast<std::size_t>(pos_idx)])];
      if (order[static_cast<std::size_t>(pos_idx)] == chosen) instance.target = pos_idx;
    }

    const std::string target_noun = category_name(target_cat);
    if (config.grammar) {
      const std::vector<std::string>& adj_pool = (chosen == group_largest) ? large_adjs : small_adjs;
      const std::string adj = adj_pool[rng.below(adj_pool.size())];
      const std::string adp = adps[rng.below(adps.size())];
      std::string other_noun;
      if (!others.empty()) {
        other_noun = category_name(others[rng.below(others.size())]);
      } else {
        other_noun = category_name((target_cat + 1) % config.categories);
      }
      instance.tokens = {adj, target_noun, adp, "the", other_noun};
      instance.pos = {Pos::kAdj, Pos::kNoun, Pos::kAdp, Pos::kDet, Pos::kNoun};
    } else {
      instance.tokens = {target_noun};
      instance.pos = {Pos::kNoun};
    }

    validate_instance(instance, config.d_vis);
    instances.push_back(std::move(instance));
  }
  intern_categories(instances);
  return instances;
}

}  // namespace refsieve

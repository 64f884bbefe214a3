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

#include "refsieve/app.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "refsieve/checkpoint.hpp"
#include "refsieve/error.hpp"
#include "refsieve/graph.hpp"

namespace refsieve {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

int levenshtein(const std::string& a, const std::string& b) {
  std::vector<int> previous(b.size() + 1);
  std::vector<int> current(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) previous[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    current[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const int substitute = previous[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      current[j] = std::min({previous[j] + 1, current[j - 1] + 1, substitute});
    }
    std::swap(previous, current);
  }
  return previous[b.size()];
}

void check_keys(const json& object, const std::vector<std::string>& allowed,
                const std::string& where) {
  for (const auto& [key, value] : object.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) != allowed.end()) continue;
    std::string best;
    int best_distance = 3;  // suggest only near misses
    for (const std::string& candidate : allowed) {
      const int d = levenshtein(key, candidate);
      if (d < best_distance) {
        best_distance = d;
        best = candidate;
      }
    }
    std::string message = "unknown key '" + key + "' in " + where;
    if (!best.empty()) message += " (did you mean '" + best + "'?)";
    throw ConfigError(message);
  }
}

template <class T>
T get_or(const json& object, const std::string& key, T fallback) {
  if (!object.contains(key) || object.at(key).is_null()) return fallback;
  try {
    return object.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + key + "' has the wrong type");
  }
}

std::string require_string(const json& object, const std::string& key, const std::string& where) {
  if (!object.contains(key) || !object.at(key).is_string() ||
      object.at(key).get<std::string>().empty()) {
    throw ConfigError(where + " requires a non-empty string '" + key + "'");
  }
  return object.at(key).get<std::string>();
}

const json& section(const json& raw, const std::string& name) {
  if (!raw.contains(name) || !raw.at(name).is_object()) {
    throw ConfigError("subcommand '" + name + "' requires a '" + name + "' config section");
  }
  return raw.at(name);
}

std::vector<int> parse_k_list(const json& object, const std::string& where) {
  std::vector<int> k_list = get_or<std::vector<int>>(object, "k_list", {1, 2, 3, 4, 5});
  if (k_list.empty()) throw ConfigError(where + ": k_list must be non-empty");
  for (int k : k_list) {
    if (k < 1) throw ConfigError(where + ": k_list entries must be >= 1");
  }
  return k_list;
}

TrainConfig parse_train_fields(const json& object, std::uint64_t seed, const std::string& where) {
  TrainConfig config;
  config.seed = seed;
  config.epochs = get_or<int>(object, "epochs", config.epochs);
  config.lr0 = get_or<double>(object, "lr0", config.lr0);
  config.decay = get_or<double>(object, "decay", config.decay);
  config.hidden = get_or<int>(object, "hidden", config.hidden);
  config.embed_dim = get_or<int>(object, "embed_dim", config.embed_dim);
  config.attn_dim = get_or<int>(object, "attn_dim", config.attn_dim);
  config.min_count = get_or<int>(object, "min_count", config.min_count);
  config.embeddings_path = get_or<std::string>(object, "embeddings", "");
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return config;
}

PerturbationSpec parse_perturbation_spec(const json& object, const std::string& where) {
  check_keys(object, {"kind", "keep_pos", "seed"}, where);
  PerturbationSpec spec;
  spec.kind = parse_perturb_kind(require_string(object, "kind", where));
  spec.seed = get_or<std::uint64_t>(object, "seed", 0);
  if (object.contains("keep_pos") && !object.at("keep_pos").is_null()) {
    for (const json& tag : object.at("keep_pos")) {
      try {
        spec.keep_set.insert(parse_pos(tag.get<std::string>()));
      } catch (const ValidationError& e) {
        throw ConfigError(where + ": " + e.what());
      }
    }
  }
  if (spec.kind == PerturbKind::kKeepPos && spec.keep_set.empty()) {
    throw ConfigError(where + ": kind 'keep_pos' requires a non-empty keep_pos list");
  }
  return spec;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("failed while writing '" + path + "'");
}

std::string precision_row_note(const PerturbationSpec& spec) {
  switch (spec.kind) {
    case PerturbKind::kNone: return "";
    case PerturbKind::kShuffle: return "shuffled";
    case PerturbKind::kKeepPos: {
      std::string note = "pos:";
      bool first = true;
      for (Pos tag : spec.keep_set) {
        if (!first) note += ",";
        note += pos_name(tag);
        first = false;
      }
      return note;
    }
    case PerturbKind::kDropExpression: return "expression dropped";
  }
  return "";
}

}  // namespace

RunConfig validate_config(const json& raw, const std::string& subcommand) {
  if (!raw.is_object()) throw ConfigError("config root must be a JSON object");
  check_keys(raw, {"seed", "synth", "perturb", "train", "eval", "stats", "check", "repro"},
             "config root");

  RunConfig config;
  config.subcommand = subcommand;
  if (raw.contains("seed")) {
    config.seed = get_or<std::uint64_t>(raw, "seed", 0);
  } else if (const char* env_seed = std::getenv("REFSIEVE_SEED")) {
    config.seed = std::strtoull(env_seed, nullptr, 10);
  }

  if (subcommand == "synth") {
    const json& object = section(raw, "synth");
    check_keys(object,
               {"images", "categories", "d_vis", "boxes_min", "boxes_max", "bias", "grammar",
                "width", "height", "out"},
               "synth");
    SynthSection synth;
    synth.config.images = get_or<int>(object, "images", synth.config.images);
    synth.config.categories = get_or<int>(object, "categories", synth.config.categories);
    synth.config.d_vis = get_or<int>(object, "d_vis", synth.config.d_vis);
    synth.config.boxes_min = get_or<int>(object, "boxes_min", synth.config.boxes_min);
    synth.config.boxes_max = get_or<int>(object, "boxes_max", synth.config.boxes_max);
    synth.config.bias = get_or<double>(object, "bias", synth.config.bias);
    synth.config.grammar = get_or<bool>(object, "grammar", synth.config.grammar);
    synth.config.width = get_or<double>(object, "width", synth.config.width);
    synth.config.height = get_or<double>(object, "height", synth.config.height);
    synth.config.validate();
    synth.out = require_string(object, "out", "synth");
    config.synth = std::move(synth);
  } else if (subcommand == "perturb") {
    const json& object = section(raw, "perturb");
    check_keys(object, {"dataset", "out", "spec"}, "perturb");
    PerturbSection perturb;
    perturb.dataset = require_string(object, "dataset", "perturb");
    perturb.out = require_string(object, "out", "perturb");
    if (!object.contains("spec") || !object.at("spec").is_object()) {
      throw ConfigError("perturb requires a 'spec' object");
    }
    perturb.spec = parse_perturbation_spec(object.at("spec"), "perturb.spec");
    config.perturb = std::move(perturb);
  } else if (subcommand == "train") {
    const json& object = section(raw, "train");
    check_keys(object,
               {"dataset", "model", "epochs", "lr0", "decay", "hidden", "embed_dim", "attn_dim",
                "min_count", "embeddings", "checkpoint_out", "log_out", "init"},
               "train");
    TrainSection train;
    train.dataset = require_string(object, "dataset", "train");
    train.checkpoint_out = require_string(object, "checkpoint_out", "train");
    train.log_out = get_or<std::string>(object, "log_out", "");
    train.init = get_or<std::string>(object, "init", "");
    train.config = parse_train_fields(object, config.seed, "train");
    train.config.kind = parse_model_kind(require_string(object, "model", "train"));
    config.train = std::move(train);
  } else if (subcommand == "eval") {
    const json& object = section(raw, "eval");
    check_keys(object, {"dataset", "pipeline", "k_list", "report_out", "format", "histogram_out"},
               "eval");
    EvalSection eval;
    eval.dataset = require_string(object, "dataset", "eval");
    eval.report_out = get_or<std::string>(object, "report_out", "");
    eval.histogram_out = get_or<std::string>(object, "histogram_out", "");
    eval.format = get_or<std::string>(object, "format", "json");
    parse_report_format(eval.format);
    eval.k_list = parse_k_list(object, "eval");
    if (!object.contains("pipeline") || !object.at("pipeline").is_array() ||
        object.at("pipeline").empty()) {
      throw ConfigError("eval requires a non-empty 'pipeline' array");
    }
    for (const json& jstage : object.at("pipeline")) {
      check_keys(jstage, {"stage", "checkpoint", "keep_top", "rule", "threshold"},
                 "eval.pipeline stage");
      EvalStageConfig stage;
      stage.stage = require_string(jstage, "stage", "eval.pipeline stage");
      stage.checkpoint = get_or<std::string>(jstage, "checkpoint", "");
      if (stage.stage == "sieve1") {
        if (jstage.contains("keep_top") && jstage.at("keep_top").is_null()) {
          stage.keep_top = std::nullopt;  // explicit null: no cutoff
        } else {
          stage.keep_top = get_or<int>(jstage, "keep_top", 3);
        }
      }
      stage.rule = get_or<std::string>(jstage, "rule", "argmax_category");
      if (stage.rule != "argmax_category" && stage.rule != "threshold") {
        throw ConfigError("eval.pipeline: rule must be argmax_category or threshold");
      }
      stage.threshold = get_or<double>(jstage, "threshold", 0.5);
      if (stage.stage != "sieve1" && stage.stage != "sieve2" && stage.stage != "sieve2_oracle" &&
          stage.stage != "sieve3") {
        throw ConfigError("eval.pipeline: unknown stage '" + stage.stage + "'");
      }
      if (stage.stage != "sieve2_oracle" && stage.checkpoint.empty()) {
        throw ConfigError("eval.pipeline: stage '" + stage.stage + "' requires a checkpoint");
      }
      eval.pipeline.push_back(std::move(stage));
    }
    config.eval = std::move(eval);
  } else if (subcommand == "stats") {
    const json& object = section(raw, "stats");
    check_keys(object, {"dataset", "out", "rare_threshold", "k_list"}, "stats");
    StatsSection stats;
    stats.dataset = require_string(object, "dataset", "stats");
    stats.out = get_or<std::string>(object, "out", "");
    stats.rare_threshold = get_or<double>(object, "rare_threshold", 0.01);
    if (!(stats.rare_threshold >= 0.0 && stats.rare_threshold <= 1.0)) {
      throw ConfigError("stats: rare_threshold must lie in [0, 1]");
    }
    stats.k_list = parse_k_list(object, "stats");
    config.stats = std::move(stats);
  } else if (subcommand == "check") {
    CheckSection check;
    if (raw.contains("check")) {
      const json& object = raw.at("check");
      check_keys(object, {"seeds", "step", "tolerance"}, "check");
      check.seeds = get_or<int>(object, "seeds", check.seeds);
      check.step = get_or<double>(object, "step", check.step);
      check.tolerance = get_or<double>(object, "tolerance", check.tolerance);
    }
    if (check.seeds < 1) throw ConfigError("check: seeds must be >= 1");
    if (!(check.step > 0.0)) throw ConfigError("check: step must be positive");
    if (!(check.tolerance > 0.0)) throw ConfigError("check: tolerance must be positive");
    config.check = check;
  } else if (subcommand == "repro") {
    const json& object = section(raw, "repro");
    check_keys(object,
               {"train", "test", "out", "format", "k_list", "keep_top", "epochs", "lr0", "decay",
                "hidden", "embed_dim", "attn_dim", "min_count", "embeddings"},
               "repro");
    ReproSection repro;
    repro.train_dataset = require_string(object, "train", "repro");
    repro.test_dataset = require_string(object, "test", "repro");
    repro.out = get_or<std::string>(object, "out", "");
    repro.format = get_or<std::string>(object, "format", "json");
    parse_report_format(repro.format);
    repro.k_list = parse_k_list(object, "repro");
    repro.keep_top = get_or<int>(object, "keep_top", 3);
    if (repro.keep_top < 1) throw ConfigError("repro: keep_top must be >= 1");
    repro.train = parse_train_fields(object, config.seed, "repro");
    config.repro = std::move(repro);
  } else {
    throw ConfigError("unknown subcommand '" + subcommand + "'");
  }
  return config;
}

int run_synth(const RunConfig& config) {
  const SynthSection& synth = *config.synth;
  const std::vector<SceneInstance> instances = generate_synthetic(synth.config, config.seed);
  write_dataset(instances, synth.out);
  std::cerr << "wrote " << instances.size() << " instances to " << synth.out << "\n";
  return 0;
}

int run_perturb(const RunConfig& config) {
  const PerturbSection& perturb = *config.perturb;
  const std::vector<SceneInstance> instances = load_dataset(perturb.dataset);
  write_dataset(perturb_dataset(instances, perturb.spec), perturb.out);
  std::cerr << "wrote " << instances.size() << " perturbed instances to " << perturb.out << "\n";
  return 0;
}

int run_train(const RunConfig& config) {
  const TrainSection& train_section = *config.train;
  const std::vector<SceneInstance> dataset = load_dataset(train_section.dataset);

  std::optional<Checkpoint> init;
  if (!train_section.init.empty()) init = load_checkpoint(train_section.init);

  std::ofstream log_file;
  if (!train_section.log_out.empty()) {
    log_file.open(train_section.log_out, std::ios::trunc);
    if (!log_file) throw IoError("cannot open '" + train_section.log_out + "' for writing");
  }
  std::ostream& log = train_section.log_out.empty() ? std::cout : log_file;

  const Checkpoint checkpoint =
      train(dataset, train_section.config, init, [&](const EpochStats& stats) {
        ordered_json line;
        line["epoch"] = stats.epoch;
        line["lr"] = stats.lr;
        line["mean_loss"] = stats.mean_loss;
        log << line.dump() << '\n';
      });
  save_checkpoint(checkpoint, train_section.checkpoint_out);
  std::cerr << "wrote checkpoint to " << train_section.checkpoint_out << "\n";
  return 0;
}

PipelineSpec build_pipeline(const std::vector<EvalStageConfig>& stages) {
  PipelineSpec pipeline;
  for (const EvalStageConfig& stage_config : stages) {
    PipelineStage stage;
    if (stage_config.stage == "sieve1") {
      stage.kind = StageKind::kSieve1;
      stage.keep_top = stage_config.keep_top;
      const SieveModel model = model_from_checkpoint(load_checkpoint(stage_config.checkpoint));
      if (model.kind != ModelKind::kSieve1) {
        throw ConfigError("pipeline: stage sieve1 given a " + std::string(model_kind_name(model.kind)) +
                          " checkpoint");
      }
      stage.sieve1 = model.sieve1;
    } else if (stage_config.stage == "sieve2" || stage_config.stage == "sieve3") {
      stage.kind = stage_config.stage == "sieve2" ? StageKind::kSieve2 : StageKind::kSieve3;
      stage.rule = stage_config.rule == "threshold" ? Sieve2Rule::kThreshold
                                                    : Sieve2Rule::kArgmaxCategory;
      stage.threshold = stage_config.threshold;
      const SieveModel model = model_from_checkpoint(load_checkpoint(stage_config.checkpoint));
      const ModelKind expected =
          stage_config.stage == "sieve2" ? ModelKind::kSieve2 : ModelKind::kSieve3;
      if (model.kind != expected) {
        throw ConfigError("pipeline: stage " + stage_config.stage + " given a " +
                          model_kind_name(model.kind) + " checkpoint");
      }
      stage.fusion = model.fusion;
      stage.vocab = model.vocab;
    } else if (stage_config.stage == "sieve2_oracle") {
      stage.kind = StageKind::kSieve2Oracle;
    } else {
      throw ConfigError("pipeline: unknown stage '" + stage_config.stage + "'");
    }
    pipeline.stages.push_back(std::move(stage));
  }
  pipeline.validate();
  return pipeline;
}

namespace {

// Model dimension compatibility against the evaluation dataset.
void check_pipeline_d_vis(const PipelineSpec& pipeline, const std::vector<SceneInstance>& dataset) {
  const int d_vis = dataset_d_vis(dataset);
  for (const PipelineStage& stage : pipeline.stages) {
    const int model_d_vis = stage.sieve1 ? stage.sieve1->d_vis()
                         : stage.fusion  ? stage.fusion->d_vis()
                                         : d_vis;
    if (model_d_vis != d_vis) {
      throw ConfigError("pipeline: stage " + std::string(stage_kind_name(stage.kind)) +
                        " expects d_vis " + std::to_string(model_d_vis) + ", dataset has " +
                        std::to_string(d_vis));
    }
  }
}

}  // namespace

int run_eval(const RunConfig& config) {
  const EvalSection& eval_section = *config.eval;
  const std::vector<SceneInstance> dataset = load_dataset(eval_section.dataset);
  const PipelineSpec pipeline = build_pipeline(eval_section.pipeline);
  check_pipeline_d_vis(pipeline, dataset);

  const EvalResult result = evaluate(pipeline, dataset, eval_section.k_list);

  std::string model_name;
  for (const EvalStageConfig& stage : eval_section.pipeline) {
    if (!model_name.empty()) model_name += "+";
    model_name += stage.stage;
  }
  std::vector<ReportRow> rows = {{model_name, result.precisions, ""}};
  write_text(eval_section.report_out,
             emit_report(rows, eval_section.k_list, parse_report_format(eval_section.format)));
  if (!eval_section.histogram_out.empty()) {
    write_text(eval_section.histogram_out, emit_survivor_histogram(pipeline, result));
  }
  return 0;
}

int run_stats(const RunConfig& config) {
  const StatsSection& stats_section = *config.stats;
  const std::vector<SceneInstance> dataset = load_dataset(stats_section.dataset);
  const CategoryTargetReport report =
      category_target_rate(dataset, stats_section.rare_threshold);

  ordered_json doc;
  ordered_json categories = ordered_json::array();
  for (const auto& [name, stat] : report.per_category) {
    ordered_json entry;
    entry["category"] = name;
    entry["occurrences"] = stat.occurrences;
    entry["target_selections"] = stat.target_selections;
    entry["rate"] = stat.rate;
    categories.push_back(std::move(entry));
  }
  doc["categories"] = std::move(categories);
  doc["rare_threshold"] = report.rare_threshold;
  doc["rare_categories"] = report.rare_categories;
  ordered_json baseline;
  for (int k : stats_section.k_list) {
    baseline["P@" + std::to_string(k)] = random_baseline(dataset, k);
  }
  doc["random_baseline"] = std::move(baseline);
  write_text(stats_section.out, doc.dump(2) + "\n");
  return 0;
}

namespace {

Tensor o1_fill(std::vector<int> shape, SplitMix64& rng) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-0.8, 0.8);
  return t;
}

// Random model at O(1) parameter scale. Central differences at h = 1e-4 need
// the fused joint vector's norm well above h; the 0.08 training init leaves
// it near 1e-5, where the step measures the normalization's curvature rather
// than the derivative.
SieveModel check_model(ModelKind kind, const Vocabulary& vocab, int d_vis, std::uint64_t seed) {
  SplitMix64 rng(seed);
  SieveModel model;
  model.kind = kind;
  model.vocab = vocab;
  if (kind == ModelKind::kSieve1) {
    SieveIParams params;
    params.score_w = o1_fill({1, d_vis + 5}, rng);
    model.sieve1 = std::move(params);
    return model;
  }
  const int hidden = 4;
  const int embed_dim = 6;
  const int attn_dim = 5;
  FusionParams fusion;
  fusion.encoder.embedding = o1_fill({vocab.size(), embed_dim}, rng);
  for (int layer = 0; layer < 2; ++layer) {
    for (int direction = 0; direction < 2; ++direction) {
      LstmWeights& w =
          fusion.encoder.lstm[static_cast<std::size_t>(layer)][static_cast<std::size_t>(direction)];
      w.w_input = o1_fill({4 * hidden, layer == 0 ? embed_dim : 2 * hidden}, rng);
      w.w_recur = o1_fill({4 * hidden, hidden}, rng);
      w.bias = Tensor({4 * hidden});
      for (int u = hidden; u < 2 * hidden; ++u) w.bias[u] = 1.0;
    }
  }
  fusion.encoder.attn_proj = o1_fill({attn_dim, 2 * hidden}, rng);
  fusion.encoder.attn_query = o1_fill({attn_dim}, rng);
  fusion.project_w = o1_fill({2 * hidden, d_vis + 5}, rng);
  fusion.score_w = o1_fill({1, 2 * hidden}, rng);
  model.fusion = std::move(fusion);
  return model;
}

}  // namespace

int run_check(const RunConfig& config) {
  const CheckSection& check = *config.check;

  // Small fixture with every model kind exercised end to end.
  SynthConfig synth;
  synth.images = 3;
  synth.categories = 5;
  synth.d_vis = 7;
  synth.boxes_min = 3;
  synth.boxes_max = 3;
  const std::vector<SceneInstance> dataset = generate_synthetic(synth, config.seed);
  const Vocabulary vocab = build_vocab(dataset, 1);

  bool all_passed = true;
  for (ModelKind kind : {ModelKind::kSieve1, ModelKind::kSieve2, ModelKind::kSieve3}) {
    for (int s = 0; s < check.seeds; ++s) {
      const SieveModel model =
          check_model(kind, vocab, synth.d_vis,
                      config.seed + static_cast<std::uint64_t>(s) * 1000003ull + 1);
      Graph graph;
      const NodeId loss_id = loss_node(graph, dataset.front(), model);
      const FiniteDifferenceReport report = finite_difference_check(
          graph, loss_id, check.step, check.tolerance, config.seed, 1 << 20);
      std::cout << model_kind_name(kind) << " seed " << s << ": " << report.summary() << "\n";
      all_passed = all_passed && report.passed;
    }
  }
  if (!all_passed) throw TrainingError("gradient check failed");
  return 0;
}

int run_repro(const RunConfig& config) {
  const ReproSection& repro = *config.repro;
  const std::vector<SceneInstance> train_set = load_dataset(repro.train_dataset);
  const std::vector<SceneInstance> test_set = load_dataset(repro.test_dataset);
  const std::vector<int>& k_list = repro.k_list;

  std::vector<ReportRow> rows;

  // Analytic chance row.
  {
    std::vector<double> precisions;
    for (int k : k_list) precisions.push_back(random_baseline(test_set, k));
    rows.push_back({"random-baseline", std::move(precisions), "analytic"});
  }

  auto train_kind = [&](ModelKind kind, const std::vector<SceneInstance>& data) {
    TrainConfig train_config = repro.train;
    train_config.kind = kind;
    return train(data, train_config);
  };
  auto eval_rows = [&](const PipelineSpec& pipeline, const std::vector<SceneInstance>& data) {
    return evaluate(pipeline, data, k_list).precisions;
  };

  std::cerr << "repro: training sieve1\n";
  const Checkpoint sieve1_ckpt = train_kind(ModelKind::kSieve1, train_set);
  const SieveModel sieve1_model = model_from_checkpoint(sieve1_ckpt);

  auto sieve1_stage = [&](std::optional<int> keep_top) {
    PipelineStage stage;
    stage.kind = StageKind::kSieve1;
    stage.keep_top = keep_top;
    stage.sieve1 = sieve1_model.sieve1;
    return stage;
  };

  {
    PipelineSpec pipeline;
    pipeline.stages = {sieve1_stage(std::nullopt)};
    rows.push_back({"sieve1", eval_rows(pipeline, test_set), "image-only"});
  }

  // Expression-using model under each expression perturbation, trained and
  // tested on identically perturbed splits.
  const std::vector<std::pair<std::string, PerturbationSpec>> grid = {
      {"sieve3", {PerturbKind::kNone, {}, 0}},
      {"sieve3", {PerturbKind::kShuffle, {}, config.seed}},
      {"sieve3", {PerturbKind::kKeepPos, {Pos::kNoun, Pos::kAdj}, 0}},
      {"sieve3", {PerturbKind::kKeepPos, {Pos::kNoun}, 0}},
      {"sieve3", {PerturbKind::kKeepPos, {Pos::kAdj}, 0}},
  };
  std::optional<SieveModel> sieve3_clean;
  for (const auto& [name, spec] : grid) {
    std::cerr << "repro: training " << name << " [" << perturb_kind_name(spec.kind) << "]\n";
    const std::vector<SceneInstance> perturbed_train = perturb_dataset(train_set, spec);
    const std::vector<SceneInstance> perturbed_test = perturb_dataset(test_set, spec);
    const Checkpoint ckpt = train_kind(ModelKind::kSieve3, perturbed_train);
    const SieveModel model = model_from_checkpoint(ckpt);
    if (spec.kind == PerturbKind::kNone) sieve3_clean = model;
    PipelineStage stage;
    stage.kind = StageKind::kSieve3;
    stage.fusion = model.fusion;
    stage.vocab = model.vocab;
    PipelineSpec pipeline;
    pipeline.stages = {stage};
    rows.push_back({name, eval_rows(pipeline, perturbed_test), precision_row_note(spec)});
  }

  std::cerr << "repro: training sieve2\n";
  const Checkpoint sieve2_ckpt = train_kind(ModelKind::kSieve2, train_set);
  const SieveModel sieve2_model = model_from_checkpoint(sieve2_ckpt);

  auto sieve2_stage = [&] {
    PipelineStage stage;
    stage.kind = StageKind::kSieve2;
    stage.fusion = sieve2_model.fusion;
    stage.vocab = sieve2_model.vocab;
    return stage;
  };
  auto oracle_stage = [] {
    PipelineStage stage;
    stage.kind = StageKind::kSieve2Oracle;
    return stage;
  };
  auto sieve3_stage = [&] {
    PipelineStage stage;
    stage.kind = StageKind::kSieve3;
    stage.fusion = sieve3_clean->fusion;
    stage.vocab = sieve3_clean->vocab;
    return stage;
  };

  const std::optional<int> keep = repro.keep_top;
  const std::vector<std::pair<std::string, PipelineSpec>> pipelines = {
      {"sieve1+sieve2", {{sieve1_stage(keep), sieve2_stage()}}},
      {"sieve1+sieve2(oracle)", {{sieve1_stage(keep), oracle_stage()}}},
      {"sieve1+sieve3", {{sieve1_stage(keep), sieve3_stage()}}},
      {"sieve1+sieve2+sieve3", {{sieve1_stage(keep), sieve2_stage(), sieve3_stage()}}},
  };
  for (const auto& [name, pipeline] : pipelines) {
    rows.push_back({name, eval_rows(pipeline, test_set),
                    "keep_top=" + std::to_string(repro.keep_top)});
  }

  write_text(repro.out, emit_report(rows, k_list, parse_report_format(repro.format)));
  return 0;
}

namespace {

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return json::parse(buffer.str());
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

// Scalar flag overrides are collected here and patched into the raw config
// document before validation, so one validation path serves both sources.
struct FlagPatch {
  std::string pointer;  // JSON pointer, e.g. "/train/epochs"
  json value;
};

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"sieve-pipeline trainer and dataset bias audit for referring expressions"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<FlagPatch> patches;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t v) { patches.push_back({"/seed", v}); }, "global run seed");
  };
  auto patch_option = [&](CLI::App* sub, const std::string& flag, const std::string& pointer,
                          const std::string& help) {
    sub->add_option_function<std::string>(
        flag, [&patches, pointer](const std::string& v) { patches.push_back({pointer, v}); },
        help);
  };
  auto patch_int = [&](CLI::App* sub, const std::string& flag, const std::string& pointer,
                       const std::string& help) {
    sub->add_option_function<int>(
        flag, [&patches, pointer](int v) { patches.push_back({pointer, v}); }, help);
  };
  auto patch_double = [&](CLI::App* sub, const std::string& flag, const std::string& pointer,
                          const std::string& help) {
    sub->add_option_function<double>(
        flag, [&patches, pointer](double v) { patches.push_back({pointer, v}); }, help);
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth);
  patch_option(synth, "--out", "/synth/out", "output JSONL path");
  patch_int(synth, "--images", "/synth/images", "number of images");
  patch_int(synth, "--categories", "/synth/categories", "number of categories");
  patch_int(synth, "--d-vis", "/synth/d_vis", "visual feature width");
  patch_int(synth, "--boxes-min", "/synth/boxes_min", "min boxes per image");
  patch_int(synth, "--boxes-max", "/synth/boxes_max", "max boxes per image");
  patch_double(synth, "--bias", "/synth/bias", "size-cue strength in [0,1]");

  CLI::App* perturb = app.add_subcommand("perturb", "apply an expression perturbation");
  add_common(perturb);
  patch_option(perturb, "--dataset", "/perturb/dataset", "input JSONL path");
  patch_option(perturb, "--out", "/perturb/out", "output JSONL path");
  patch_option(perturb, "--kind", "/perturb/spec/kind",
               "none | shuffle | keep_pos | drop_expression");

  CLI::App* train_cmd = app.add_subcommand("train", "train a sieve model");
  add_common(train_cmd);
  patch_option(train_cmd, "--dataset", "/train/dataset", "training JSONL path");
  patch_option(train_cmd, "--model", "/train/model", "sieve1 | sieve2 | sieve3");
  patch_option(train_cmd, "--checkpoint-out", "/train/checkpoint_out", "checkpoint path");
  patch_option(train_cmd, "--log-out", "/train/log_out", "training log path");
  patch_option(train_cmd, "--embeddings", "/train/embeddings", "pretrained embedding file");
  patch_option(train_cmd, "--init", "/train/init", "warm-start checkpoint");
  patch_int(train_cmd, "--epochs", "/train/epochs", "SGD epochs");
  patch_double(train_cmd, "--lr0", "/train/lr0", "initial learning rate");
  patch_double(train_cmd, "--decay", "/train/decay", "per-epoch learning rate factor");
  patch_int(train_cmd, "--hidden", "/train/hidden", "LSTM hidden size");
  patch_int(train_cmd, "--embed-dim", "/train/embed_dim", "embedding width");
  patch_int(train_cmd, "--attn-dim", "/train/attn_dim", "attention width");
  patch_int(train_cmd, "--min-count", "/train/min_count", "vocabulary frequency cutoff");

  CLI::App* eval_cmd = app.add_subcommand("eval", "rank a test set under a pipeline");
  add_common(eval_cmd);
  patch_option(eval_cmd, "--dataset", "/eval/dataset", "test JSONL path");
  patch_option(eval_cmd, "--report-out", "/eval/report_out", "report path (default stdout)");
  patch_option(eval_cmd, "--format", "/eval/format", "tsv | json | markdown");
  patch_option(eval_cmd, "--histogram-out", "/eval/histogram_out", "survivor histogram path");

  CLI::App* stats = app.add_subcommand("stats", "dataset bias statistics and random baseline");
  add_common(stats);
  patch_option(stats, "--dataset", "/stats/dataset", "JSONL path");
  patch_option(stats, "--out", "/stats/out", "output path (default stdout)");
  patch_double(stats, "--rare-threshold", "/stats/rare_threshold", "rare-category cutoff");

  CLI::App* check = app.add_subcommand("check", "finite-difference gradient check");
  add_common(check);
  patch_int(check, "--seeds", "/check/seeds", "number of random restarts");
  patch_double(check, "--step", "/check/step", "central difference step");
  patch_double(check, "--tolerance", "/check/tolerance", "max relative error");

  CLI::App* repro = app.add_subcommand("repro", "full perturbation + pipeline experiment grid");
  add_common(repro);
  patch_option(repro, "--train", "/repro/train", "training JSONL path");
  patch_option(repro, "--test", "/repro/test", "test JSONL path");
  patch_option(repro, "--out", "/repro/out", "report path (default stdout)");
  patch_option(repro, "--format", "/repro/format", "tsv | json | markdown");
  patch_int(repro, "--keep-top", "/repro/keep_top", "sieve1 cutoff in composed pipelines");
  patch_int(repro, "--epochs", "/repro/epochs", "SGD epochs");
  patch_int(repro, "--hidden", "/repro/hidden", "LSTM hidden size");
  patch_int(repro, "--embed-dim", "/repro/embed_dim", "embedding width");
  patch_int(repro, "--attn-dim", "/repro/attn_dim", "attention width");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    json raw = config_path.empty() ? json::object() : load_config_file(config_path);
    for (const FlagPatch& patch : patches) {
      try {
        raw[json::json_pointer(patch.pointer)] = patch.value;
      } catch (const json::exception& e) {
        throw ConfigError("cannot apply flag override at " + patch.pointer + ": " + e.what());
      }
    }
    const std::string subcommand = app.get_subcommands().front()->get_name();
    const RunConfig config = validate_config(raw, subcommand);
    if (subcommand == "synth") return run_synth(config);
    if (subcommand == "perturb") return run_perturb(config);
    if (subcommand == "train") return run_train(config);
    if (subcommand == "eval") return run_eval(config);
    if (subcommand == "stats") return run_stats(config);
    if (subcommand == "check") return run_check(config);
    if (subcommand == "repro") return run_repro(config);
    throw ConfigError("unknown subcommand '" + subcommand + "'");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace refsieve

// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include <set>

#include <nlohmann/json.hpp>

namespace s2s {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& section) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key())) {
      throw ConfigError("unknown key '" + it.key() + "' in config section '" + section + "'");
    }
  }
}

template <typename T>
void get_if(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) {
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

void CliConfig::derive_seeds() {
  noise.seed = noise_seed_explicit ? noise.seed : data_seed;
  entities.seed = entities_seed_explicit ? entities.seed : mix_seed(data_seed, kTagEntities);
  patterns.seed = patterns_seed_explicit ? patterns.seed : mix_seed(data_seed, kTagPatterns);
}

PhonemeInventory CliConfig::make_inventory() const {
  if (inventory_path) return load_inventory(*inventory_path);
  return PhonemeInventory::synthetic(inventory_phones);
}

EntityDb CliConfig::make_entities(const PhonemeInventory& inv) const {
  if (entities_path) return load_entity_db(*entities_path, inv, entities.max_slot_len);
  return synthesize_entities(inv, entities);
}

std::vector<QueryPattern> CliConfig::make_patterns(const PhonemeInventory& inv) const {
  if (patterns_path) return load_patterns(*patterns_path, inv);
  return synthesize_patterns(inv, patterns);
}

DatasetParams CliConfig::dataset_params(int jobs) const {
  DatasetParams p;
  p.n_train = n_train;
  p.n_test = n_test;
  p.oov_fraction = oov_fraction;
  p.max_speech_len = model.max_speech_len;
  p.noise = noise;
  p.jobs = jobs;
  return p;
}

CliConfig parse_cli_config(const std::string& json_text,
                           const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be a JSON object");
  reject_unknown_keys(root,
                      {"inventory", "entities", "patterns", "noise", "data", "model", "train",
                       "infer", "baseline"},
                      "<root>");

  CliConfig cfg;

  if (root.contains("inventory")) {
    const json& j = root["inventory"];
    reject_unknown_keys(j, {"phones", "path"}, "inventory");
    get_if(j, "phones", cfg.inventory_phones);
    if (j.contains("path")) {
      cfg.inventory_path = resolve(base_dir, j.at("path").get<std::string>());
    }
  }

  if (root.contains("entities")) {
    const json& j = root["entities"];
    reject_unknown_keys(j,
                        {"path", "count", "morpheme_count", "morpheme_len_min",
                         "morpheme_len_max", "morphemes_min", "morphemes_max", "max_slot_len",
                         "seed"},
                        "entities");
    if (j.contains("path")) cfg.entities_path = resolve(base_dir, j.at("path").get<std::string>());
    get_if(j, "count", cfg.entities.count);
    get_if(j, "morpheme_count", cfg.entities.morpheme_count);
    get_if(j, "morpheme_len_min", cfg.entities.morpheme_len_min);
    get_if(j, "morpheme_len_max", cfg.entities.morpheme_len_max);
    get_if(j, "morphemes_min", cfg.entities.morphemes_min);
    get_if(j, "morphemes_max", cfg.entities.morphemes_max);
    get_if(j, "max_slot_len", cfg.entities.max_slot_len);
    if (j.contains("seed")) {
      cfg.entities.seed = j.at("seed").get<uint64_t>();
      cfg.entities_seed_explicit = true;
    }
  }

  if (root.contains("patterns")) {
    const json& j = root["patterns"];
    reject_unknown_keys(j, {"path", "count", "prefix_max", "suffix_max", "seed"}, "patterns");
    if (j.contains("path")) cfg.patterns_path = resolve(base_dir, j.at("path").get<std::string>());
    get_if(j, "count", cfg.patterns.count);
    get_if(j, "prefix_max", cfg.patterns.prefix_max);
    get_if(j, "suffix_max", cfg.patterns.suffix_max);
    if (j.contains("seed")) {
      cfg.patterns.seed = j.at("seed").get<uint64_t>();
      cfg.patterns_seed_explicit = true;
    }
  }

  if (root.contains("noise")) {
    const json& j = root["noise"];
    reject_unknown_keys(j,
                        {"confusion_eps", "blank_insert_prob", "dur_min", "dur_max",
                         "confusable_k", "seed"},
                        "noise");
    get_if(j, "confusion_eps", cfg.noise.confusion_eps);
    get_if(j, "blank_insert_prob", cfg.noise.blank_insert_prob);
    get_if(j, "dur_min", cfg.noise.dur_min);
    get_if(j, "dur_max", cfg.noise.dur_max);
    get_if(j, "confusable_k", cfg.noise.confusable_k);
    if (j.contains("seed")) {
      cfg.noise.seed = j.at("seed").get<uint64_t>();
      cfg.noise_seed_explicit = true;
    }
    validate_noise_config(cfg.noise);
  }

  if (root.contains("data")) {
    const json& j = root["data"];
    reject_unknown_keys(j, {"n_train", "n_test", "oov_fraction", "seed"}, "data");
    get_if(j, "n_train", cfg.n_train);
    get_if(j, "n_test", cfg.n_test);
    get_if(j, "oov_fraction", cfg.oov_fraction);
    get_if(j, "seed", cfg.data_seed);
  }

  if (root.contains("model")) {
    const json& j = root["model"];
    reject_unknown_keys(j,
                        {"preset", "hidden", "intermediate", "heads", "layers_speech",
                         "layers_knowledge", "layers_bridge", "max_speech_len", "max_slot_len",
                         "rel_clip", "dropout", "activation"},
                        "model");
    if (j.contains("preset")) {
      std::string preset = j.at("preset").get<std::string>();
      if (preset == "desk") {
        cfg.model = ModelConfig::desk_preset();
      } else if (preset == "full") {
        cfg.model = ModelConfig::full_preset();
      } else {
        throw ConfigError("unknown model preset '" + preset + "' (expected desk or full)");
      }
    }
    get_if(j, "hidden", cfg.model.hidden);
    get_if(j, "intermediate", cfg.model.intermediate);
    get_if(j, "heads", cfg.model.heads);
    get_if(j, "layers_speech", cfg.model.layers_speech);
    get_if(j, "layers_knowledge", cfg.model.layers_knowledge);
    get_if(j, "layers_bridge", cfg.model.layers_bridge);
    get_if(j, "max_speech_len", cfg.model.max_speech_len);
    get_if(j, "max_slot_len", cfg.model.max_slot_len);
    get_if(j, "rel_clip", cfg.model.rel_clip);
    get_if(j, "dropout", cfg.model.dropout);
    get_if(j, "activation", cfg.model.activation);
  }

  if (root.contains("train")) {
    const json& j = root["train"];
    reject_unknown_keys(j,
                        {"lr", "epochs", "batch", "mask_loss_weight", "negatives",
                         "freeze_knowledge", "seed", "init_knowledge", "calibration_fraction"},
                        "train");
    get_if(j, "lr", cfg.train.lr);
    get_if(j, "epochs", cfg.train.epochs);
    get_if(j, "batch", cfg.train.batch);
    get_if(j, "mask_loss_weight", cfg.train.mask_loss_weight);
    get_if(j, "negatives", cfg.train.negatives);
    get_if(j, "freeze_knowledge", cfg.train.freeze_knowledge);
    get_if(j, "seed", cfg.train.seed);
    get_if(j, "calibration_fraction", cfg.train.calibration_fraction);
    if (j.contains("init_knowledge")) {
      cfg.train.init_knowledge = resolve(base_dir, j.at("init_knowledge").get<std::string>()).string();
    }
    cfg.train.validate();
  }

  if (root.contains("infer")) {
    const json& j = root["infer"];
    reject_unknown_keys(j, {"threshold", "edit_budget", "top_k", "max_candidates"}, "infer");
    get_if(j, "threshold", cfg.infer.threshold);
    get_if(j, "edit_budget", cfg.infer.edit_budget);
    get_if(j, "top_k", cfg.infer.top_k);
    get_if(j, "max_candidates", cfg.infer.max_candidates);
    if (cfg.infer.edit_budget < 0 || cfg.infer.top_k < 1 || cfg.infer.max_candidates < 1) {
      throw ConfigError("infer section has an out-of-range value");
    }
  }

  if (root.contains("baseline")) {
    const json& j = root["baseline"];
    reject_unknown_keys(j, {"lm_weight", "alpha", "top_k"}, "baseline");
    get_if(j, "lm_weight", cfg.baseline.lm_weight);
    get_if(j, "alpha", cfg.baseline.alpha);
    get_if(j, "top_k", cfg.baseline.top_k);
    if (cfg.baseline.lm_weight < 0.0 || cfg.baseline.alpha <= 0.0 || cfg.baseline.top_k < 1) {
      throw ConfigError("baseline section has an out-of-range value");
    }
  }

  cfg.derive_seeds();
  return cfg;
}

CliConfig load_cli_config(const std::filesystem::path& path) {
  if (path.empty()) {
    CliConfig cfg;
    cfg.derive_seeds();
    return cfg;
  }
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return parse_cli_config(text, path.parent_path());
}

}  // namespace s2s

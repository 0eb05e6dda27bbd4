// SPDX-License-Identifier: Apache-2.0
#include "centerscan/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <nlohmann/json.hpp>

namespace centerscan {

using nlohmann::json;

void ExperimentConfig::finalize() {
  if (grid_height == 0 || grid_width == 0) throw ConfigError("grid dimensions must be positive");
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (jobs == 0) throw ConfigError("jobs must be positive");
  if (ablation_seeds.empty()) throw ConfigError("ablation_seeds must not be empty");
  model.sync();
  model.encoder.block.priority.validate();
  model.encoder.validate();
  model.loss.validate();
  dataset.validate();
  train.validate();
}

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  try {
    check_keys(j, "config", {"grid", "priority", "scan", "encoder", "sps", "decoder", "loss", "ablation", "dataset",
                             "train", "ablation_seeds", "folds", "jobs"});
    if (j.contains("grid")) {
      const json& g = j["grid"];
      check_keys(g, "grid", {"height", "width"});
      read(g, "height", c.grid_height);
      read(g, "width", c.grid_width);
    }
    auto& block = c.model.encoder.block;
    if (j.contains("priority")) {
      const json& p = j["priority"];
      check_keys(p, "priority", {"alpha", "beta", "gamma", "epsilon", "lambda"});
      read(p, "alpha", block.priority.alpha);
      read(p, "beta", block.priority.beta);
      read(p, "gamma", block.priority.gamma);
      read(p, "epsilon", block.priority.epsilon);
      read(p, "lambda", block.priority.lambda_decay);
    }
    if (j.contains("scan")) {
      const json& s = j["scan"];
      check_keys(s, "scan", {"region_size", "strategy", "direction", "state_dim", "freeze_gates"});
      read(s, "region_size", block.region_size);
      if (s.contains("strategy")) block.strategy = parse_strategy(s["strategy"].get<std::string>());
      if (s.contains("direction")) block.direction = parse_direction(s["direction"].get<std::string>());
      read(s, "state_dim", block.state_dim);
      read(s, "freeze_gates", block.ssm.freeze_gates);
    }
    if (j.contains("encoder")) {
      const json& e = j["encoder"];
      check_keys(e, "encoder", {"in_channels", "embed_dim", "num_stages", "blocks_per_stage", "adapter_dim"});
      read(e, "in_channels", c.model.encoder.in_channels);
      read(e, "embed_dim", c.model.encoder.embed_dim);
      read(e, "num_stages", c.model.encoder.num_stages);
      read(e, "blocks_per_stage", c.model.encoder.blocks_per_stage);
      read(e, "adapter_dim", c.model.encoder.adapter_dim);
    }
    if (j.contains("sps")) {
      const json& s = j["sps"];
      check_keys(s, "sps", {"num_anchors", "memory_capacity", "tau_align", "tau_memory"});
      read(s, "num_anchors", c.model.sps.num_anchors);
      read(s, "memory_capacity", c.model.sps.memory_capacity);
      read(s, "tau_align", c.model.sps.tau_align);
      read(s, "tau_memory", c.model.sps.tau_memory);
    }
    if (j.contains("decoder")) {
      const json& d = j["decoder"];
      check_keys(d, "decoder", {"num_classes", "memory_capacity", "tau"});
      read(d, "num_classes", c.model.decoder.num_classes);
      read(d, "memory_capacity", c.model.decoder.memory_capacity);
      read(d, "tau", c.model.decoder.tau);
    }
    if (j.contains("loss")) {
      const json& l = j["loss"];
      check_keys(l, "loss", {"level_weights", "focal_gamma", "class_balance", "smooth"});
      read(l, "level_weights", c.model.loss.level_weights);
      read(l, "focal_gamma", c.model.loss.focal_gamma);
      read(l, "class_balance", c.model.loss.class_balance);
      read(l, "smooth", c.model.loss.smooth);
    }
    if (j.contains("ablation")) {
      const json& a = j["ablation"];
      if (a.is_string()) {
        c.model.ablation = AblationConfig::parse(a.get<std::string>());
      } else {
        check_keys(a, "ablation", {"A", "B", "C"});
        read(a, "A", c.model.ablation.A);
        read(a, "B", c.model.ablation.B);
        read(a, "C", c.model.ablation.C);
      }
    }
    if (j.contains("dataset")) {
      const json& d = j["dataset"];
      auto& ds = c.dataset;
      check_keys(d, "dataset", {"height", "width", "slices", "lesions_min", "lesions_max", "radius_min", "radius_max",
                                "contrast_min", "contrast_max", "max_drift", "min_persist", "noise_sigma",
                                "texture_amplitude", "train_volumes", "test_volumes"});
      read(d, "height", ds.height);
      read(d, "width", ds.width);
      read(d, "slices", ds.slices);
      read(d, "lesions_min", ds.lesions_min);
      read(d, "lesions_max", ds.lesions_max);
      read(d, "radius_min", ds.radius_min);
      read(d, "radius_max", ds.radius_max);
      read(d, "contrast_min", ds.contrast_min);
      read(d, "contrast_max", ds.contrast_max);
      read(d, "max_drift", ds.max_drift);
      read(d, "min_persist", ds.min_persist);
      read(d, "noise_sigma", ds.noise_sigma);
      read(d, "texture_amplitude", ds.texture_amplitude);
      read(d, "train_volumes", ds.train_volumes);
      read(d, "test_volumes", ds.test_volumes);
    }
    if (j.contains("train")) {
      const json& t = j["train"];
      check_keys(t, "train", {"steps", "slices_per_step", "base_lr", "lr_factor", "epoch_milestones",
                              "reference_epochs"});
      read(t, "steps", c.train.steps);
      read(t, "slices_per_step", c.train.slices_per_step);
      read(t, "base_lr", c.train.base_lr);
      read(t, "lr_factor", c.train.lr_factor);
      read(t, "epoch_milestones", c.train.epoch_milestones);
      read(t, "reference_epochs", c.train.reference_epochs);
    }
    read(j, "ablation_seeds", c.ablation_seeds);
    read(j, "folds", c.folds);
    read(j, "jobs", c.jobs);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  try {
    c.finalize();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  const auto& b = c.model.encoder.block;
  const auto& e = c.model.encoder;
  const auto& ds = c.dataset;
  json j;
  j["grid"] = {{"height", c.grid_height}, {"width", c.grid_width}};
  j["priority"] = {{"alpha", b.priority.alpha},
                   {"beta", b.priority.beta},
                   {"gamma", b.priority.gamma},
                   {"epsilon", b.priority.epsilon},
                   {"lambda", b.priority.lambda_decay}};
  j["scan"] = {{"region_size", b.region_size},
               {"strategy", std::string(to_string(b.strategy))},
               {"direction", std::string(to_string(b.direction))},
               {"state_dim", b.state_dim},
               {"freeze_gates", b.ssm.freeze_gates}};
  j["encoder"] = {{"in_channels", e.in_channels},
                  {"embed_dim", e.embed_dim},
                  {"num_stages", e.num_stages},
                  {"blocks_per_stage", e.blocks_per_stage},
                  {"adapter_dim", e.adapter_dim}};
  j["sps"] = {{"num_anchors", c.model.sps.num_anchors},
              {"memory_capacity", c.model.sps.memory_capacity},
              {"tau_align", c.model.sps.tau_align},
              {"tau_memory", c.model.sps.tau_memory}};
  j["decoder"] = {{"num_classes", c.model.decoder.num_classes},
                  {"memory_capacity", c.model.decoder.memory_capacity},
                  {"tau", c.model.decoder.tau}};
  j["loss"] = {{"level_weights", c.model.loss.level_weights},
               {"focal_gamma", c.model.loss.focal_gamma},
               {"class_balance", c.model.loss.class_balance},
               {"smooth", c.model.loss.smooth}};
  j["ablation"] = {{"A", c.model.ablation.A}, {"B", c.model.ablation.B}, {"C", c.model.ablation.C}};
  j["dataset"] = {{"height", ds.height},
                  {"width", ds.width},
                  {"slices", ds.slices},
                  {"lesions_min", ds.lesions_min},
                  {"lesions_max", ds.lesions_max},
                  {"radius_min", ds.radius_min},
                  {"radius_max", ds.radius_max},
                  {"contrast_min", ds.contrast_min},
                  {"contrast_max", ds.contrast_max},
                  {"max_drift", ds.max_drift},
                  {"min_persist", ds.min_persist},
                  {"noise_sigma", ds.noise_sigma},
                  {"texture_amplitude", ds.texture_amplitude},
                  {"train_volumes", ds.train_volumes},
                  {"test_volumes", ds.test_volumes}};
  j["train"] = {{"steps", c.train.steps},
                {"slices_per_step", c.train.slices_per_step},
                {"base_lr", c.train.base_lr},
                {"lr_factor", c.train.lr_factor},
                {"epoch_milestones", c.train.epoch_milestones},
                {"reference_epochs", c.train.reference_epochs}};
  j["ablation_seeds"] = c.ablation_seeds;
  j["folds"] = c.folds;
  j["jobs"] = c.jobs;
  return j.dump(2) + "\n";
}

}  // namespace centerscan

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "centerscan/model.hpp"
#include "centerscan/synthetic.hpp"
#include "centerscan/training.hpp"

namespace centerscan {

/// Everything a CLI run needs apart from the master seed.
struct ExperimentConfig {
  std::size_t grid_height = 6, grid_width = 6;  // scan-dump / kernel-analyze grid
  ModelConfig model;
  DatasetSpec dataset;
  TrainConfig train;
  std::vector<std::uint64_t> ablation_seeds{1, 2, 3};
  std::size_t folds = 5;
  std::size_t jobs = 1;

  /// Validates every section and synchronises derived widths.
  void finalize();
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// JSON text. Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace centerscan

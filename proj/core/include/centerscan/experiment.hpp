// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "centerscan/config.hpp"
#include "centerscan/metrics.hpp"
#include "centerscan/training.hpp"

namespace centerscan {

/// Streams derived from one master seed. Data, initialisation and sampling
/// each get their own fork, so switching ablation flags never shifts the
/// data or the shared initial weights.
struct SeedStreams {
  std::uint64_t data, model, train;
  static SeedStreams from(std::uint64_t master);
};

struct RunResult {
  AblationConfig config;
  std::uint64_t seed = 0;
  std::vector<LossRow> losses;
  EvalResult eval;
  double seconds = 0.0;  // wall time, never written to CSV
};

/// Generates the dataset, trains on its training split and evaluates on the held-out split.
RunResult run_single(const ExperimentConfig& cfg, const AblationConfig& ablation, std::uint64_t seed,
                     SegmentationModel* trained = nullptr);

struct MeanSd {
  double mean = 0.0, sd = 0.0;  // sample sd, 0 for a single run
};
MeanSd mean_sd(const std::vector<double>& xs);

struct AblationSummary {
  AblationConfig config;
  std::size_t runs = 0;
  MeanSd dice, iou, precision, sensitivity;
};

struct AblationTable {
  std::vector<RunResult> runs;  // config-major, then seed order
  std::vector<AblationSummary> summary;
};

/// Called once per finished run with the trained model; may run on worker threads.
using RunObserver = std::function<void(const RunResult&, const SegmentationModel&)>;

/// Each (config, seed) run is independent; `jobs` > 1 runs them on threads
/// without changing any result.
AblationTable run_ablation(const ExperimentConfig& cfg, const std::vector<AblationConfig>& configs,
                           const std::vector<std::uint64_t>& seeds, std::size_t jobs = 1,
                           const RunObserver& observer = {});

struct TrendCheck {
  bool passed = false;
  std::size_t inversions = 0;
  std::vector<std::string> notes;
};
/// Mean Dice must be non-decreasing along `summary` except for at most one
/// adjacent drop no larger than the larger sd of the pair.
TrendCheck check_trend(const std::vector<AblationSummary>& summary);

std::string ablation_csv(const AblationTable& table);  // one mean/sd row per config
std::string runs_csv(const AblationTable& table);      // one row per (config, seed)
std::string metrics_csv(const EvalResult& eval);       // per volume plus aggregate
std::string loss_csv(const std::vector<LossRow>& rows);

/// fold[i] in [0, k): a seeded shuffle dealt round-robin, so fold sizes differ by at most one.
std::vector<std::size_t> fold_assignment(std::size_t volumes, std::size_t k, std::uint64_t seed);

struct CrossValResult {
  std::vector<std::size_t> fold_of;
  std::vector<MetricReport> per_fold;
  MetricReport aggregate;  // pooled over every held-out slice of every fold
};

/// Subject-wise k-fold: each fold trains a fresh model on the other folds' volumes.
CrossValResult cross_validate(const ExperimentConfig& cfg, const std::vector<SyntheticVolume>& volumes,
                              std::size_t k, std::uint64_t seed);

std::string crossval_csv(const CrossValResult& r);

}  // namespace centerscan

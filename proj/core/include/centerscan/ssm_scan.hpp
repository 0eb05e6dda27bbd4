// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "centerscan/parameters.hpp"
#include "centerscan/rng.hpp"
#include "centerscan/scan_geometry.hpp"
#include "centerscan/tensor.hpp"

namespace centerscan {

/// Discretized selective state-space parameters for D channels and N states.
///
///   a   = sigmoid(decay_logits)                 (N)
///   g_t = sigmoid(gate_weight x_t + gate_bias)  (N)
///   h_t = a * h_{t-1} + g_t * (input_proj x_t), h_0 = 0
///   y_t = output_proj h_t + skip_scale * x_t
struct SsmParams {
  Tensor decay_logits;  // (N)
  Tensor gate_weight;   // (N, D)
  Tensor gate_bias;     // (N)
  Tensor input_proj;    // (N, D)
  Tensor output_proj;   // (D, N)
  Tensor skip_scale;    // (D)

  std::size_t channels() const { return input_proj.dim(1); }
  std::size_t state_dim() const { return input_proj.dim(0); }
  std::vector<double> decay() const;
  void validate() const;

  static SsmParams create(ParameterSet& registry, const std::string& prefix, std::size_t channels,
                          std::size_t state_dim, Rng& rng, bool frozen = false);
};

struct SsmOptions {
  /// Forces g_t = 1 (plain linear recurrence).
  bool freeze_gates = false;
};

/// Runs the recurrence along each path of row indices into tokens (T, D).
/// Paths must be nonempty and pairwise disjoint; output row r holds y_t of the
/// step that consumed row r, rows outside every path are zero.
Tensor ssm_scan_paths(const Tensor& tokens, const std::vector<std::vector<std::size_t>>& paths,
                      const SsmParams& params, SsmOptions opts = {});

/// Single sequence (L, D) -> per-position outputs (L, D).
Tensor ssm_scan(const Tensor& sequence, const SsmParams& params, SsmOptions opts = {});
/// Region summary Y = y_L, the output at the final state. Shape (1, D).
Tensor final_state_readout(const Tensor& sequence, const SsmParams& params, SsmOptions opts = {});

/// Per-cell influence on a region's final-state readout.
struct EffectiveKernel {
  std::vector<Coord> cells;                // region cells, row-major
  std::vector<double> weights;             // nonnegative, sums to 1
  std::vector<std::size_t> scan_position;  // index of each cell along the consumed path

  double weight_at(Coord p) const;
};

/// w(p) = L1 norm of dY/dX_p at an all-ones reference input, by central
/// differences, normalized to sum 1. `consumed` is the order the SSM reads.
EffectiveKernel measure_effective_kernel(const SsmParams& params, const Region& region, const ScanPath& consumed,
                                         SsmOptions opts = {}, double step = 1e-6);

struct KernelGroups {
  double center = 0.0;
  double axis_mean = 0.0;    // cells sharing a row/column with the center cell
  double corner_mean = 0.0;  // everything else
};
KernelGroups group_kernel(const EffectiveKernel& kernel, const Region& region);

enum class ScanDirection {
  PriorityOrder,  // the SSM reads cells in scan_order's order
  Reversed,       // the SSM reads scan_order's order back to front
};

std::string_view to_string(ScanDirection d);
ScanDirection parse_direction(std::string_view name);

struct CenterBlockConfig {
  int region_size = 3;
  ScanStrategy strategy = ScanStrategy::CenterPriority;
  ScanDirection direction = ScanDirection::Reversed;
  PriorityParams priority;
  std::size_t state_dim = 4;
  SsmOptions ssm;
};

/// Orders the SSM consumes for one region under cfg.
std::vector<ScanPath> consumed_paths(const Region& region, const CenterBlockConfig& cfg);

/// Local-scan SSM mixer: gather along scan paths, scan, scatter back, then
/// tokens + mix(layer_norm(scan)).
struct CenterBlock {
  CenterBlockConfig config;
  SsmParams ssm;
  Tensor norm_gain, norm_bias;   // (C)
  Tensor mix_weight, mix_bias;   // (C, C), (C)

  static CenterBlock create(ParameterSet& registry, const std::string& prefix, std::size_t channels,
                            const CenterBlockConfig& cfg, Rng& rng, bool frozen = false);
  Tensor forward(const Tensor& fmap) const;
};

/// fmap (N, C, H, W) with a partition of its H x W grid.
Tensor center_block_forward(const Tensor& fmap, const RegionPartition& partition, const CenterBlock& block);

}  // namespace centerscan

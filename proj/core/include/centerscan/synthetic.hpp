// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "centerscan/losses.hpp"
#include "centerscan/rng.hpp"
#include "centerscan/tensor.hpp"

namespace centerscan {

/// Generator settings for small, faint, slowly drifting lesions.
struct DatasetSpec {
  std::size_t height = 32, width = 32, slices = 8;
  std::size_t lesions_min = 1, lesions_max = 3;
  double radius_min = 1.0, radius_max = 4.0;
  double contrast_min = 0.05, contrast_max = 0.2;
  double max_drift = 1.0;        // px per slice, each axis
  std::size_t min_persist = 3;   // consecutive slices per lesion
  double noise_sigma = 0.03;
  double texture_amplitude = 0.05;
  std::size_t train_volumes = 40, test_volumes = 10;

  void validate() const;
};

struct Lesion {
  std::size_t first_slice = 0, last_slice = 0;  // inclusive
  std::vector<double> center_row, center_col, radius;  // one entry per covered slice
  double contrast = 0.0;
};

struct SyntheticVolume {
  std::size_t height = 0, width = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> images;  // per slice, row-major
  std::vector<LabelMap> masks;              // per slice, 1 = lesion
  std::vector<Lesion> lesions;

  std::size_t slices() const { return images.size(); }
  /// (1, 1, H, W) constant tensor of one slice.
  Tensor slice_tensor(std::size_t s) const;
};

/// Deterministic in (spec, seed). Lesions are discs of +contrast on a smooth
/// sinusoidal texture with additive Gaussian noise; each lesion spans at
/// least min_persist consecutive slices and its centre drifts by at most
/// max_drift per slice.
SyntheticVolume generate_volume(const DatasetSpec& spec, std::uint64_t seed);

struct Dataset {
  std::vector<SyntheticVolume> train, test;
};
Dataset generate_dataset(const DatasetSpec& spec, std::uint64_t seed);

}  // namespace centerscan

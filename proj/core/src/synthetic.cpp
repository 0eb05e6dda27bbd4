// SPDX-License-Identifier: Apache-2.0
#include "centerscan/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace centerscan {

void DatasetSpec::validate() const {
  if (height == 0 || width == 0 || slices == 0) throw std::invalid_argument("DatasetSpec: empty volume");
  if (lesions_min > lesions_max) throw std::invalid_argument("DatasetSpec: lesions_min > lesions_max");
  if (!(radius_min > 0.0) || radius_min > radius_max) throw std::invalid_argument("DatasetSpec: bad radius range");
  if (2.0 * radius_max + 1.0 > static_cast<double>(std::min(height, width))) {
    throw std::invalid_argument("DatasetSpec: lesion radius " + std::to_string(radius_max) + " exceeds the " +
                                std::to_string(height) + "x" + std::to_string(width) + " grid");
  }
  if (contrast_min < 0.0 || contrast_min > contrast_max) throw std::invalid_argument("DatasetSpec: bad contrast range");
  if (max_drift < 0.0) throw std::invalid_argument("DatasetSpec: negative drift");
  if (lesions_max > 0 && (min_persist == 0 || min_persist > slices)) {
    throw std::invalid_argument("DatasetSpec: min_persist must be in [1, slices]");
  }
  if (noise_sigma < 0.0 || texture_amplitude < 0.0) throw std::invalid_argument("DatasetSpec: negative noise");
}

Tensor SyntheticVolume::slice_tensor(std::size_t s) const {
  return Tensor::from({1, 1, height, width}, images.at(s));
}

SyntheticVolume generate_volume(const DatasetSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t H = spec.height, W = spec.width, S = spec.slices;
  Rng root(seed);
  Rng tex = root.fork("texture");
  Rng les = root.fork("lesions");
  Rng noise = root.fork("noise");

  SyntheticVolume v;
  v.height = H;
  v.width = W;
  v.seed = seed;

  // Low-frequency background shared by all slices, with a slow per-slice phase shift.
  struct Wave {
    double fy, fx, phase, shift, amp;
  };
  std::vector<Wave> waves;
  for (int k = 0; k < 3; ++k) {
    waves.push_back({tex.uniform(0.5, 2.5), tex.uniform(0.5, 2.5), tex.uniform(0.0, 2 * std::numbers::pi),
                     tex.uniform(-0.3, 0.3), spec.texture_amplitude * tex.uniform(0.5, 1.0)});
  }

  const std::size_t count = spec.lesions_min + (spec.lesions_max > spec.lesions_min
                                                    ? les.index(spec.lesions_max - spec.lesions_min + 1)
                                                    : 0);
  const double margin = spec.radius_max;
  for (std::size_t i = 0; i < count; ++i) {
    Lesion l;
    const std::size_t len = spec.min_persist + les.index(S - spec.min_persist + 1);
    l.first_slice = les.index(S - len + 1);
    l.last_slice = l.first_slice + len - 1;
    l.contrast = les.uniform(spec.contrast_min, spec.contrast_max);
    const double r = les.uniform(spec.radius_min, spec.radius_max);
    double cy = les.uniform(margin, static_cast<double>(H) - 1.0 - margin);
    double cx = les.uniform(margin, static_cast<double>(W) - 1.0 - margin);
    for (std::size_t s = 0; s < len; ++s) {
      if (s > 0) {
        cy = std::clamp(cy + les.uniform(-spec.max_drift, spec.max_drift), margin, static_cast<double>(H) - 1.0 - margin);
        cx = std::clamp(cx + les.uniform(-spec.max_drift, spec.max_drift), margin, static_cast<double>(W) - 1.0 - margin);
      }
      // Cross-section of a blob: widest mid-way, tapering towards its ends.
      const double t = (static_cast<double>(s) + 0.5) / static_cast<double>(len);
      const double profile = 0.6 + 0.4 * std::sin(std::numbers::pi * t);
      l.center_row.push_back(cy);
      l.center_col.push_back(cx);
      l.radius.push_back(std::max(spec.radius_min, r * profile));
    }
    v.lesions.push_back(std::move(l));
  }

  for (std::size_t s = 0; s < S; ++s) {
    std::vector<double> img(H * W);
    LabelMap mask{H, W, std::vector<std::uint8_t>(H * W, 0)};
    std::vector<double> lift(H * W, 0.0);
    for (const auto& l : v.lesions) {
      if (s < l.first_slice || s > l.last_slice) continue;
      const std::size_t k = s - l.first_slice;
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          const double dy = static_cast<double>(y) - l.center_row[k];
          const double dx = static_cast<double>(x) - l.center_col[k];
          if (dy * dy + dx * dx <= l.radius[k] * l.radius[k]) {
            mask.labels[y * W + x] = 1;
            lift[y * W + x] = std::max(lift[y * W + x], l.contrast);
          }
        }
    }
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        double bg = 0.5;
        for (const auto& w : waves) {
          bg += w.amp * std::sin(w.fy * 2 * std::numbers::pi * static_cast<double>(y) / static_cast<double>(H) +
                                 w.fx * 2 * std::numbers::pi * static_cast<double>(x) / static_cast<double>(W) +
                                 w.phase + w.shift * static_cast<double>(s));
        }
        const double n = spec.noise_sigma > 0.0 ? noise.normal(0.0, spec.noise_sigma) : 0.0;
        img[y * W + x] = bg + lift[y * W + x] + n;
      }
    v.images.push_back(std::move(img));
    v.masks.push_back(std::move(mask));
  }
  return v;
}

Dataset generate_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  Rng root(seed);
  Rng seeds = root.fork("dataset");
  Dataset d;
  for (std::size_t i = 0; i < spec.train_volumes; ++i) d.train.push_back(generate_volume(spec, seeds.engine()()));
  for (std::size_t i = 0; i < spec.test_volumes; ++i) d.test.push_back(generate_volume(spec, seeds.engine()()));
  return d;
}

}  // namespace centerscan

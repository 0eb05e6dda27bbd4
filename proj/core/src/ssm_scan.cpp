// SPDX-License-Identifier: Apache-2.0
#include "centerscan/ssm_scan.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "centerscan/nn.hpp"
#include "centerscan/ops.hpp"

namespace centerscan {

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

struct ScanTrace {
  std::vector<double> a;        // (N)
  std::vector<double> h, g, u;  // (T, N)
  std::vector<double> y;        // (T, D)
};

// Forward recurrence over raw buffers; shared by the differentiable op and
// the finite-difference kernel probe.
ScanTrace run_scan(std::span<const double> x, std::size_t rows, std::size_t D,
                   const std::vector<std::vector<std::size_t>>& paths, const SsmParams& p, SsmOptions opts) {
  const std::size_t N = p.state_dim();
  auto dl = p.decay_logits.data();
  auto Wg = p.gate_weight.data();
  auto bg = p.gate_bias.data();
  auto B = p.input_proj.data();
  auto C = p.output_proj.data();
  auto skip = p.skip_scale.data();
  ScanTrace tr;
  tr.a.resize(N);
  for (std::size_t i = 0; i < N; ++i) tr.a[i] = sigmoid(dl[i]);
  tr.h.assign(rows * N, 0.0);
  tr.g.assign(rows * N, 0.0);
  tr.u.assign(rows * N, 0.0);
  tr.y.assign(rows * D, 0.0);
  std::vector<double> hprev(N);
  for (const auto& path : paths) {
    std::fill(hprev.begin(), hprev.end(), 0.0);
    for (auto row : path) {
      const double* xt = x.data() + row * D;
      double* h = tr.h.data() + row * N;
      double* g = tr.g.data() + row * N;
      double* u = tr.u.data() + row * N;
      for (std::size_t i = 0; i < N; ++i) {
        double bu = 0.0, z = bg[i];
        for (std::size_t k = 0; k < D; ++k) {
          bu += B[i * D + k] * xt[k];
          z += Wg[i * D + k] * xt[k];
        }
        u[i] = bu;
        g[i] = opts.freeze_gates ? 1.0 : sigmoid(z);
        h[i] = tr.a[i] * hprev[i] + g[i] * u[i];
      }
      double* y = tr.y.data() + row * D;
      for (std::size_t k = 0; k < D; ++k) {
        double acc = skip[k] * xt[k];
        for (std::size_t i = 0; i < N; ++i) acc += C[k * N + i] * h[i];
        y[k] = acc;
      }
      std::copy(h, h + N, hprev.begin());
    }
  }
  return tr;
}

void validate_paths(const std::vector<std::vector<std::size_t>>& paths, std::size_t rows) {
  std::vector<bool> used(rows, false);
  for (const auto& path : paths) {
    if (path.empty()) throw std::invalid_argument("ssm_scan: empty sequence");
    for (auto r : path) {
      if (r >= rows) throw ShapeError("ssm_scan: path row " + std::to_string(r) + " out of range");
      if (used[r]) throw std::invalid_argument("ssm_scan: row " + std::to_string(r) + " appears in two paths");
      used[r] = true;
    }
  }
}

}  // namespace

std::vector<double> SsmParams::decay() const {
  std::vector<double> a;
  for (double v : decay_logits.data()) a.push_back(sigmoid(v));
  return a;
}

void SsmParams::validate() const {
  const std::size_t N = input_proj.dim(0), D = input_proj.dim(1);
  auto expect = [](const Tensor& t, const Shape& s, const char* name) {
    if (t.shape() != s) {
      throw ShapeError(std::string("SsmParams: ") + name + " has shape " + shape_str(t.shape()) + ", expected " +
                       shape_str(s));
    }
  };
  expect(decay_logits, {N}, "decay_logits");
  expect(gate_weight, {N, D}, "gate_weight");
  expect(gate_bias, {N}, "gate_bias");
  expect(output_proj, {D, N}, "output_proj");
  expect(skip_scale, {D}, "skip_scale");
}

SsmParams SsmParams::create(ParameterSet& reg, const std::string& prefix, std::size_t D, std::size_t N, Rng& rng,
                            bool frozen) {
  SsmParams p;
  p.decay_logits = reg.add(prefix + "decay_logits", rand_uniform({N}, rng, -1.0, 2.0), frozen);
  p.gate_weight = reg.add(prefix + "gate_weight", randn({N, D}, rng, 1.0 / std::sqrt(double(D))), frozen);
  p.gate_bias = reg.add(prefix + "gate_bias", Tensor::zeros({N}), frozen);
  p.input_proj = reg.add(prefix + "input_proj", randn({N, D}, rng, 1.0 / std::sqrt(double(D))), frozen);
  p.output_proj = reg.add(prefix + "output_proj", randn({D, N}, rng, 1.0 / std::sqrt(double(N))), frozen);
  p.skip_scale = reg.add(prefix + "skip_scale", Tensor::full({D}, 1.0), frozen);
  return p;
}

Tensor ssm_scan_paths(const Tensor& tokens, const std::vector<std::vector<std::size_t>>& paths,
                      const SsmParams& params, SsmOptions opts) {
  params.validate();
  if (tokens.rank() != 2 || tokens.dim(1) != params.channels()) {
    throw ShapeError("ssm_scan: tokens " + shape_str(tokens.shape()) + " do not match " +
                     std::to_string(params.channels()) + " channels");
  }
  const std::size_t T = tokens.dim(0), D = tokens.dim(1), N = params.state_dim();
  validate_paths(paths, T);
  ScanTrace tr = run_scan(tokens.data(), T, D, paths, params, opts);
  std::vector<double> out = tr.y;
  std::vector<Tensor> parents{tokens,           params.decay_logits, params.gate_weight, params.gate_bias,
                              params.input_proj, params.output_proj,  params.skip_scale};
  return Tensor::make(
      {T, D}, std::move(out), parents, "ssm_scan",
      [paths, tr = std::move(tr), T, D, N, opts](detail::Node& self) {
        auto value = [&](std::size_t i) { return self.parents[i]->data.data(); };
        auto sink = [&](std::size_t i) -> double* {
          auto& p = *self.parents[i];
          return p.requires_grad ? p.grad_buffer().data() : nullptr;
        };
        const double* x = value(0);
        const double* Wg = value(2);
        const double* B = value(4);
        const double* C = value(5);
        const double* skip = value(6);
        double* gx = sink(0);
        double* gdl = sink(1);
        double* gWg = sink(2);
        double* gbg = sink(3);
        double* gB = sink(4);
        double* gC = sink(5);
        double* gskip = sink(6);
        const double* G = self.grad.data();
        std::vector<double> da(N, 0.0), carry(N), lam(N), du(N), dz(N);
        for (const auto& path : paths) {
          std::fill(carry.begin(), carry.end(), 0.0);
          for (std::size_t t = path.size(); t-- > 0;) {
            const std::size_t row = path[t];
            const double* dy = G + row * D;
            const double* xt = x + row * D;
            const double* h = tr.h.data() + row * N;
            const double* g = tr.g.data() + row * N;
            const double* u = tr.u.data() + row * N;
            for (std::size_t i = 0; i < N; ++i) {
              double acc = carry[i];
              for (std::size_t k = 0; k < D; ++k) acc += C[k * N + i] * dy[k];
              lam[i] = acc;
            }
            if (gC) {
              for (std::size_t k = 0; k < D; ++k)
                for (std::size_t i = 0; i < N; ++i) gC[k * N + i] += dy[k] * h[i];
            }
            if (gskip) {
              for (std::size_t k = 0; k < D; ++k) gskip[k] += dy[k] * xt[k];
            }
            const double* hprev = t > 0 ? tr.h.data() + path[t - 1] * N : nullptr;
            for (std::size_t i = 0; i < N; ++i) {
              if (hprev) da[i] += lam[i] * hprev[i];
              carry[i] = tr.a[i] * lam[i];
              du[i] = lam[i] * g[i];
              dz[i] = opts.freeze_gates ? 0.0 : lam[i] * u[i] * g[i] * (1.0 - g[i]);
            }
            for (std::size_t i = 0; i < N; ++i) {
              if (gbg) gbg[i] += dz[i];
              for (std::size_t k = 0; k < D; ++k) {
                if (gB) gB[i * D + k] += du[i] * xt[k];
                if (gWg) gWg[i * D + k] += dz[i] * xt[k];
              }
            }
            if (gx) {
              double* dx = gx + row * D;
              for (std::size_t k = 0; k < D; ++k) {
                double acc = skip[k] * dy[k];
                for (std::size_t i = 0; i < N; ++i) acc += B[i * D + k] * du[i] + Wg[i * D + k] * dz[i];
                dx[k] += acc;
              }
            }
          }
        }
        if (gdl) {
          for (std::size_t i = 0; i < N; ++i) gdl[i] += da[i] * tr.a[i] * (1.0 - tr.a[i]);
        }
      });
}

Tensor ssm_scan(const Tensor& sequence, const SsmParams& params, SsmOptions opts) {
  if (sequence.rank() != 2) throw ShapeError("ssm_scan: expected (L, D), got " + shape_str(sequence.shape()));
  std::vector<std::size_t> path(sequence.dim(0));
  for (std::size_t i = 0; i < path.size(); ++i) path[i] = i;
  return ssm_scan_paths(sequence, {path}, params, opts);
}

Tensor final_state_readout(const Tensor& sequence, const SsmParams& params, SsmOptions opts) {
  Tensor y = ssm_scan(sequence, params, opts);
  return ops::slice(y, 0, y.dim(0) - 1, 1);
}

double EffectiveKernel::weight_at(Coord p) const {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i] == p) return weights[i];
  }
  throw std::invalid_argument("EffectiveKernel: cell not in region");
}

EffectiveKernel measure_effective_kernel(const SsmParams& params, const Region& region, const ScanPath& consumed,
                                         SsmOptions opts, double step) {
  if (!is_permutation_of(consumed, region)) {
    throw std::invalid_argument("measure_effective_kernel: path is not a permutation of the region");
  }
  params.validate();
  const std::size_t L = consumed.order.size(), D = params.channels();
  std::vector<double> x(L * D, 1.0);
  std::vector<std::size_t> path(L);
  for (std::size_t i = 0; i < L; ++i) path[i] = i;
  const std::vector<std::vector<std::size_t>> paths{path};
  auto readout = [&]() {
    auto tr = run_scan(x, L, D, paths, params, opts);
    return std::vector<double>(tr.y.end() - static_cast<std::ptrdiff_t>(D), tr.y.end());
  };

  EffectiveKernel k;
  k.cells = region.cells();
  k.weights.assign(L, 0.0);
  k.scan_position.assign(L, 0);
  for (std::size_t t = 0; t < L; ++t) {
    const auto cell_idx = static_cast<std::size_t>(std::find(k.cells.begin(), k.cells.end(), consumed.order[t]) -
                                                   k.cells.begin());
    k.scan_position[cell_idx] = t;
    double l1 = 0.0;
    for (std::size_t c = 0; c < D; ++c) {
      double& v = x[t * D + c];
      const double orig = v;
      v = orig + step;
      auto yp = readout();
      v = orig - step;
      auto ym = readout();
      v = orig;
      for (std::size_t o = 0; o < D; ++o) l1 += std::abs((yp[o] - ym[o]) / (2.0 * step));
    }
    k.weights[cell_idx] = l1;
  }
  double total = 0.0;
  for (double w : k.weights) total += w;
  if (total > 0.0) {
    for (double& w : k.weights) w /= total;
  } else {
    for (double& w : k.weights) w = 1.0 / static_cast<double>(L);
  }
  return k;
}

KernelGroups group_kernel(const EffectiveKernel& kernel, const Region& region) {
  const Coord c = center_cell(region);
  KernelGroups g;
  double axis = 0.0, corner = 0.0;
  std::size_t na = 0, nc = 0;
  for (std::size_t i = 0; i < kernel.cells.size(); ++i) {
    const Coord p = kernel.cells[i];
    if (p == c) {
      g.center = kernel.weights[i];
    } else if (p.row == c.row || p.col == c.col) {
      axis += kernel.weights[i];
      ++na;
    } else {
      corner += kernel.weights[i];
      ++nc;
    }
  }
  g.axis_mean = na ? axis / static_cast<double>(na) : 0.0;
  g.corner_mean = nc ? corner / static_cast<double>(nc) : 0.0;
  return g;
}

std::string_view to_string(ScanDirection d) {
  return d == ScanDirection::Reversed ? "reversed" : "priority_order";
}

ScanDirection parse_direction(std::string_view name) {
  if (name == "reversed") return ScanDirection::Reversed;
  if (name == "priority_order") return ScanDirection::PriorityOrder;
  throw std::invalid_argument("unknown scan direction '" + std::string(name) + "'");
}

std::vector<ScanPath> consumed_paths(const Region& region, const CenterBlockConfig& cfg) {
  auto paths = scan_order(region, cfg.strategy, cfg.priority);
  if (cfg.direction == ScanDirection::Reversed) {
    for (auto& p : paths) std::reverse(p.order.begin(), p.order.end());
  }
  return paths;
}

CenterBlock CenterBlock::create(ParameterSet& reg, const std::string& prefix, std::size_t channels,
                                const CenterBlockConfig& cfg, Rng& rng, bool frozen) {
  CenterBlock b;
  b.config = cfg;
  b.ssm = SsmParams::create(reg, prefix + "ssm.", channels, cfg.state_dim, rng, frozen);
  b.norm_gain = reg.add(prefix + "norm.gain", Tensor::full({channels}, 1.0), frozen);
  b.norm_bias = reg.add(prefix + "norm.bias", Tensor::zeros({channels}), frozen);
  b.mix_weight = reg.add(prefix + "mix.weight", randn({channels, channels}, rng, 1.0 / std::sqrt(double(channels))),
                         frozen);
  b.mix_bias = reg.add(prefix + "mix.bias", Tensor::zeros({channels}), frozen);
  return b;
}

Tensor CenterBlock::forward(const Tensor& fmap) const {
  if (fmap.rank() != 4) throw ShapeError("center_block_forward: expected NCHW, got " + shape_str(fmap.shape()));
  auto part = partition(static_cast<int>(fmap.dim(2)), static_cast<int>(fmap.dim(3)), config.region_size);
  return center_block_forward(fmap, part, *this);
}

Tensor center_block_forward(const Tensor& fmap, const RegionPartition& part, const CenterBlock& block) {
  if (fmap.rank() != 4) throw ShapeError("center_block_forward: expected NCHW, got " + shape_str(fmap.shape()));
  const std::size_t N = fmap.dim(0), C = fmap.dim(1), H = fmap.dim(2), W = fmap.dim(3);
  if (part.grid_h != static_cast<int>(H) || part.grid_w != static_cast<int>(W)) {
    throw ShapeError("center_block_forward: partition grid " + std::to_string(part.grid_h) + "x" +
                     std::to_string(part.grid_w) + " does not match feature map " + shape_str(fmap.shape()));
  }
  if (C != block.ssm.channels()) {
    throw ShapeError("center_block_forward: block width " + std::to_string(block.ssm.channels()) +
                     " does not match feature map " + shape_str(fmap.shape()));
  }
  // path_sets[j] holds the j-th path of every region of every batch element.
  std::vector<std::vector<std::vector<std::size_t>>> path_sets;
  for (const auto& region : part.regions) {
    auto paths = consumed_paths(region, block.config);
    if (path_sets.empty()) path_sets.resize(paths.size());
    for (std::size_t j = 0; j < paths.size(); ++j) {
      for (std::size_t n = 0; n < N; ++n) {
        std::vector<std::size_t> rows;
        rows.reserve(paths[j].order.size());
        for (auto p : paths[j].order) {
          rows.push_back((n * H + static_cast<std::size_t>(p.row)) * W + static_cast<std::size_t>(p.col));
        }
        path_sets[j].push_back(std::move(rows));
      }
    }
  }
  Tensor tokens = nn::to_tokens(fmap);
  Tensor scanned;
  for (const auto& set : path_sets) {
    Tensor y = ssm_scan_paths(tokens, set, block.ssm, block.config.ssm);
    scanned = scanned.defined() ? ops::add(scanned, y) : y;
  }
  if (path_sets.size() > 1) scanned = ops::scale(scanned, 1.0 / static_cast<double>(path_sets.size()));
  Tensor normed = nn::affine(ops::layer_norm(scanned), block.norm_gain, block.norm_bias);
  Tensor mixed = nn::linear(normed, block.mix_weight, block.mix_bias);
  return nn::from_tokens(ops::add(tokens, mixed), N, H, W);
}

}  // namespace centerscan

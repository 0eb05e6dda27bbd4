// SPDX-License-Identifier: Apache-2.0
// Acceptance runner: one PASS/FAIL line per primary criterion.
//
//   acceptance [--quick] [--strict] [--out DIR]
//
// Exit status is nonzero when a deterministic criterion fails. The empirical
// criteria (trained-kernel dominance, ablation trend) report PASS/FAIL but only
// affect the exit status under --strict.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <string>
#include <vector>

#include "centerscan/experiment.hpp"
#include "centerscan/gradcheck.hpp"
#include "centerscan/ops.hpp"
#include "centerscan/scan_geometry.hpp"
#include "centerscan/ssm_scan.hpp"

#ifndef CENTERSCAN_CLI
#define CENTERSCAN_CLI "centerscan"
#endif

namespace fs = std::filesystem;
using namespace centerscan;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradTol = 1e-4;
constexpr double kGradBudgetSeconds = 60.0;
constexpr double kClosedFormTol = 1e-9;
constexpr double kCeTol = 1e-9;
constexpr double kLinearityTol = 1e-12;
constexpr double kDiceIouTol = 1e-12;
constexpr std::size_t kRandomGrids = 200;
constexpr std::size_t kKernelSeeds = 5;
constexpr std::size_t kKernelSeedsRequired = 4;
constexpr double kAblationBudgetSeconds = 30.0 * 60.0;

struct Criterion {
  std::string name;
  bool passed = false;
  bool empirical = false;
  std::string detail;
};

std::vector<Criterion> g_results;
std::string g_report;

void report(const std::string& name, bool passed, const std::string& detail, bool empirical = false) {
  g_results.push_back({name, passed, empirical, detail});
  char line[64];
  std::snprintf(line, sizeof line, "%s %-22s ", passed ? "PASS" : "FAIL", name.c_str());
  g_report += line + detail + "\n";
  std::printf("%s%s\n", line, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<std::pair<std::string, Tensor>> with_params(std::vector<std::pair<std::string, Tensor>> leaves,
                                                         const ParameterSet& reg) {
  for (const auto& e : reg.entries())
    if (!e.frozen) leaves.emplace_back(e.name, e.value);
  return leaves;
}

LabelMap random_labels(std::size_t h, std::size_t w, std::uint64_t seed, double fg = 0.3) {
  Rng rng(seed);
  LabelMap m{h, w, std::vector<std::uint8_t>(h * w)};
  for (auto& l : m.labels) l = rng.uniform() < fg ? 1 : 0;
  return m;
}

// ------------------------------------------------------------ gradient suite

void gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name = "-";
  auto take = [&](const std::string& block, const GradCheckReport& r) {
    for (const auto& e : r.entries) {
      if (e.rel_error < worst) continue;
      worst = e.rel_error;
      worst_name = block + ":" + e.name;
    }
  };

  // Center block under every scan strategy.
  for (ScanStrategy s : {ScanStrategy::CenterPriority, ScanStrategy::Raster, ScanStrategy::Snake,
                         ScanStrategy::Bidirectional, ScanStrategy::CrossScan}) {
    ParameterSet reg;
    Rng rng(11);
    CenterBlockConfig cfg;
    cfg.strategy = s;
    CenterBlock b = CenterBlock::create(reg, "block.", 3, cfg, rng);
    Tensor x = randn({1, 3, 4, 5}, rng, 1.0, true);
    Tensor w = randn({1, 3, 4, 5}, rng, 1.0);
    take("center_block/" + std::string(to_string(s)),
         check_gradients([&] { return ops::sum(ops::mul(b.forward(x), w)); }, with_params({{"x", x}}, reg)));
  }

  // Single-channel block on a 6 x 6 map, two full regions across.
  {
    ParameterSet reg;
    Rng rng(10);
    CenterBlock b = CenterBlock::create(reg, "block.", 1, CenterBlockConfig{}, rng);
    Tensor x = randn({1, 1, 6, 6}, rng, 1.0, true);
    Tensor w = randn({1, 1, 6, 6}, rng, 1.0);
    take("center_block/1x1x6x6",
         check_gradients([&] { return ops::sum(ops::mul(b.forward(x), w)); }, with_params({{"x", x}}, reg)));
  }

  // Encoder with adapters switched on and nonzero up-projections.
  {
    ParameterSet reg;
    Rng rng(12);
    EncoderConfig ec;
    ec.embed_dim = 3;
    ec.num_stages = 2;
    ec.adapter_dim = 2;
    Encoder enc(ec, reg, rng);
    for (const auto& e : reg.entries())
      if (!e.frozen && e.name.find("up_w") != std::string::npos) {
        Tensor t = e.value;
        Rng r2(13);
        for (double& v : t.mutable_data()) v = r2.normal() * 0.3;
      }
    Tensor x = randn({1, 1, 4, 4}, rng, 1.0);
    Tensor w = randn({1, 3, 1, 1}, rng, 1.0);
    take("encoder_adapters", check_gradients(
                                 [&] {
                                   auto out = enc.encode(x, {});
                                   return ops::sum(ops::mul(out.stages.back(), w));
                                 },
                                 with_params({}, reg), 1e-6, 16));
  }

  // Prior synthesis: anchors -> alignment -> memory read -> reweight.
  {
    ParameterSet reg;
    Rng rng(14);
    SpsConfig cfg;
    cfg.num_anchors = 2;
    cfg.width = 4;
    cfg.memory_capacity = 8;
    SpsParams p = SpsParams::create(reg, "sps.", cfg, rng);
    Tensor E = randn({1, 4, 3, 3}, rng, 1.0, true);
    Tensor ctx = randn({4, 4}, rng, 1.0, true);
    Tensor w = randn({1, 4, 3, 3}, rng, 1.0);
    PrototypeMemory seeded(8, 4);
    seeded.write(randn({3, 4}, rng, 1.0), 0);
    take("sps", check_gradients(
                    [&] {
                      PrototypeMemory m = seeded;
                      return ops::sum(ops::mul(sps_forward(E, ctx, p, cfg, m, 1).P_out, w));
                    },
                    with_params({{"E_in", E}, {"context", ctx}}, reg)));
  }

  // Memory decoder with the hierarchical loss.
  {
    ParameterSet reg;
    Rng rng(15);
    DecoderConfig cfg{4, 2, 2, 6, 0.0};
    MemoryDecoder dec(cfg, reg, rng);
    Tensor bottom = randn({1, 4, 3, 2}, rng, 1.0, true);
    std::vector<Tensor> skips{randn({1, 4, 9, 7}, rng, 1.0, true), randn({1, 4, 5, 4}, rng, 1.0)};
    LabelMap gt = random_labels(9, 7, 16);
    ContextMemoryBank seeded(2, 6, 4);
    {
      NoGradGuard ng;
      dec.decode(bottom, skips, {}, &seeded, 0);
    }
    LossConfig lc;
    lc.level_weights = {1.0, 0.5};
    take("decoder+loss", check_gradients(
                             [&] {
                               ContextMemoryBank bank = seeded;
                               return hierarchical_loss(dec.decode(bottom, skips, {}, &bank, 1), gt, lc).total;
                             },
                             with_params({{"bottom", bottom}, {"skip0", skips[0]}}, reg), 1e-6, 24));
  }

  // Hierarchical loss alone: bilinear resize of a coarse level plus both terms.
  {
    Rng rng(17);
    Tensor fine = randn({1, 2, 8, 8}, rng, 1.5, true), coarse = randn({1, 2, 4, 4}, rng, 1.5, true);
    LabelMap gt = random_labels(8, 8, 18);
    take("hierarchical_loss", check_gradients([&] { return hierarchical_loss({fine, coarse}, gt, LossConfig{{1.0, 0.7}}).total; },
                                              {{"P1", fine}, {"P2", coarse}}));
  }

  const double secs = seconds_since(t0);
  report("gradient_suite", worst <= kGradTol && secs < kGradBudgetSeconds,
         "max rel err " + fmt("%.2e", worst) + " (" + worst_name + ") tol " + fmt("%.0e", kGradTol) + ", " +
             fmt("%.1f", secs) + " s of " + fmt("%.0f", kGradBudgetSeconds));
}

// ---------------------------------------------------------- scan-order suite

void scan_order_suite() {
  const Region r{0, 0, 3, 3};
  const PriorityParams def;
  const Coord c = center_cell(r);
  double min_axis = 1e300, max_axis = -1e300, max_corner = -1e300;
  for (const Coord p : r.cells()) {
    if (p == c) continue;
    const double v = priority(p, r, def);
    if (p.row == c.row || p.col == c.col) {
      min_axis = std::min(min_axis, v);
      max_axis = std::max(max_axis, v);
    } else {
      max_corner = std::max(max_corner, v);
    }
  }
  bool hierarchy = priority(c, r, def) > max_axis && min_axis > max_corner;
  const auto order = scan_order(r, ScanStrategy::CenterPriority, def)[0].order;
  hierarchy = hierarchy && order[0] == c;
  for (std::size_t i = 1; i < order.size(); ++i) {
    const bool axis = order[i].row == c.row || order[i].col == c.col;
    hierarchy = hierarchy && (i <= 4) == axis;
  }

  Rng rng(2024);
  std::size_t paths = 0, bad = 0;
  for (std::size_t g = 0; g < kRandomGrids; ++g) {
    const int h = 1 + static_cast<int>(rng.uniform() * 24), w = 1 + static_cast<int>(rng.uniform() * 24);
    const int rs = 1 + static_cast<int>(rng.uniform() * 3);
    PriorityParams p;
    p.alpha = 0.1 + 3.0 * rng.uniform();
    p.beta = 0.1 + 3.0 * rng.uniform();
    p.gamma = 3.0 * rng.uniform();
    p.epsilon = 0.05 + rng.uniform();
    const auto part = partition(h, w, rs);
    std::vector<int> seen(static_cast<std::size_t>(h * w), 0);
    for (const auto& region : part.regions)
      for (ScanStrategy s : {ScanStrategy::CenterPriority, ScanStrategy::Raster, ScanStrategy::Snake,
                             ScanStrategy::Bidirectional, ScanStrategy::CrossScan})
        for (const auto& path : scan_order(region, s, p)) {
          ++paths;
          if (!is_permutation_of(path, region)) ++bad;
          if (s == ScanStrategy::CenterPriority)
            for (const Coord q : path.order) ++seen[static_cast<std::size_t>(q.row * w + q.col)];
        }
    for (int v : seen) bad += v != 1;
  }
  report("scan_order", hierarchy && bad == 0,
         std::string("3x3 center>axis>corner ") + (hierarchy ? "ok" : "violated") + ", " + std::to_string(paths) +
             " paths over " + std::to_string(kRandomGrids) + " random grids, " + std::to_string(bad) +
             " non-permutations");
}

// ---------------------------------------------------- effective kernel (a)

void kernel_closed_form() {
  double worst = 0.0;
  for (double a : {0.2, 0.5, 0.9}) {
    ParameterSet reg;
    Rng rng(3);
    SsmParams p = SsmParams::create(reg, "probe.", 1, 1, rng, true);
    p.decay_logits.mutable_data()[0] = std::log(a / (1.0 - a));
    p.input_proj.mutable_data()[0] = 1.0;
    p.output_proj.mutable_data()[0] = 1.0;
    p.skip_scale.mutable_data()[0] = 0.0;
    for (const Region r : {Region{0, 0, 1, 3}, Region{0, 0, 3, 1}}) {
      const ScanPath path = scan_order(r, ScanStrategy::Raster)[0];
      const EffectiveKernel k = measure_effective_kernel(p, r, path, SsmOptions{true});
      const double z = a * a + a + 1.0;
      for (std::size_t t = 0; t < 3; ++t) {
        const double expect = std::pow(a, 2.0 - static_cast<double>(t)) / z;
        worst = std::max(worst, std::abs(k.weight_at(path.order[t]) - expect));
      }
    }
  }
  report("kernel_closed_form", worst <= kClosedFormTol,
         "max |w - a^(n-t)/Z| " + fmt("%.2e", worst) + " tol " + fmt("%.0e", kClosedFormTol));
}

// ------------------------------------------------------- memory causality

bool bitwise_equal(const std::vector<LabelMap>& a, const std::vector<LabelMap>& b, std::size_t upto) {
  for (std::size_t s = 0; s <= upto; ++s)
    if (a[s].labels != b[s].labels) return false;
  return true;
}

bool logits_equal(const SegmentationModel& m, const SyntheticVolume& a, const SyntheticVolume& b, std::size_t upto) {
  NoGradGuard ng;
  VolumeState sa = m.new_volume_state(), sb = m.new_volume_state();
  for (std::size_t s = 0; s <= upto; ++s) {
    const auto pa = m.forward_slice(a.slice_tensor(s), sa, static_cast<int>(s));
    const auto pb = m.forward_slice(b.slice_tensor(s), sb, static_cast<int>(s));
    for (std::size_t j = 0; j < pa.size(); ++j)
      if (!std::equal(pa[j].data().begin(), pa[j].data().end(), pb[j].data().begin())) return false;
  }
  return true;
}

void memory_causality(const SegmentationModel& trained, const ExperimentConfig& cfg) {
  const SyntheticVolume vol = generate_volume(cfg.dataset, 777);
  bool causal = true;
  const auto base = trained.predict_volume(vol);
  for (std::size_t s = 0; s + 1 < vol.slices(); ++s) {
    SyntheticVolume edited = vol;
    Rng rng(900 + s);
    for (std::size_t t = s + 1; t < vol.slices(); ++t)
      for (double& x : edited.images[t]) x = rng.uniform();
    causal = causal && bitwise_equal(base, trained.predict_volume(edited), s) && logits_equal(trained, vol, edited, s);
  }

  ExperimentConfig small = cfg;
  small.model.sps.memory_capacity = 5;
  small.model.decoder.memory_capacity = 3;
  small.finalize();
  SegmentationModel m(small.model, 5);
  VolumeState st = m.new_volume_state();
  bool bounded = true;
  {
    NoGradGuard ng;
    for (std::size_t s = 0; s < vol.slices(); ++s) {
      m.forward_slice(vol.slice_tensor(s), st, static_cast<int>(s));
      bounded = bounded && st.sps.size() <= st.sps.capacity() && !st.sps.empty();
      for (std::size_t j = 0; j < st.decoder.size(); ++j)
        bounded = bounded && st.decoder.level(j).size() <= st.decoder.level(j).capacity();
    }
  }
  st.reset();
  bool reset = st.sps.empty();
  for (std::size_t j = 0; j < st.decoder.size(); ++j) reset = reset && st.decoder.level(j).empty();
  // A reset state replays a volume exactly like a brand-new one.
  {
    NoGradGuard ng;
    VolumeState fresh = m.new_volume_state();
    for (std::size_t s = 0; s < vol.slices(); ++s) {
      const auto a = m.forward_slice(vol.slice_tensor(s), st, static_cast<int>(s)).front();
      const auto b = m.forward_slice(vol.slice_tensor(s), fresh, static_cast<int>(s)).front();
      reset = reset && std::equal(a.data().begin(), a.data().end(), b.data().begin());
    }
  }

  report("memory_causality", causal && bounded && reset,
         std::string("future-slice edits ") + (causal ? "leave past bitwise equal" : "leak into the past") +
             ", capacity " + (bounded ? "respected" : "exceeded") + ", reset " + (reset ? "ok" : "broken"));
}

// ------------------------------------------------------------------ freezing

void freezing(const SegmentationModel& trained, const ExperimentConfig& cfg, std::uint64_t seed) {
  // Backbone gradients after one backward pass through the full model.
  SegmentationModel m(cfg.model, SeedStreams::from(seed).model);
  const SyntheticVolume vol = generate_volume(cfg.dataset, 31);
  for (const auto& e : m.parameters().entries()) {
    Tensor t = e.value;
    if (!e.frozen && e.name.find("up_w") != std::string::npos) {
      Rng r(7);
      for (double& v : t.mutable_data()) v = 0.1 * r.normal();
    }
  }
  VolumeState st = m.new_volume_state();
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t s = 0; s < 3; ++s)
    total = ops::add(total, m.slice_loss(m.forward_slice(vol.slice_tensor(s), st, static_cast<int>(s)), vol.masks[s]).total);
  m.parameters().zero_grad();
  backward(total);
  std::size_t nonzero = 0, trainable_with_grad = 0;
  for (const auto& e : m.parameters().entries()) {
    bool any = false;
    for (double g : e.value.grad()) any = any || g != 0.0;
    if (e.frozen) nonzero += any;
    else trainable_with_grad += any;
  }

  // Frozen values survive a full training run bitwise.
  SegmentationModel fresh(cfg.model, SeedStreams::from(seed).model);
  bool unchanged = true;
  for (const auto& e : fresh.parameters().entries()) {
    if (!e.frozen) continue;
    const NamedParameter* t = trained.parameters().find(e.name);
    unchanged = unchanged && t && std::equal(e.value.data().begin(), e.value.data().end(), t->value.data().begin());
  }

  // Zero-initialized adapters leave the encoder identical to the bare backbone.
  bool base_equiv = true;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    SegmentationModel z(cfg.model, s);
    AblationConfig on{true, false, false}, off{false, false, false};
    for (std::size_t i = 0; i < 2; ++i) {
      NoGradGuard ng;
      const auto a = z.encoder().encode(vol.slice_tensor(i), on);
      const auto b = z.encoder().encode(vol.slice_tensor(i), off);
      for (std::size_t k = 0; k < a.stages.size(); ++k)
        base_equiv = base_equiv && std::equal(a.stages[k].data().begin(), a.stages[k].data().end(),
                                              b.stages[k].data().begin());
    }
  }
  const double ratio = m.encoder().census().ratio();
  report("freezing", nonzero == 0 && trainable_with_grad > 0 && unchanged && base_equiv && ratio < 0.25,
         std::to_string(nonzero) + " frozen tensors with gradient, frozen values " +
             (unchanged ? "unchanged" : "changed") + " after training, zero-init " +
             (base_equiv ? "== Base" : "!= Base") + ", adapter/backbone ratio " + fmt("%.4f", ratio) + " < 0.25");
}

// ---------------------------------------------------------------------- loss

double reference_ce(const Tensor& x, const LabelMap& gt) {
  const std::size_t K = x.dim(1), HW = gt.height * gt.width;
  double loss = 0.0;
  for (std::size_t i = 0; i < HW; ++i) {
    double mx = -1e300;
    for (std::size_t c = 0; c < K; ++c) mx = std::max(mx, x.data()[c * HW + i]);
    double z = 0.0;
    for (std::size_t c = 0; c < K; ++c) z += std::exp(x.data()[c * HW + i] - mx);
    loss -= x.data()[gt.labels[i] * HW + i] - mx - std::log(z);
  }
  return loss / static_cast<double>(HW);
}

void loss_suite(const std::vector<MetricReport>& run_reports) {
  double lin = 0.0;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    Rng rng(s);
    const LabelMap gt = random_labels(16, 16, s + 100);
    std::vector<Tensor> preds{randn({1, 2, 16, 16}, rng, 1.5), randn({1, 2, 8, 8}, rng, 1.5),
                              randn({1, 2, 4, 4}, rng, 1.5)};
    LossConfig a, b, mix;
    a.level_weights = {rng.uniform(), rng.uniform(), rng.uniform()};
    b.level_weights = {rng.uniform(), rng.uniform(), rng.uniform()};
    const double ca = 2.0 * rng.uniform(), cb = 2.0 * rng.uniform();
    mix.level_weights.clear();
    for (std::size_t j = 0; j < 3; ++j) mix.level_weights.push_back(ca * a.level_weights[j] + cb * b.level_weights[j]);
    const double lhs = hierarchical_loss(preds, gt, mix).total.item();
    const double rhs = ca * hierarchical_loss(preds, gt, a).total.item() + cb * hierarchical_loss(preds, gt, b).total.item();
    lin = std::max(lin, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
  }

  double ce = 0.0;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    Rng rng(s + 50);
    const std::size_t K = 2 + s % 2;
    Tensor x = randn({1, K, 7, 9}, rng, 2.0);
    LabelMap gt = random_labels(7, 9, s + 60);
    if (K == 3)
      for (std::size_t i = 0; i < gt.labels.size(); i += 3) gt.labels[i] = 2;
    LossConfig cfg;
    cfg.focal_gamma = 0.0;
    cfg.class_balance = 0.0;
    ce = std::max(ce, std::abs(focal_mod(x, gt, cfg).item() - reference_ce(x, gt)));
  }

  std::size_t checked = 0, identity_bad = 0;
  auto check = [&](const MetricReport& r) {
    ++checked;
    if (!r.dice_iou_identity(kDiceIouTol) || !r.in_unit_range()) ++identity_bad;
  };
  for (const auto& r : run_reports) check(r);
  Rng rng(99);
  for (std::size_t i = 0; i < 1000; ++i) {
    ConfusionCounts c;
    c.tp = static_cast<std::uint64_t>(rng.uniform() * 50) * (i % 7 != 0);
    c.fp = static_cast<std::uint64_t>(rng.uniform() * 50) * (i % 5 != 0);
    c.fn = static_cast<std::uint64_t>(rng.uniform() * 50) * (i % 3 != 0);
    c.tn = static_cast<std::uint64_t>(rng.uniform() * 5000);
    check(MetricReport::from_counts(c));
  }
  report("loss_suite", lin <= kLinearityTol && ce <= kCeTol && identity_bad == 0,
         "level-weight linearity " + fmt("%.1e", lin) + ", focal(gamma=0) vs CE " + fmt("%.1e", ce) + ", dice/iou identity " +
             std::to_string(checked - identity_bad) + "/" + std::to_string(checked) + " reports");
}

// -------------------------------------------- ablation + trained kernel (b)

struct KernelVerdict {
  bool dominant = true;
  std::string groups;
};

KernelVerdict trained_kernel(const SegmentationModel& m) {
  KernelVerdict v;
  const auto& block_cfg = m.config().encoder.block;
  const Region region{0, 0, block_cfg.region_size, block_cfg.region_size};
  for (const CenterBlock* b : m.encoder().adapter_blocks()) {
    for (const auto& path : consumed_paths(region, b->config)) {
      const KernelGroups g = group_kernel(measure_effective_kernel(b->ssm, region, path, b->config.ssm), region);
      v.dominant = v.dominant && g.center > g.axis_mean && g.axis_mean > g.corner_mean;
      v.groups += " " + fmt("%.3f", g.center) + "/" + fmt("%.3f", g.axis_mean) + "/" + fmt("%.3f", g.corner_mean);
    }
  }
  return v;
}

void ablation_and_kernel(const ExperimentConfig& cfg, std::vector<MetricReport>& reports,
                         std::vector<SegmentationModel>& full_models, const fs::path& out) {
  const auto t0 = Clock::now();
  std::vector<std::uint64_t> kernel_seeds;
  std::vector<KernelVerdict> verdicts;
  const AblationConfig full{true, true, true};
  const AblationTable t = run_ablation(cfg, AblationConfig::progressive(), cfg.ablation_seeds, cfg.jobs,
                                       [&](const RunResult& r, const SegmentationModel& m) {
                                         std::printf("  run %-7s seed %llu dice %.4f (%.1f s)\n",
                                                     r.config.name().c_str(),
                                                     static_cast<unsigned long long>(r.seed), r.eval.aggregate.dice,
                                                     r.seconds);
                                         std::fflush(stdout);
                                         if (r.config == full) {
                                           full_models.push_back(m);
                                           kernel_seeds.push_back(r.seed);
                                           verdicts.push_back(trained_kernel(m));
                                         }
                                       });
  const double grid_seconds = seconds_since(t0);
  for (const auto& r : t.runs) {
    reports.push_back(r.eval.aggregate);
    for (const auto& v : r.eval.per_volume) reports.push_back(v);
  }

  std::ofstream(out / "ablation.csv") << ablation_csv(t);
  std::ofstream(out / "ablation_runs.csv") << runs_csv(t);

  // Extra seeds for the kernel criterion, outside the timed grid.
  for (std::uint64_t s = 1; kernel_seeds.size() < kKernelSeeds; ++s) {
    SegmentationModel m(cfg.model, 0);
    const RunResult r = run_single(cfg, full, 100 + s, &m);
    std::printf("  run %-7s seed %llu dice %.4f (%.1f s, kernel only)\n", r.config.name().c_str(),
                static_cast<unsigned long long>(r.seed), r.eval.aggregate.dice, r.seconds);
    std::fflush(stdout);
    kernel_seeds.push_back(r.seed);
    verdicts.push_back(trained_kernel(m));
  }
  std::size_t dominant = 0;
  std::string per_seed;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    dominant += verdicts[i].dominant;
    per_seed += " s" + std::to_string(kernel_seeds[i]) + (verdicts[i].dominant ? "+" : "-");
  }
  report("kernel_trained", dominant >= kKernelSeedsRequired,
         std::to_string(dominant) + "/" + std::to_string(verdicts.size()) +
             " seeds center>axis>corner on every adapter block (need " + std::to_string(kKernelSeedsRequired) + ");" +
             per_seed,
         true);

  const TrendCheck trend = check_trend(t.summary);
  std::string means;
  for (const auto& s : t.summary) means += " " + s.config.name() + "=" + fmt("%.4f", s.dice.mean) + "+-" + fmt("%.4f", s.dice.sd);
  std::ofstream tr(out / "trend.txt");
  tr << "dice" << means << "\n";
  for (const auto& n : trend.notes) tr << n << "\n";
  report("ablation_trend", trend.passed && grid_seconds <= kAblationBudgetSeconds,
         std::to_string(t.summary.front().runs) + "-seed dice" + means + ", " + std::to_string(trend.inversions) +
             " inversions, grid " + fmt("%.0f", grid_seconds) + " s of " + fmt("%.0f", kAblationBudgetSeconds),
         true);
  for (const auto& n : trend.notes) std::printf("  %s\n", n.c_str());
}

// ----------------------------------------------------------- reproducibility

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void reproducibility(const fs::path& out) {
  const fs::path root = out / "repro";
  fs::remove_all(root);
  const fs::path cfg_path = root / "config.json";
  fs::create_directories(root);
  std::ofstream(cfg_path) << R"({"dataset": {"train_volumes": 4, "test_volumes": 2, "slices": 4},
 "train": {"steps": 4}, "folds": 2, "ablation_seeds": [1, 2]})";

  struct Cmd {
    std::string name, args;
    std::vector<std::string> csvs;
  };
  const std::vector<Cmd> cmds{
      {"scan-dump", "scan-dump --grid 7x5 --strategy center_priority", {"paths.txt"}},
      {"kernel-analyze", "kernel-analyze --decay 0.7", {"kernel.csv"}},
      {"train", "train --seed 9", {"loss.csv", "metrics.csv"}},
      {"ablate", "ablate --seed 9 --jobs 2", {"ablation.csv", "ablation_runs.csv"}},
      {"xval", "xval --seed 9", {"xval.csv"}},
  };
  std::size_t compared = 0, differing = 0, failed = 0;
  for (const auto& c : cmds) {
    std::vector<fs::path> dirs;
    for (const char* tag : {"a", "b"}) {
      const fs::path d = root / (c.name + "_" + tag);
      const std::string line = std::string("\"") + CENTERSCAN_CLI + "\" " + c.args + " --config \"" +
                               cfg_path.string() + "\" --out \"" + d.string() + "\" > \"" + (root / (c.name + "_" + tag + ".log")).string() +
                               "\" 2>&1";
      if (std::system(line.c_str()) != 0) ++failed;
      dirs.push_back(d);
    }
    for (const auto& f : c.csvs) {
      ++compared;
      const std::string a = slurp(dirs[0] / f), b = slurp(dirs[1] / f);
      if (a.empty() || a != b) ++differing;
    }
  }
  // eval reruns against one checkpoint.
  for (const char* tag : {"a", "b"}) {
    const std::string line = std::string("\"") + CENTERSCAN_CLI + "\" eval --checkpoint \"" +
                             (root / "train_a" / "model.ckpt").string() + "\" --out \"" +
                             (root / (std::string("eval_") + tag)).string() + "\" > /dev/null 2>&1";
    if (std::system(line.c_str()) != 0) ++failed;
  }
  ++compared;
  {
    const std::string a = slurp(root / "eval_a" / "metrics.csv"), b = slurp(root / "eval_b" / "metrics.csv");
    if (a.empty() || a != b || a != slurp(root / "train_a" / "metrics.csv")) ++differing;
  }
  report("reproducibility", failed == 0 && differing == 0,
         std::to_string(compared - differing) + "/" + std::to_string(compared) +
             " CSV outputs bitwise identical across reruns of every subcommand, " + std::to_string(failed) +
             " command failures");
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = false, strict = false;
  fs::path out = fs::temp_directory_path() / "centerscan_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--quick") quick = true;
    else if (a == "--strict") strict = true;
    else if (a == "--out" && i + 1 < argc) out = argv[++i];
    else {
      std::fprintf(stderr, "usage: acceptance [--quick] [--strict] [--out DIR]\n");
      return 64;
    }
  }
  fs::create_directories(out);

  ExperimentConfig cfg;
  if (quick) {
    cfg.train.steps = 20;
    cfg.dataset.train_volumes = 6;
    cfg.dataset.test_volumes = 2;
  }
  cfg.finalize();

  gradient_suite();
  scan_order_suite();
  kernel_closed_form();

  std::vector<MetricReport> reports;
  std::vector<SegmentationModel> full_models;
  ablation_and_kernel(cfg, reports, full_models, out);
  memory_causality(full_models.front(), cfg);
  freezing(full_models.front(), cfg, cfg.ablation_seeds.front());
  loss_suite(reports);
  reproducibility(out);

  std::size_t hard_fail = 0, soft_fail = 0;
  for (const auto& r : g_results) {
    if (r.passed) continue;
    ++(r.empirical ? soft_fail : hard_fail);
  }
  char summary[128];
  std::snprintf(summary, sizeof summary, "acceptance: %zu/%zu criteria passed%s\n", g_results.size() - hard_fail - soft_fail,
                g_results.size(), quick ? " (quick mode: reduced training)" : "");
  std::fputs(summary, stdout);
  std::ofstream(out / "acceptance_report.txt") << g_report << summary;
  return hard_fail > 0 || (strict && soft_fail > 0) ? 1 : 0;
}

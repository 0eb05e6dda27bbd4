// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "centerscan/config.hpp"
#include "centerscan/container.hpp"
#include "centerscan/experiment.hpp"
#include "centerscan/metrics.hpp"
#include "centerscan/model.hpp"
#include "centerscan/synthetic.hpp"

using namespace centerscan;

namespace {

LabelMap mask(std::size_t h, std::size_t w, std::vector<std::size_t> on) {
  LabelMap m{h, w, std::vector<std::uint8_t>(h * w, 0)};
  for (auto i : on) m.labels[i] = 1;
  return m;
}

DatasetSpec tiny_dataset() {
  DatasetSpec d;
  d.height = d.width = 16;
  d.slices = 5;
  d.train_volumes = 4;
  d.test_volumes = 2;
  return d;
}

ExperimentConfig tiny_experiment() {
  ExperimentConfig c;
  c.dataset = tiny_dataset();
  c.model.encoder.embed_dim = 6;
  c.model.encoder.num_stages = 2;
  c.model.encoder.adapter_dim = 2;
  c.model.sps.num_anchors = 2;
  c.train.steps = 4;
  c.train.slices_per_step = 2;
  c.train.base_lr = 1e-2;
  c.finalize();
  return c;
}

bool same_maps(const std::vector<LabelMap>& a, const std::vector<LabelMap>& b, std::size_t upto) {
  for (std::size_t s = 0; s <= upto; ++s) {
    if (!(a[s] == b[s])) return false;
  }
  return true;
}

}  // namespace

TEST(Metrics, PerfectPrediction) {
  auto gt = mask(3, 3, {1, 4, 5});
  auto r = compute_metrics({gt}, {gt});
  EXPECT_DOUBLE_EQ(r.dice, 1.0);
  EXPECT_DOUBLE_EQ(r.iou, 1.0);
  EXPECT_DOUBLE_EQ(r.precision, 1.0);
  EXPECT_DOUBLE_EQ(r.sensitivity, 1.0);
}

TEST(Metrics, EmptyPredictionOnLesion) {
  auto r = compute_metrics({mask(3, 3, {})}, {mask(3, 3, {2, 3})});
  EXPECT_DOUBLE_EQ(r.dice, 0.0);
  EXPECT_DOUBLE_EQ(r.sensitivity, 0.0);
  EXPECT_DOUBLE_EQ(r.precision, 0.0);
}

TEST(Metrics, EmptyVersusEmptyIsOne) {
  auto r = compute_metrics({mask(2, 2, {})}, {mask(2, 2, {})});
  EXPECT_DOUBLE_EQ(r.dice, 1.0);
  EXPECT_DOUBLE_EQ(r.iou, 1.0);
  EXPECT_DOUBLE_EQ(r.precision, 1.0);
  EXPECT_DOUBLE_EQ(r.sensitivity, 1.0);
}

TEST(Metrics, CoverPlusEqualExtraRegion) {
  // TP = FP = |gt|, FN = 0.
  auto r = compute_metrics({mask(4, 4, {0, 1, 2, 3, 4, 5})}, {mask(4, 4, {0, 1, 2})});
  EXPECT_DOUBLE_EQ(r.sensitivity, 1.0);
  EXPECT_DOUBLE_EQ(r.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.dice, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.iou, 0.5);
}

TEST(Metrics, ShapeMismatchThrows) {
  EXPECT_THROW(compute_metrics({mask(2, 2, {})}, {mask(2, 3, {})}), std::invalid_argument);
  EXPECT_THROW(compute_metrics({mask(2, 2, {})}, {}), std::invalid_argument);
}

TEST(Metrics, IdentityAndRangeOnRandomMasks) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    std::size_t n = 1 + rng.index(30);
    LabelMap p{1, n, std::vector<std::uint8_t>(n)}, g = p;
    const double fp = rng.uniform(), fg = rng.uniform();
    for (std::size_t i = 0; i < n; ++i) {
      p.labels[i] = rng.uniform() < fp;
      g.labels[i] = rng.uniform() < fg;
    }
    auto r = compute_metrics({p}, {g});
    EXPECT_TRUE(r.in_unit_range());
    EXPECT_TRUE(r.dice_iou_identity());
    EXPECT_LE(r.iou, r.dice);
  }
}

TEST(Metrics, PoolsCounts) {
  auto a = mask(2, 2, {0}), b = mask(2, 2, {0, 1});
  auto r = compute_metrics({a, b}, {b, b});
  EXPECT_EQ(r.counts.tp, 3u);
  EXPECT_EQ(r.counts.fn, 1u);
  EXPECT_EQ(r.counts.fp, 0u);
  EXPECT_EQ(r.counts.tn, 4u);
}

TEST(Synthetic, DeterministicFromSeed) {
  auto a = generate_volume(tiny_dataset(), 42), b = generate_volume(tiny_dataset(), 42);
  EXPECT_EQ(a.images, b.images);
  EXPECT_EQ(a.masks, b.masks);
  auto c = generate_volume(tiny_dataset(), 43);
  EXPECT_NE(a.images, c.images);
}

TEST(Synthetic, ZeroLesionsGiveEmptyMasks) {
  DatasetSpec d = tiny_dataset();
  d.lesions_min = d.lesions_max = 0;
  auto v = generate_volume(d, 3);
  for (const auto& m : v.masks)
    for (auto l : m.labels) EXPECT_EQ(l, 0);
}

TEST(Synthetic, NoiselessLesionsSitExactlyContrastAboveBackground) {
  DatasetSpec d = tiny_dataset();
  d.noise_sigma = 0.0;
  d.contrast_min = d.contrast_max = 0.2;
  DatasetSpec bare = d;
  bare.lesions_min = bare.lesions_max = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto v = generate_volume(d, seed), bg = generate_volume(bare, seed);
    std::size_t lesion_pixels = 0;
    for (std::size_t s = 0; s < v.slices(); ++s) {
      for (std::size_t i = 0; i < v.images[s].size(); ++i) {
        const double delta = v.images[s][i] - bg.images[s][i];
        if (v.masks[s].labels[i]) {
          ++lesion_pixels;
          EXPECT_NEAR(delta, 0.2, 1e-12);
        } else {
          EXPECT_EQ(delta, 0.0);
        }
      }
    }
    EXPECT_GT(lesion_pixels, 0u);
  }
}

TEST(Synthetic, LesionsPersistAndDriftSlowly) {
  DatasetSpec d;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto v = generate_volume(d, seed);
    EXPECT_GE(v.lesions.size(), d.lesions_min);
    EXPECT_LE(v.lesions.size(), d.lesions_max);
    for (const auto& l : v.lesions) {
      EXPECT_GE(l.last_slice - l.first_slice + 1, d.min_persist);
      EXPECT_GE(l.contrast, d.contrast_min);
      EXPECT_LE(l.contrast, d.contrast_max);
      for (std::size_t k = 1; k < l.center_row.size(); ++k) {
        EXPECT_LE(std::abs(l.center_row[k] - l.center_row[k - 1]), d.max_drift + 1e-12);
        EXPECT_LE(std::abs(l.center_col[k] - l.center_col[k - 1]), d.max_drift + 1e-12);
      }
      for (double r : l.radius) {
        EXPECT_GE(r, d.radius_min - 1e-12);
        EXPECT_LE(r, d.radius_max + 1e-12);
      }
    }
  }
}

TEST(Synthetic, OversizedLesionRejected) {
  DatasetSpec d = tiny_dataset();
  d.height = d.width = 6;
  d.radius_max = 4.0;
  EXPECT_THROW(generate_volume(d, 1), std::invalid_argument);
}

TEST(Synthetic, DatasetSplitSizes) {
  auto data = generate_dataset(tiny_dataset(), 9);
  EXPECT_EQ(data.train.size(), 4u);
  EXPECT_EQ(data.test.size(), 2u);
  EXPECT_NE(data.train[0].images, data.test[0].images);
}

TEST(Model, MemoryIsCausalAcrossSlices) {
  ExperimentConfig cfg = tiny_experiment();
  SegmentationModel model(cfg.model, 5);
  auto vol = generate_volume(cfg.dataset, 11);
  auto base = model.predict_volume(vol);
  for (std::size_t s = 0; s + 1 < vol.slices(); ++s) {
    SyntheticVolume edited = vol;
    for (std::size_t t = s + 1; t < vol.slices(); ++t) {
      for (double& x : edited.images[t]) x = 1.0 - x;
    }
    EXPECT_TRUE(same_maps(base, model.predict_volume(edited), s)) << "slice " << s;
  }
}

TEST(Model, EarlierSlicesReachLaterOnesThroughMemory) {
  ExperimentConfig cfg = tiny_experiment();
  SegmentationModel model(cfg.model, 6);
  auto vol = generate_volume(cfg.dataset, 12);
  VolumeState a = model.new_volume_state(), b = model.new_volume_state();
  NoGradGuard ng;
  model.forward_slice(vol.slice_tensor(0), a, 0);
  auto with = model.forward_slice(vol.slice_tensor(1), a, 1);
  auto without = model.forward_slice(vol.slice_tensor(1), b, 1);
  double diff = 0.0;
  for (std::size_t i = 0; i < with[0].numel(); ++i) diff += std::abs(with[0].data()[i] - without[0].data()[i]);
  EXPECT_GT(diff, 0.0);
}

TEST(Model, MemoryBoundedAndResettable) {
  ExperimentConfig cfg = tiny_experiment();
  cfg.model.sps.memory_capacity = 3;
  cfg.model.decoder.memory_capacity = 5;
  SegmentationModel model(cfg.model, 7);
  auto vol = generate_volume(cfg.dataset, 13);
  VolumeState st = model.new_volume_state();
  NoGradGuard ng;
  for (std::size_t s = 0; s < vol.slices(); ++s) {
    model.forward_slice(vol.slice_tensor(s), st, static_cast<int>(s));
    EXPECT_LE(st.sps.size(), 3u);
    for (std::size_t j = 0; j < st.decoder.size(); ++j) EXPECT_LE(st.decoder.level(j).size(), 5u);
  }
  EXPECT_THROW(model.forward_slice(vol.slice_tensor(0), st, 0), std::logic_error);
  st.reset();
  EXPECT_TRUE(st.sps.empty());
  EXPECT_NO_THROW(model.forward_slice(vol.slice_tensor(0), st, 0));
}

TEST(Model, ZeroInitAdaptersMatchBaseAtStepZero) {
  ExperimentConfig cfg = tiny_experiment();
  cfg.model.ablation = AblationConfig::parse("Base");
  SegmentationModel base(cfg.model, 8);
  cfg.model.ablation = AblationConfig{true, false, false};
  SegmentationModel adapted(cfg.model, 8);
  auto vol = generate_volume(cfg.dataset, 14);
  VolumeState s1 = base.new_volume_state(), s2 = adapted.new_volume_state();
  NoGradGuard ng;
  auto p = base.forward_slice(vol.slice_tensor(0), s1, 0);
  auto q = adapted.forward_slice(vol.slice_tensor(0), s2, 0);
  for (std::size_t j = 0; j < p.size(); ++j) {
    for (std::size_t i = 0; i < p[j].numel(); ++i) EXPECT_EQ(p[j].data()[i], q[j].data()[i]);
  }
}

TEST(Model, SharedInitialisationAcrossAblations) {
  ExperimentConfig cfg = tiny_experiment();
  SegmentationModel a(cfg.model, 9);
  cfg.model.ablation = AblationConfig::parse("+A");
  SegmentationModel b(cfg.model, 9);
  ASSERT_EQ(a.parameters().entries().size(), b.parameters().entries().size());
  for (std::size_t i = 0; i < a.parameters().entries().size(); ++i) {
    const auto& x = a.parameters().entries()[i];
    const auto& y = b.parameters().entries()[i];
    EXPECT_EQ(x.name, y.name);
    EXPECT_TRUE(std::equal(x.value.data().begin(), x.value.data().end(), y.value.data().begin()));
  }
}

TEST(Model, WithoutMemoryDecoderOnlyFinestLevelIsSupervised) {
  ExperimentConfig cfg = tiny_experiment();
  cfg.model.ablation = AblationConfig::parse("+A+B");
  SegmentationModel m(cfg.model, 10);
  auto w = m.effective_loss().level_weights;
  EXPECT_EQ(w, (std::vector<double>{1.0, 0.0}));
  cfg.model.ablation = AblationConfig::parse("+A+B+C");
  EXPECT_EQ(SegmentationModel(cfg.model, 10).effective_loss().level_weights, (std::vector<double>{1.0, 1.0}));
}

TEST(Model, BackboneGradientsStayZeroDuringTraining) {
  ExperimentConfig cfg = tiny_experiment();
  SegmentationModel m(cfg.model, 11);
  auto data = generate_dataset(cfg.dataset, 15);
  Rng rng(1);
  train_model(m, data.train, cfg.train, rng);
  for (const auto& e : m.parameters().entries()) {
    if (!e.frozen) continue;
    for (double g : e.value.grad()) EXPECT_EQ(g, 0.0) << e.name;
  }
}

TEST(Training, LossDecreasesOnTinyProblem) {
  ExperimentConfig cfg = tiny_experiment();
  cfg.train.steps = 40;
  cfg.train.epoch_milestones = {};
  SegmentationModel m(cfg.model, 12);
  auto data = generate_dataset(cfg.dataset, 16);
  Rng rng(2);
  auto rows = train_model(m, data.train, cfg.train, rng);
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    first += rows[i].total;
    last += rows[rows.size() - 1 - i].total;
  }
  EXPECT_LT(last, first);
}

TEST(Training, LossDecreasesOnFixedBatch) {
  ExperimentConfig cfg = tiny_experiment();
  cfg.train.steps = 50;
  cfg.train.slices_per_step = cfg.dataset.slices;  // the whole volume every step
  cfg.train.epoch_milestones = {};
  SegmentationModel m(cfg.model, 13);
  auto data = generate_dataset(cfg.dataset, 17);
  Rng rng(3);
  auto rows = train_model(m, {data.train[0]}, cfg.train, rng);
  EXPECT_LT(rows.back().total, rows.front().total);
  EXPECT_LT(rows[45].total + rows[46].total + rows[47].total + rows[48].total + rows[49].total,
            rows[0].total + rows[1].total + rows[2].total + rows[3].total + rows[4].total);
}

TEST(Training, ScheduleRescalesMilestones) {
  TrainConfig t;
  t.steps = 400;
  t.base_lr = 1.0;
  auto s = t.schedule();
  EXPECT_DOUBLE_EQ(s.lr_at(0), 1.0);
  EXPECT_DOUBLE_EQ(s.lr_at(13), 1.0);
  EXPECT_DOUBLE_EQ(s.lr_at(14), 0.5);
  EXPECT_DOUBLE_EQ(s.lr_at(24), 0.25);
}

TEST(Experiment, SingleConfigSingleSeedGivesOneRow) {
  ExperimentConfig cfg = tiny_experiment();
  auto table = run_ablation(cfg, {AblationConfig::parse("+A")}, {3});
  ASSERT_EQ(table.runs.size(), 1u);
  ASSERT_EQ(table.summary.size(), 1u);
  EXPECT_EQ(table.summary[0].dice.sd, 0.0);
  std::string csv = ablation_csv(table);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}

TEST(Experiment, RepeatedRunsAreIdentical) {
  ExperimentConfig cfg = tiny_experiment();
  auto configs = AblationConfig::progressive();
  auto a = run_ablation(cfg, {configs[0], configs[3]}, {1, 2});
  auto b = run_ablation(cfg, {configs[0], configs[3]}, {1, 2}, 2);
  EXPECT_EQ(runs_csv(a), runs_csv(b));
  EXPECT_EQ(ablation_csv(a), ablation_csv(b));
  EXPECT_EQ(loss_csv(a.runs[3].losses), loss_csv(b.runs[3].losses));
}

TEST(Experiment, MeanSd) {
  auto m = mean_sd({1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(m.mean, 2.0);
  EXPECT_DOUBLE_EQ(m.sd, 1.0);
}

TEST(Experiment, TrendCheckRules) {
  auto row = [](const char* name, double mean, double sd) {
    AblationSummary s;
    s.config = AblationConfig::parse(name);
    s.dice = {mean, sd};
    return s;
  };
  EXPECT_TRUE(check_trend({row("Base", 0.1, 0.01), row("+A", 0.2, 0.01), row("+A+B", 0.3, 0.01)}).passed);
  auto one = check_trend({row("Base", 0.1, 0.01), row("+A", 0.09, 0.02), row("+A+B", 0.3, 0.01)});
  EXPECT_TRUE(one.passed);
  EXPECT_EQ(one.inversions, 1u);
  EXPECT_FALSE(check_trend({row("Base", 0.1, 0.01), row("+A", 0.05, 0.02), row("+A+B", 0.3, 0.01)}).passed);
  EXPECT_FALSE(check_trend({row("Base", 0.1, 0.05), row("+A", 0.09, 0.05), row("+A+B", 0.08, 0.05)}).passed);
}

TEST(CrossValidation, FoldAssignment) {
  auto f = fold_assignment(5, 5, 7);
  EXPECT_EQ(std::set<std::size_t>(f.begin(), f.end()).size(), 5u);
  EXPECT_EQ(f, fold_assignment(5, 5, 7));
  auto g = fold_assignment(23, 5, 8);
  for (std::size_t k = 0; k < 5; ++k) {
    auto n = std::count(g.begin(), g.end(), k);
    EXPECT_GE(n, 4);
    EXPECT_LE(n, 5);
  }
  EXPECT_THROW(fold_assignment(4, 5, 1), std::invalid_argument);
}

TEST(CrossValidation, EachVolumeTestedOnce) {
  ExperimentConfig cfg = tiny_experiment();
  cfg.train.steps = 1;
  auto vols = generate_dataset(cfg.dataset, 3).train;
  vols.push_back(vols[0]);
  auto r = cross_validate(cfg, vols, 5, 4);
  ASSERT_EQ(r.per_fold.size(), 5u);
  std::uint64_t pixels = 0;
  for (const auto& m : r.per_fold) pixels += m.counts.tp + m.counts.fp + m.counts.fn + m.counts.tn;
  EXPECT_EQ(pixels, 5u * 16u * 16u * 5u);
  EXPECT_TRUE(r.aggregate.dice_iou_identity());
}

TEST(Config, JsonRoundTripAndValidation) {
  ExperimentConfig c = tiny_experiment();
  c.model.encoder.block.strategy = ScanStrategy::Snake;
  c.model.loss.focal_gamma = 1.5;
  ExperimentConfig d = parse_config(config_to_json(c));
  EXPECT_EQ(config_to_json(c), config_to_json(d));
  EXPECT_EQ(d.model.encoder.block.strategy, ScanStrategy::Snake);
  EXPECT_EQ(parse_config("{}").train.steps, 300u);
  EXPECT_THROW(parse_config(R"({"train": {"stepz": 3}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"scan": {"strategy": "hilbert"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"dataset": {"height": 4}})"), ConfigError);
  EXPECT_THROW(parse_config("{"), ConfigError);
  EXPECT_EQ(parse_config(R"({"ablation": "+A+B"})").model.ablation, (AblationConfig{true, true, false}));
}

TEST(Container, RoundTripPreservesValuesBitwise) {
  ExperimentConfig cfg = tiny_experiment();
  SegmentationModel a(cfg.model, 1), b(cfg.model, 2);
  auto path = std::filesystem::temp_directory_path() / "centerscan_container_test.bin";
  write_container(path, to_arrays(a.parameters()), R"({"seed":1})");
  std::string meta;
  auto arrays = read_container(path, &meta);
  EXPECT_EQ(meta, R"({"seed":1})");
  load_arrays(b.parameters(), arrays);
  for (std::size_t i = 0; i < a.parameters().entries().size(); ++i) {
    const auto& x = a.parameters().entries()[i].value;
    const auto& y = b.parameters().entries()[i].value;
    EXPECT_TRUE(std::equal(x.data().begin(), x.data().end(), y.data().begin()));
  }
  arrays.pop_back();
  EXPECT_THROW(load_arrays(b.parameters(), arrays), std::exception);
  std::filesystem::remove(path);
}

TEST(Container, RejectsGarbage) {
  auto path = std::filesystem::temp_directory_path() / "centerscan_garbage.bin";
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("definitely not a checkpoint", f);
    std::fclose(f);
  }
  EXPECT_THROW(read_container(path), std::runtime_error);
  std::filesystem::remove(path);
}

// SPDX-License-Identifier: Apache-2.0
// centerscan command line: scan-dump | kernel-analyze | train | eval | ablate | xval
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "centerscan/config.hpp"
#include "centerscan/container.hpp"
#include "centerscan/experiment.hpp"
#include "centerscan/scan_geometry.hpp"
#include "centerscan/ssm_scan.hpp"

namespace fs = std::filesystem;
using namespace centerscan;

namespace {

struct Common {
  std::string config_path;
  std::uint64_t seed = 1;
  std::string out = ".";
};

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
  cfg.finalize();
  return cfg;
}

fs::path out_dir(const Common& c) {
  fs::path p(c.out);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  std::cout << "wrote " << path.string() << "\n";
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void parse_grid(const std::string& text, std::size_t& h, std::size_t& w) {
  const auto x = text.find_first_of("xX");
  if (x == std::string::npos) throw CLI::ValidationError("--grid", "expected HxW");
  h = std::stoul(text.substr(0, x));
  w = std::stoul(text.substr(x + 1));
  if (h == 0 || w == 0) throw CLI::ValidationError("--grid", "extents must be positive");
}

bool reports_valid(const std::vector<MetricReport>& reports, const MetricReport& aggregate) {
  bool ok = aggregate.in_unit_range() && aggregate.dice_iou_identity();
  for (const auto& r : reports) ok = ok && r.in_unit_range() && r.dice_iou_identity();
  return ok;
}

// ---------------------------------------------------------------- scan-dump

struct ScanDumpArgs {
  std::string grid, strategy, params_path;
  int region_size = 0;
};

int scan_dump(const Common& c, const ScanDumpArgs& a) {
  ExperimentConfig cfg = load(c);
  std::size_t h = cfg.grid_height, w = cfg.grid_width;
  if (!a.grid.empty()) parse_grid(a.grid, h, w);
  auto block = cfg.model.encoder.block;
  if (!a.params_path.empty()) block.priority = load_config(a.params_path).model.encoder.block.priority;
  block.priority.validate();
  const int rs = a.region_size ? a.region_size : block.region_size;
  const ScanStrategy strategy = a.strategy.empty() ? block.strategy : parse_strategy(a.strategy);

  const RegionPartition part = partition(static_cast<int>(h), static_cast<int>(w), rs);
  const PathListing listing = build_listing(part, strategy, block.priority);
  bool ok = true;
  for (std::size_t r = 0; r < listing.regions.size(); ++r)
    for (const auto& p : listing.paths[r]) ok = ok && is_permutation_of(p, listing.regions[r]);

  const std::string text = serialize_listing(listing);
  std::cout << text;
  const fs::path dir = out_dir(c);
  write_text(dir / "paths.txt", text);
  write_text(dir / "paths.svg", render_paths_svg(listing));
  if (!ok) std::cerr << "scan-dump: a path is not a permutation of its region\n";
  return ok ? 0 : 2;
}

// ----------------------------------------------------------- kernel-analyze

struct KernelArgs {
  std::string strategy, direction, params_path, checkpoint;
  int region_size = 0;
  double decay = 0.5;
};

struct KernelRow {
  std::string source;
  EffectiveKernel kernel;
  KernelGroups groups;
};

const char* cell_group(Coord p, const Region& region) {
  const Coord c = center_cell(region);
  if (p == c) return "center";
  if (p.row == c.row || p.col == c.col) return "axis";
  return "corner";
}

std::string kernel_svg(const std::vector<KernelRow>& rows, const Region& region) {
  const int cell = 40, gap = 24, label = 18;
  const int panel_w = region.cols * cell, panel_h = region.rows * cell + label;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << rows.size() * (panel_w + gap) + gap << "\" height=\""
    << panel_h + 2 * gap << "\" font-family=\"monospace\" font-size=\"10\">\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& kr = rows[k];
    double wmax = 0.0;
    for (double v : kr.kernel.weights) wmax = std::max(wmax, v);
    const int x0 = gap + static_cast<int>(k) * (panel_w + gap), y0 = gap;
    s << "<text x=\"" << x0 << "\" y=\"" << y0 + 12 << "\">" << kr.source << "</text>\n";
    for (std::size_t i = 0; i < kr.kernel.cells.size(); ++i) {
      const Coord p = kr.kernel.cells[i];
      const double t = wmax > 0 ? kr.kernel.weights[i] / wmax : 0.0;
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - t)));
      const int x = x0 + (p.col - region.col0) * cell, y = y0 + label + (p.row - region.row0) * cell;
      s << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
        << "\" fill=\"rgb(255," << shade << "," << shade << ")\" stroke=\"#444\"/>\n";
      s << "<text x=\"" << x + 3 << "\" y=\"" << y + cell / 2 + 4 << "\">" << fmt("%.3f", kr.kernel.weights[i])
        << "</text>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

SsmParams scalar_ssm(double decay) {
  if (!(decay > 0.0 && decay < 1.0)) throw CLI::ValidationError("--decay", "must lie in (0, 1)");
  ParameterSet reg;
  Rng rng(0);
  SsmParams p = SsmParams::create(reg, "probe.", 1, 1, rng, true);
  p.decay_logits.mutable_data()[0] = std::log(decay / (1.0 - decay));
  p.input_proj.mutable_data()[0] = 1.0;
  p.output_proj.mutable_data()[0] = 1.0;
  p.skip_scale.mutable_data()[0] = 0.0;
  return p;
}

SegmentationModel load_checkpoint(const std::string& path, ExperimentConfig* cfg_out, std::uint64_t* seed_out) {
  std::string meta;
  const auto arrays = read_container(path, &meta);
  const nlohmann::json m = nlohmann::json::parse(meta);
  if (!m.contains("config") || !m.contains("seed")) throw std::runtime_error(path + ": checkpoint meta lacks config/seed");
  ExperimentConfig cfg = parse_config(m["config"].dump());
  cfg.finalize();
  const std::uint64_t seed = m["seed"].get<std::uint64_t>();
  SegmentationModel model(cfg.model, SeedStreams::from(seed).model);
  load_arrays(model.parameters(), arrays);
  if (cfg_out) *cfg_out = cfg;
  if (seed_out) *seed_out = seed;
  return model;
}

int kernel_analyze(const Common& c, const KernelArgs& a) {
  ExperimentConfig cfg = load(c);
  CenterBlockConfig block = cfg.model.encoder.block;
  if (!a.params_path.empty()) block.priority = load_config(a.params_path).model.encoder.block.priority;
  if (a.region_size) block.region_size = a.region_size;
  if (!a.strategy.empty()) block.strategy = parse_strategy(a.strategy);
  if (!a.direction.empty()) block.direction = parse_direction(a.direction);
  block.priority.validate();

  const Region region{0, 0, block.region_size, block.region_size};
  std::vector<KernelRow> rows;
  auto analyze = [&](const std::string& source, const SsmParams& ssm, SsmOptions opts) {
    for (const auto& path : consumed_paths(region, block)) {
      EffectiveKernel k = measure_effective_kernel(ssm, region, path, opts);
      rows.push_back({source, k, group_kernel(k, region)});
    }
  };

  if (a.checkpoint.empty()) {
    SsmOptions opts;
    opts.freeze_gates = true;
    analyze("linear_decay_" + fmt("%g", a.decay), scalar_ssm(a.decay), opts);
  } else {
    SegmentationModel model = load_checkpoint(a.checkpoint, nullptr, nullptr);
    const auto blocks = model.encoder().adapter_blocks();
    if (blocks.empty()) throw std::runtime_error("checkpoint has no adapter blocks");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      block.state_dim = blocks[i]->config.state_dim;
      analyze("adapter" + std::to_string(i), blocks[i]->ssm, blocks[i]->config.ssm);
    }
  }

  bool ok = true;
  std::ostringstream csv;
  csv << "source,path,row,col,scan_position,weight,group\n";
  std::size_t path_index = 0;
  std::string last_source;
  for (const auto& kr : rows) {
    path_index = kr.source == last_source ? path_index + 1 : 0;
    last_source = kr.source;
    double sum = 0.0;
    for (std::size_t i = 0; i < kr.kernel.cells.size(); ++i) {
      const double wv = kr.kernel.weights[i];
      ok = ok && std::isfinite(wv) && wv >= 0.0;
      sum += wv;
      csv << kr.source << ',' << path_index << ',' << kr.kernel.cells[i].row << ',' << kr.kernel.cells[i].col << ','
          << kr.kernel.scan_position[i] << ',' << fmt("%.12f", wv) << ',' << cell_group(kr.kernel.cells[i], region)
          << '\n';
    }
    ok = ok && std::abs(sum - 1.0) <= 1e-9;
    const bool dominant = kr.groups.center > kr.groups.axis_mean && kr.groups.axis_mean > kr.groups.corner_mean;
    std::cout << kr.source << " path " << path_index << ": center " << fmt("%.6f", kr.groups.center) << " axis "
              << fmt("%.6f", kr.groups.axis_mean) << " corner " << fmt("%.6f", kr.groups.corner_mean)
              << (dominant ? "  center>axis>corner" : "  not center-dominant") << "\n";
  }
  const fs::path dir = out_dir(c);
  write_text(dir / "kernel.csv", csv.str());
  write_text(dir / "kernel.svg", kernel_svg(rows, region));
  if (!ok) std::cerr << "kernel-analyze: weights are not a nonnegative distribution\n";
  return ok ? 0 : 2;
}

// -------------------------------------------------------------------- train

int train(const Common& c, std::size_t steps) {
  ExperimentConfig cfg = load(c);
  if (steps) cfg.train.steps = steps;
  cfg.finalize();
  SegmentationModel model(cfg.model, 0);
  RunResult r = run_single(cfg, cfg.model.ablation, c.seed, &model);
  const fs::path dir = out_dir(c);
  write_text(dir / "loss.csv", loss_csv(r.losses));
  write_text(dir / "metrics.csv", metrics_csv(r.eval));
  write_text(dir / "config.json", config_to_json(cfg));
  nlohmann::ordered_json meta;
  meta["config"] = nlohmann::ordered_json::parse(config_to_json(cfg));
  meta["seed"] = c.seed;
  meta["ablation"] = cfg.model.ablation.name();
  write_container(dir / "model.ckpt", to_arrays(model.parameters()), meta.dump());
  std::cout << "wrote " << (dir / "model.ckpt").string() << "\n";
  const auto& m = r.eval.aggregate;
  std::cout << cfg.model.ablation.name() << " seed " << c.seed << ": dice " << fmt("%.4f", m.dice) << " iou "
            << fmt("%.4f", m.iou) << " precision " << fmt("%.4f", m.precision) << " sensitivity "
            << fmt("%.4f", m.sensitivity) << " (" << fmt("%.1f", r.seconds) << " s)\n";
  if (!reports_valid(r.eval.per_volume, m)) {
    std::cerr << "train: metric invariant violated\n";
    return 2;
  }
  return 0;
}

// --------------------------------------------------------------------- eval

int eval(const Common& c, const std::string& checkpoint, bool dump_memory) {
  ExperimentConfig cfg;
  std::uint64_t seed = 0;
  SegmentationModel model = load_checkpoint(checkpoint, &cfg, &seed);
  if (!c.config_path.empty()) cfg.dataset = load(c).dataset;
  const Dataset data = generate_dataset(cfg.dataset, SeedStreams::from(seed).data);

  EvalResult r;
  ConfusionCounts pooled;
  std::vector<NamedArray> memory;
  bool causal = true;
  for (std::size_t v = 0; v < data.test.size(); ++v) {
    const auto& vol = data.test[v];
    VolumeState state = model.new_volume_state();
    const auto preds = model.predict_volume(vol, &state);
    try {
      state.sps.check_causal(static_cast<int>(vol.slices()));
      for (std::size_t j = 0; j < state.decoder.size(); ++j)
        state.decoder.level(j).check_causal(static_cast<int>(vol.slices()));
    } catch (const std::exception& e) {
      std::cerr << "eval: " << e.what() << "\n";
      causal = false;
    }
    ConfusionCounts counts;
    for (std::size_t s = 0; s < preds.size(); ++s) counts += confusion(preds[s], vol.masks[s]);
    pooled += counts;
    r.per_volume.push_back(MetricReport::from_counts(counts));
    if (dump_memory) {
      const std::string base = "volume" + std::to_string(v) + ".";
      for (auto& a : state.sps.dump(base + "sps.")) memory.push_back(std::move(a));
      for (std::size_t j = 0; j < state.decoder.size(); ++j)
        for (auto& a : state.decoder.level(j).dump(base + "decoder.level" + std::to_string(j) + "."))
          memory.push_back(std::move(a));
    }
  }
  r.aggregate = MetricReport::from_counts(pooled);

  const fs::path dir = out_dir(c);
  write_text(dir / "metrics.csv", metrics_csv(r));
  if (dump_memory) {
    nlohmann::ordered_json meta;
    meta["checkpoint"] = fs::path(checkpoint).filename().string();
    meta["seed"] = seed;
    write_container(dir / "memory.ckpt", memory, meta.dump());
    std::cout << "wrote " << (dir / "memory.ckpt").string() << " (" << memory.size() << " arrays)\n";
  }
  std::cout << "dice " << fmt("%.4f", r.aggregate.dice) << " iou " << fmt("%.4f", r.aggregate.iou) << "\n";
  if (!reports_valid(r.per_volume, r.aggregate) || !causal) {
    std::cerr << "eval: invariant violated\n";
    return 2;
  }
  return 0;
}

// ------------------------------------------------------------------- ablate

int ablate(const Common& c, std::size_t steps, std::size_t jobs, std::vector<std::uint64_t> seeds) {
  ExperimentConfig cfg = load(c);
  if (steps) cfg.train.steps = steps;
  if (jobs) cfg.jobs = jobs;
  if (seeds.empty()) seeds = cfg.ablation_seeds;
  cfg.finalize();
  const AblationTable t = run_ablation(cfg, AblationConfig::progressive(), seeds, cfg.jobs);
  const TrendCheck trend = check_trend(t.summary);

  std::ostringstream report;
  for (const auto& s : t.summary)
    report << s.config.name() << ": dice " << fmt("%.4f", s.dice.mean) << " +- " << fmt("%.4f", s.dice.sd) << " over "
           << s.runs << " runs\n";
  report << "trend " << (trend.passed ? "PASS" : "FAIL") << " inversions " << trend.inversions << "\n";
  for (const auto& n : trend.notes) report << n << "\n";
  std::cout << report.str();

  const fs::path dir = out_dir(c);
  write_text(dir / "ablation.csv", ablation_csv(t));
  write_text(dir / "ablation_runs.csv", runs_csv(t));
  write_text(dir / "trend.txt", report.str());
  bool ok = true;
  for (const auto& r : t.runs) ok = ok && reports_valid(r.eval.per_volume, r.eval.aggregate);
  if (!ok) {
    std::cerr << "ablate: metric invariant violated\n";
    return 2;
  }
  return 0;
}

// --------------------------------------------------------------------- xval

int xval(const Common& c, std::size_t steps, std::size_t folds) {
  ExperimentConfig cfg = load(c);
  if (steps) cfg.train.steps = steps;
  if (folds) cfg.folds = folds;
  cfg.finalize();
  Dataset data = generate_dataset(cfg.dataset, SeedStreams::from(c.seed).data);
  std::vector<SyntheticVolume> volumes = std::move(data.train);
  for (auto& v : data.test) volumes.push_back(std::move(v));
  const CrossValResult r = cross_validate(cfg, volumes, cfg.folds, c.seed);

  const fs::path dir = out_dir(c);
  write_text(dir / "xval.csv", crossval_csv(r));
  for (std::size_t f = 0; f < r.per_fold.size(); ++f)
    std::cout << "fold " << f << ": dice " << fmt("%.4f", r.per_fold[f].dice) << "\n";
  std::cout << "pooled dice " << fmt("%.4f", r.aggregate.dice) << "\n";
  if (!reports_valid(r.per_fold, r.aggregate)) {
    std::cerr << "xval: metric invariant violated\n";
    return 2;
  }
  return 0;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "master seed");
  sub->add_option("--out", c.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"centerscan: center-prioritized local scan segmentation toolkit"};
  app.require_subcommand(1);
  Common common;

  ScanDumpArgs sd;
  auto* scan_cmd = app.add_subcommand("scan-dump", "serialize per-region scan paths and draw them");
  add_common(scan_cmd, common);
  scan_cmd->add_option("--grid", sd.grid, "grid extent HxW");
  scan_cmd->add_option("--region-size", sd.region_size, "region edge (1, 2 or 3)");
  scan_cmd->add_option("--strategy", sd.strategy, "center_priority|raster|snake|bidirectional|cross_scan");
  scan_cmd->add_option("--params", sd.params_path, "JSON file with a priority section")->check(CLI::ExistingFile);

  KernelArgs ka;
  auto* kernel_cmd = app.add_subcommand("kernel-analyze", "measure per-cell effective kernel weights");
  add_common(kernel_cmd, common);
  kernel_cmd->add_option("--strategy", ka.strategy, "scan strategy");
  kernel_cmd->add_option("--region-size", ka.region_size, "region edge (1, 2 or 3)");
  kernel_cmd->add_option("--direction", ka.direction, "reversed|priority_order");
  kernel_cmd->add_option("--decay", ka.decay, "decay of the scalar linear probe SSM");
  kernel_cmd->add_option("--params", ka.params_path, "JSON file with a priority section")->check(CLI::ExistingFile);
  kernel_cmd->add_option("--checkpoint", ka.checkpoint, "analyze the adapter SSMs of a trained model")
      ->check(CLI::ExistingFile);

  std::size_t steps = 0, jobs = 0, folds = 0;
  std::vector<std::uint64_t> seeds;
  auto* train_cmd = app.add_subcommand("train", "train one configuration and write a checkpoint");
  add_common(train_cmd, common);
  train_cmd->add_option("--steps", steps, "override train.steps");

  std::string checkpoint;
  bool dump_memory = false;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on its held-out split");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--checkpoint", checkpoint, "model.ckpt from train")->required()->check(CLI::ExistingFile);
  eval_cmd->add_flag("--dump-memory", dump_memory, "write final per-volume memory to memory.ckpt");

  auto* ablate_cmd = app.add_subcommand("ablate", "Base, +A, +A+B, +A+B+C over several seeds");
  add_common(ablate_cmd, common);
  ablate_cmd->add_option("--steps", steps, "override train.steps");
  ablate_cmd->add_option("--jobs", jobs, "parallel runs");
  ablate_cmd->add_option("--seeds", seeds, "override ablation_seeds");

  auto* xval_cmd = app.add_subcommand("xval", "subject-wise k-fold cross-validation");
  add_common(xval_cmd, common);
  xval_cmd->add_option("--steps", steps, "override train.steps");
  xval_cmd->add_option("--folds", folds, "override folds");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*scan_cmd) return scan_dump(common, sd);
    if (*kernel_cmd) return kernel_analyze(common, ka);
    if (*train_cmd) return train(common, steps);
    if (*eval_cmd) return eval(common, checkpoint, dump_memory);
    if (*ablate_cmd) return ablate(common, steps, jobs, seeds);
    if (*xval_cmd) return xval(common, steps, folds);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "centerscan: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

// SPDX-License-Identifier: Apache-2.0
#include "centerscan/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace centerscan {

SeedStreams SeedStreams::from(std::uint64_t master) {
  Rng root(master);
  return SeedStreams{root.fork("data").seed(), root.fork("model").seed(), root.fork("train").seed()};
}

RunResult run_single(const ExperimentConfig& cfg, const AblationConfig& ablation, std::uint64_t seed,
                     SegmentationModel* trained) {
  const auto t0 = std::chrono::steady_clock::now();
  const SeedStreams streams = SeedStreams::from(seed);
  Dataset data = generate_dataset(cfg.dataset, streams.data);

  ModelConfig mc = cfg.model;
  mc.ablation = ablation;
  SegmentationModel model(mc, streams.model);
  Rng sampler(streams.train);

  RunResult r;
  r.config = ablation;
  r.seed = seed;
  r.losses = train_model(model, data.train, cfg.train, sampler);
  r.eval = evaluate_model(model, data.test);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (trained) *trained = std::move(model);
  return r;
}

MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd out;
  if (xs.empty()) return out;
  out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

AblationTable run_ablation(const ExperimentConfig& cfg, const std::vector<AblationConfig>& configs,
                           const std::vector<std::uint64_t>& seeds, std::size_t jobs, const RunObserver& observer) {
  if (configs.empty()) throw std::invalid_argument("run_ablation: no configurations");
  if (seeds.empty()) throw std::invalid_argument("run_ablation: no seeds");
  const std::size_t n = configs.size() * seeds.size();
  std::vector<RunResult> runs(n);
  std::vector<std::exception_ptr> errors(n);

  auto task = [&](std::size_t i) {
    try {
      if (observer) {
        SegmentationModel model(cfg.model, 0);
        runs[i] = run_single(cfg, configs[i / seeds.size()], seeds[i % seeds.size()], &model);
        observer(runs[i], model);
      } else {
        runs[i] = run_single(cfg, configs[i / seeds.size()], seeds[i % seeds.size()]);
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) task(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  AblationTable table;
  table.runs = std::move(runs);
  for (std::size_t c = 0; c < configs.size(); ++c) {
    std::vector<double> dice, iou, prec, sens;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const MetricReport& m = table.runs[c * seeds.size() + s].eval.aggregate;
      dice.push_back(m.dice);
      iou.push_back(m.iou);
      prec.push_back(m.precision);
      sens.push_back(m.sensitivity);
    }
    table.summary.push_back({configs[c], seeds.size(), mean_sd(dice), mean_sd(iou), mean_sd(prec), mean_sd(sens)});
  }
  return table;
}

TrendCheck check_trend(const std::vector<AblationSummary>& summary) {
  TrendCheck out;
  bool within = true;
  char buf[256];
  for (std::size_t i = 0; i + 1 < summary.size(); ++i) {
    const auto& a = summary[i];
    const auto& b = summary[i + 1];
    if (b.dice.mean >= a.dice.mean) continue;
    ++out.inversions;
    const double drop = a.dice.mean - b.dice.mean;
    const double tol = std::max(a.dice.sd, b.dice.sd);
    std::snprintf(buf, sizeof buf, "%s -> %s: dice drops by %.6f (sd bound %.6f)", a.config.name().c_str(),
                  b.config.name().c_str(), drop, tol);
    out.notes.emplace_back(buf);
    within = within && drop <= tol;
  }
  out.passed = out.inversions == 0 || (out.inversions == 1 && within);
  return out;
}

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::string metric_cols(const MetricReport& m) {
  return fmt(m.dice) + "," + fmt(m.iou) + "," + fmt(m.precision) + "," + fmt(m.sensitivity) + "," +
         std::to_string(m.counts.tp) + "," + std::to_string(m.counts.fp) + "," + std::to_string(m.counts.fn) + "," +
         std::to_string(m.counts.tn);
}

const char* kMetricHeader = "dice,iou,precision,sensitivity,tp,fp,fn,tn";

}  // namespace

std::string ablation_csv(const AblationTable& t) {
  std::ostringstream os;
  os << "config,A,B,C,runs,dice_mean,dice_sd,iou_mean,iou_sd,precision_mean,precision_sd,sensitivity_mean,"
        "sensitivity_sd\n";
  for (const auto& s : t.summary) {
    os << s.config.name() << ',' << s.config.A << ',' << s.config.B << ',' << s.config.C << ',' << s.runs << ','
       << fmt(s.dice.mean) << ',' << fmt(s.dice.sd) << ',' << fmt(s.iou.mean) << ',' << fmt(s.iou.sd) << ','
       << fmt(s.precision.mean) << ',' << fmt(s.precision.sd) << ',' << fmt(s.sensitivity.mean) << ','
       << fmt(s.sensitivity.sd) << '\n';
  }
  return os.str();
}

std::string runs_csv(const AblationTable& t) {
  std::ostringstream os;
  os << "config,seed," << kMetricHeader << ",final_loss\n";
  for (const auto& r : t.runs) {
    os << r.config.name() << ',' << r.seed << ',' << metric_cols(r.eval.aggregate) << ','
       << (r.losses.empty() ? std::string("") : fmt(r.losses.back().total)) << '\n';
  }
  return os.str();
}

std::string metrics_csv(const EvalResult& e) {
  std::ostringstream os;
  os << "volume," << kMetricHeader << '\n';
  for (std::size_t v = 0; v < e.per_volume.size(); ++v) os << v << ',' << metric_cols(e.per_volume[v]) << '\n';
  os << "aggregate," << metric_cols(e.aggregate) << '\n';
  return os.str();
}

std::string loss_csv(const std::vector<LossRow>& rows) {
  std::ostringstream os;
  const std::size_t levels = rows.empty() ? 0 : rows.front().dice.size();
  os << "step,lr,total";
  for (std::size_t j = 0; j < levels; ++j) os << ",dice_p" << j + 1;
  for (std::size_t j = 0; j < levels; ++j) os << ",focal_p" << j + 1;
  os << '\n';
  char lr[32];
  for (const auto& r : rows) {
    std::snprintf(lr, sizeof lr, "%.6g", r.lr);
    os << r.step << ',' << lr << ',' << fmt(r.total);
    for (double d : r.dice) os << ',' << fmt(d);
    for (double f : r.focal) os << ',' << fmt(f);
    os << '\n';
  }
  return os.str();
}

std::vector<std::size_t> fold_assignment(std::size_t volumes, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("fold_assignment: need at least 2 folds");
  if (volumes < k) {
    throw std::invalid_argument("fold_assignment: " + std::to_string(volumes) + " volumes cannot fill " +
                                std::to_string(k) + " folds");
  }
  std::vector<std::size_t> order(volumes);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng(seed).fork("folds");
  for (std::size_t i = volumes; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  std::vector<std::size_t> fold(volumes);
  for (std::size_t i = 0; i < volumes; ++i) fold[order[i]] = i % k;
  return fold;
}

CrossValResult cross_validate(const ExperimentConfig& cfg, const std::vector<SyntheticVolume>& volumes,
                              std::size_t k, std::uint64_t seed) {
  CrossValResult out;
  out.fold_of = fold_assignment(volumes.size(), k, seed);
  const SeedStreams streams = SeedStreams::from(seed);
  ConfusionCounts pooled;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<SyntheticVolume> train, test;
    for (std::size_t v = 0; v < volumes.size(); ++v) (out.fold_of[v] == f ? test : train).push_back(volumes[v]);
    SegmentationModel model(cfg.model, streams.model);
    Rng sampler = Rng(streams.train).fork("fold" + std::to_string(f));
    train_model(model, train, cfg.train, sampler);
    EvalResult e = evaluate_model(model, test);
    out.per_fold.push_back(e.aggregate);
    pooled += e.aggregate.counts;
  }
  out.aggregate = MetricReport::from_counts(pooled);
  return out;
}

std::string crossval_csv(const CrossValResult& r) {
  std::ostringstream os;
  os << "fold,volumes," << kMetricHeader << '\n';
  for (std::size_t f = 0; f < r.per_fold.size(); ++f) {
    std::size_t n = static_cast<std::size_t>(std::count(r.fold_of.begin(), r.fold_of.end(), f));
    os << f << ',' << n << ',' << metric_cols(r.per_fold[f]) << '\n';
  }
  os << "aggregate," << r.fold_of.size() << ',' << metric_cols(r.aggregate) << '\n';
  return os.str();
}

}  // namespace centerscan

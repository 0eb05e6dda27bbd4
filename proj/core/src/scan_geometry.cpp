// SPDX-License-Identifier: Apache-2.0
#include "centerscan/scan_geometry.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace centerscan {

void PriorityParams::validate() const {
  auto check = [](double v, const char* name, bool allow_zero = false) {
    if (!std::isfinite(v) || v < 0.0 || (v == 0.0 && !allow_zero)) {
      throw std::invalid_argument(std::string("PriorityParams: ") + name + (allow_zero ? " must be finite and >= 0"
                                                                                       : " must be finite and > 0"));
    }
  };
  check(alpha, "alpha");
  check(beta, "beta");
  check(gamma, "gamma", true);
  check(epsilon, "epsilon");
  check(lambda_decay, "lambda_decay");
}

std::vector<Coord> Region::cells() const {
  std::vector<Coord> out;
  out.reserve(size());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out.push_back({row0 + r, col0 + c});
  return out;
}

RegionPartition partition(int grid_h, int grid_w, int region_size) {
  if (grid_h < 1 || grid_w < 1) throw std::invalid_argument("partition: grid extents must be >= 1");
  if (region_size < 1 || region_size > 3) throw std::invalid_argument("partition: region_size must be 1, 2 or 3");
  RegionPartition p{grid_h, grid_w, region_size, {}};
  for (int r = 0; r < grid_h; r += region_size)
    for (int c = 0; c < grid_w; c += region_size)
      p.regions.push_back({r, c, std::min(region_size, grid_h - r), std::min(region_size, grid_w - c)});
  return p;
}

namespace {

constexpr std::array<std::pair<ScanStrategy, std::string_view>, 5> kStrategyNames{{
    {ScanStrategy::CenterPriority, "center_priority"},
    {ScanStrategy::Raster, "raster"},
    {ScanStrategy::Snake, "snake"},
    {ScanStrategy::Bidirectional, "bidirectional"},
    {ScanStrategy::CrossScan, "cross_scan"},
}};

}  // namespace

std::string_view to_string(ScanStrategy s) {
  for (auto [k, v] : kStrategyNames) {
    if (k == s) return v;
  }
  return "unknown";
}

ScanStrategy parse_strategy(std::string_view name) {
  for (auto [k, v] : kStrategyNames) {
    if (v == name) return k;
  }
  throw std::invalid_argument("unknown scan strategy '" + std::string(name) + "'");
}

void region_centroid(const Region& region, double& row, double& col) {
  row = region.row0 + (region.rows - 1) / 2.0;
  col = region.col0 + (region.cols - 1) / 2.0;
}

Coord center_cell(const Region& region) {
  double cr = 0, cc = 0;
  region_centroid(region, cr, cc);
  Coord best{};
  double best_d = std::numeric_limits<double>::infinity();
  for (auto p : region.cells()) {
    const double d = std::hypot(p.row - cr, p.col - cc);
    if (d < best_d) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

double priority(Coord p, const Region& region, const PriorityParams& params) {
  if (!region.contains(p)) {
    throw std::invalid_argument("priority: cell (" + std::to_string(p.row) + "," + std::to_string(p.col) +
                                ") outside region");
  }
  double cr = 0, cc = 0;
  region_centroid(region, cr, cc);
  const double dist = std::hypot(p.row - cr, p.col - cc);
  const Coord center = center_cell(region);
  const double axis = (p.row == center.row || p.col == center.col) ? 1.0 : 0.0;
  return params.alpha * std::pow(dist + params.epsilon, -params.beta) + params.gamma * axis;
}

namespace {

std::vector<Coord> column_major(const Region& region) {
  std::vector<Coord> out;
  for (int c = 0; c < region.cols; ++c)
    for (int r = 0; r < region.rows; ++r) out.push_back({region.row0 + r, region.col0 + c});
  return out;
}

std::vector<Coord> reversed(std::vector<Coord> v) {
  std::reverse(v.begin(), v.end());
  return v;
}

}  // namespace

std::vector<ScanPath> scan_order(const Region& region, ScanStrategy strategy, const PriorityParams& params) {
  if (region.size() == 0) throw std::invalid_argument("scan_order: empty region");
  auto raster = region.cells();
  switch (strategy) {
    case ScanStrategy::CenterPriority: {
      params.validate();
      std::vector<std::pair<double, Coord>> scored;
      for (auto p : raster) scored.emplace_back(priority(p, region, params), p);
      // Row-major input plus stable sort gives row-major tie-breaking.
      std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
      ScanPath path{{}, strategy};
      for (auto& [s, p] : scored) path.order.push_back(p);
      return {path};
    }
    case ScanStrategy::Raster:
      return {{raster, strategy}};
    case ScanStrategy::Snake: {
      ScanPath path{{}, strategy};
      for (int r = 0; r < region.rows; ++r) {
        for (int k = 0; k < region.cols; ++k) {
          const int c = (r % 2 == 0) ? k : region.cols - 1 - k;
          path.order.push_back({region.row0 + r, region.col0 + c});
        }
      }
      return {path};
    }
    case ScanStrategy::Bidirectional:
      return {{raster, strategy}, {reversed(raster), strategy}};
    case ScanStrategy::CrossScan: {
      auto cm = column_major(region);
      return {{raster, strategy}, {cm, strategy}, {reversed(raster), strategy}, {reversed(cm), strategy}};
    }
  }
  throw std::invalid_argument("scan_order: unhandled strategy");
}

bool is_permutation_of(const ScanPath& path, const Region& region) {
  if (path.order.size() != region.size()) return false;
  std::vector<bool> seen(region.size(), false);
  for (auto p : path.order) {
    if (!region.contains(p)) return false;
    const auto idx = static_cast<std::size_t>((p.row - region.row0) * region.cols + (p.col - region.col0));
    if (seen[idx]) return false;
    seen[idx] = true;
  }
  return true;
}

PathListing build_listing(const RegionPartition& part, ScanStrategy strategy, const PriorityParams& params) {
  PathListing l{part.grid_h, part.grid_w, part.region_size, strategy, params, part.regions, {}};
  for (const auto& r : part.regions) l.paths.push_back(scan_order(r, strategy, params));
  return l;
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void parse_fail(const std::string& what) { throw std::invalid_argument("parse_paths: " + what); }

void expect_word(std::istringstream& line, const char* word) {
  std::string w;
  if (!(line >> w) || w != word) parse_fail(std::string("expected '") + word + "', got '" + w + "'");
}

Coord parse_coord(const std::string& tok) {
  auto comma = tok.find(',');
  if (comma == std::string::npos) parse_fail("bad coordinate '" + tok + "'");
  Coord c;
  auto r1 = std::from_chars(tok.data(), tok.data() + comma, c.row);
  auto r2 = std::from_chars(tok.data() + comma + 1, tok.data() + tok.size(), c.col);
  if (r1.ec != std::errc{} || r2.ec != std::errc{} || r2.ptr != tok.data() + tok.size()) {
    parse_fail("bad coordinate '" + tok + "'");
  }
  return c;
}

}  // namespace

std::string serialize_listing(const PathListing& l) {
  std::ostringstream out;
  out << "centerscan-paths 1\n";
  out << "grid " << l.grid_h << ' ' << l.grid_w << '\n';
  out << "region_size " << l.region_size << '\n';
  out << "strategy " << to_string(l.strategy) << '\n';
  out << "params " << fmt_double(l.params.alpha) << ' ' << fmt_double(l.params.beta) << ' '
      << fmt_double(l.params.gamma) << ' ' << fmt_double(l.params.epsilon) << ' '
      << fmt_double(l.params.lambda_decay) << '\n';
  out << "regions " << l.regions.size() << '\n';
  for (std::size_t k = 0; k < l.regions.size(); ++k) {
    const auto& r = l.regions[k];
    out << "region " << r.row0 << ' ' << r.col0 << ' ' << r.rows << ' ' << r.cols << " paths " << l.paths[k].size()
        << '\n';
    for (const auto& p : l.paths[k]) {
      out << "path";
      for (auto c : p.order) out << ' ' << c.row << ',' << c.col;
      out << '\n';
    }
  }
  out << "end\n";
  return out.str();
}

std::string serialize_paths(const RegionPartition& part, ScanStrategy strategy, const PriorityParams& params) {
  return serialize_listing(build_listing(part, strategy, params));
}

PathListing parse_paths(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string raw;
  auto next_line = [&]() -> std::istringstream {
    if (!std::getline(in, raw)) parse_fail("unexpected end of input");
    return std::istringstream(raw);
  };
  PathListing l;
  {
    auto line = next_line();
    expect_word(line, "centerscan-paths");
    int version = 0;
    if (!(line >> version) || version != 1) parse_fail("unsupported version");
  }
  {
    auto line = next_line();
    expect_word(line, "grid");
    if (!(line >> l.grid_h >> l.grid_w)) parse_fail("bad grid line");
  }
  {
    auto line = next_line();
    expect_word(line, "region_size");
    if (!(line >> l.region_size)) parse_fail("bad region_size line");
  }
  {
    auto line = next_line();
    expect_word(line, "strategy");
    std::string s;
    line >> s;
    l.strategy = parse_strategy(s);
  }
  {
    auto line = next_line();
    expect_word(line, "params");
    std::array<std::string, 5> tok;
    for (auto& t : tok) {
      if (!(line >> t)) parse_fail("bad params line");
    }
    l.params = {std::stod(tok[0]), std::stod(tok[1]), std::stod(tok[2]), std::stod(tok[3]), std::stod(tok[4])};
  }
  std::size_t count = 0;
  {
    auto line = next_line();
    expect_word(line, "regions");
    if (!(line >> count)) parse_fail("bad regions line");
  }
  for (std::size_t k = 0; k < count; ++k) {
    auto line = next_line();
    expect_word(line, "region");
    Region r;
    std::size_t npaths = 0;
    if (!(line >> r.row0 >> r.col0 >> r.rows >> r.cols)) parse_fail("bad region line");
    expect_word(line, "paths");
    if (!(line >> npaths)) parse_fail("bad region line");
    l.regions.push_back(r);
    std::vector<ScanPath> paths;
    for (std::size_t j = 0; j < npaths; ++j) {
      auto pl = next_line();
      expect_word(pl, "path");
      ScanPath p{{}, l.strategy};
      std::string tok;
      while (pl >> tok) p.order.push_back(parse_coord(tok));
      paths.push_back(std::move(p));
    }
    l.paths.push_back(std::move(paths));
  }
  auto line = next_line();
  expect_word(line, "end");
  return l;
}

std::string render_paths_svg(const PathListing& l, int cell_px) {
  static constexpr std::array<const char*, 4> kColors{"#d62728", "#1f77b4", "#2ca02c", "#9467bd"};
  const int w = l.grid_w * cell_px, h = l.grid_h * cell_px;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w + 2 << "\" height=\"" << h + 2
      << "\" viewBox=\"-1 -1 " << w + 2 << ' ' << h + 2 << "\">\n";
  out << "<defs><marker id=\"head\" markerWidth=\"6\" markerHeight=\"6\" refX=\"5\" refY=\"3\" orient=\"auto\">"
         "<path d=\"M0,0 L6,3 L0,6 z\" fill=\"context-stroke\"/></marker></defs>\n";
  for (int r = 0; r < l.grid_h; ++r)
    for (int c = 0; c < l.grid_w; ++c)
      out << "<rect x=\"" << c * cell_px << "\" y=\"" << r * cell_px << "\" width=\"" << cell_px << "\" height=\""
          << cell_px << "\" fill=\"none\" stroke=\"#ccc\"/>\n";
  for (const auto& reg : l.regions)
    out << "<rect x=\"" << reg.col0 * cell_px << "\" y=\"" << reg.row0 * cell_px << "\" width=\""
        << reg.cols * cell_px << "\" height=\"" << reg.rows * cell_px
        << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"2\"/>\n";
  auto center = [&](Coord p) { return std::pair{p.col * cell_px + cell_px / 2, p.row * cell_px + cell_px / 2}; };
  for (const auto& paths : l.paths) {
    for (std::size_t j = 0; j < paths.size(); ++j) {
      const auto& order = paths[j].order;
      const int shift = static_cast<int>(j) * 3;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        auto [x1, y1] = center(order[i]);
        auto [x2, y2] = center(order[i + 1]);
        out << "<line x1=\"" << x1 + shift << "\" y1=\"" << y1 + shift << "\" x2=\"" << x2 + shift << "\" y2=\""
            << y2 + shift << "\" stroke=\"" << kColors[j % kColors.size()]
            << "\" stroke-width=\"1.5\" marker-end=\"url(#head)\"/>\n";
      }
      if (j == 0) {
        for (std::size_t i = 0; i < order.size(); ++i) {
          auto [x, y] = center(order[i]);
          out << "<text x=\"" << x - cell_px / 3 << "\" y=\"" << y - cell_px / 5
              << "\" font-size=\"10\" font-family=\"monospace\">" << i + 1 << "</text>\n";
        }
      }
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace centerscan

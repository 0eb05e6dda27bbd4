// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace centerscan {

struct Coord {
  int row = 0;
  int col = 0;
  auto operator<=>(const Coord&) const = default;
};

/// Weights of the center/axis priority score. All must be strictly positive.
struct PriorityParams {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 0.5;
  double epsilon = 0.5;  // keeps the center distance term finite
  double lambda_decay = 0.5;

  void validate() const;
  bool operator==(const PriorityParams&) const = default;
};

/// Axis-aligned rectangle of grid cells [row0, row0+rows) x [col0, col0+cols).
struct Region {
  int row0 = 0, col0 = 0, rows = 0, cols = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  bool contains(Coord p) const { return p.row >= row0 && p.row < row0 + rows && p.col >= col0 && p.col < col0 + cols; }
  /// Member cells in row-major order.
  std::vector<Coord> cells() const;
  bool operator==(const Region&) const = default;
};

struct RegionPartition {
  int grid_h = 0, grid_w = 0, region_size = 0;
  std::vector<Region> regions;  // row-major region order
};

/// Tiles the grid with region_size x region_size blocks; the last row/column of
/// blocks is ragged when the extent is not a multiple. region_size in {1,2,3}.
RegionPartition partition(int grid_h, int grid_w, int region_size);

enum class ScanStrategy { CenterPriority, Raster, Snake, Bidirectional, CrossScan };

std::string_view to_string(ScanStrategy s);
ScanStrategy parse_strategy(std::string_view name);

struct ScanPath {
  std::vector<Coord> order;
  ScanStrategy strategy = ScanStrategy::Raster;
  bool operator==(const ScanPath&) const = default;
};

/// Centroid of the region's member cells.
void region_centroid(const Region& region, double& row, double& col);
/// Member cell closest to the centroid, first in row-major order on ties.
Coord center_cell(const Region& region);

/// alpha * (dist(p, centroid) + eps)^-beta + gamma * [p shares a row or column with the center cell].
double priority(Coord p, const Region& region, const PriorityParams& params);

/// Paths for one region. CenterPriority, Raster and Snake yield one path,
/// Bidirectional two (raster, reversed raster), CrossScan four (row-major,
/// column-major and both reversed). CenterPriority sorts by descending
/// priority with row-major tie-breaking.
std::vector<ScanPath> scan_order(const Region& region, ScanStrategy strategy, const PriorityParams& params = {});

bool is_permutation_of(const ScanPath& path, const Region& region);

/// Parsed form of a serialized listing.
struct PathListing {
  int grid_h = 0, grid_w = 0, region_size = 0;
  ScanStrategy strategy = ScanStrategy::Raster;
  PriorityParams params;
  std::vector<Region> regions;
  std::vector<std::vector<ScanPath>> paths;  // per region
  bool operator==(const PathListing&) const = default;
};

PathListing build_listing(const RegionPartition& part, ScanStrategy strategy, const PriorityParams& params);
std::string serialize_paths(const RegionPartition& part, ScanStrategy strategy, const PriorityParams& params);
std::string serialize_listing(const PathListing& listing);
PathListing parse_paths(std::string_view text);

/// Arrow diagram of every path in the listing.
std::string render_paths_svg(const PathListing& listing, int cell_px = 48);

}  // namespace centerscan

// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "survscan/point_cloud.hpp"

namespace survscan::raster {

/// Missing-data sentinel; grid values are either finite or exactly this.
inline constexpr double kNoData = -9999.0;

/// Row-major single-band grid. Row 0 is the southernmost row: cell (r, c)
/// covers [x0 + c*cell, x0 + (c+1)*cell) x [y0 + r*cell, y0 + (r+1)*cell).
struct RasterGrid {
  double x0 = 0.0;  // lower-left corner
  double y0 = 0.0;
  double cell = 1.0;
  std::size_t ncols = 0;
  std::size_t nrows = 0;
  std::vector<double> values;

  double at(std::size_t row, std::size_t col) const {
    return values[row * ncols + col];
  }
  double& at(std::size_t row, std::size_t col) {
    return values[row * ncols + col];
  }
  bool filled(std::size_t row, std::size_t col) const {
    return at(row, col) != kNoData;
  }
  double center_x(std::size_t col) const { return x0 + (col + 0.5) * cell; }
  double center_y(std::size_t row) const { return y0 + (row + 0.5) * cell; }
  std::size_t count_filled() const;
};

enum class Aggregator { kMean, kMax, kMin };

/// Bins cloud points into a grid snapped to the cloud's xy bounding box
/// (origin at the min corner, extent rounded up to whole cells) and
/// aggregates z per cell; empty cells hold kNoData. A point lands in
/// col = floor((x - x0) / cell) clamped to [0, ncols), same for rows.
/// Pre: cloud non-empty, cell > 0.
RasterGrid rasterize_dsm(const PointCloud& cloud, double cell = 0.05,
                         Aggregator aggregator = Aggregator::kMean);

struct FillResult {
  RasterGrid grid;
  std::size_t interpolated_cells = 0;
};

/// Fills nodata cells by inverse-distance-squared weighting over donor cell
/// centers taken from the ORIGINAL grid. Donors are gathered ring by ring
/// (Chebyshev rings around the hole) and the search stops at the first ring
/// that brings the total to >= 3 donors, or at max_ring; whatever was found
/// fills the cell, and a cell with no donors in range stays nodata. Donors
/// never include values filled in by the same pass, so the result does not
/// depend on traversal order; once a pass reaches every hole (max_ring at
/// least the gap radius), a second pass changes nothing. Pre: max_ring >= 1.
FillResult fill_holes(const RasterGrid& grid, int max_ring = 8);

struct VolumeResult {
  double volume = 0.0;  // m^3
  double area = 0.0;    // m^2, footprint of cells strictly above base
  double base = 0.0;
  std::size_t cells_above = 0;
  std::size_t filled_cells = 0;
};

/// volume = sum over filled cells of max(value - base, 0) * cell^2;
/// area counts cells with value > base. base defaults to the lowest filled
/// value. Accumulation is compensated and runs in fixed row-major order, so
/// the result is independent of threading. Pre: at least one filled cell.
VolumeResult volume_area(const RasterGrid& grid,
                         std::optional<double> base = std::nullopt);

/// ESRI ASCII grid. Header keys in order: ncols, nrows, xllcorner, yllcorner,
/// cellsize, NODATA_value; data rows follow north to south. Values are
/// written with 6 decimals (round-trip within 1e-6), nodata as -9999.
void write_asc(const RasterGrid& grid, const std::filesystem::path& path);

/// Accepts any NODATA_value and normalizes it to kNoData. A malformed header
/// raises Error naming the offending key.
RasterGrid read_asc(const std::filesystem::path& path);

}  // namespace survscan::raster

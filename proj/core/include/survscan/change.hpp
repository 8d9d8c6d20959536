// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "survscan/point_cloud.hpp"
#include "survscan/raster.hpp"

namespace survscan::change {

/// Per-cell vertical difference between two epochs (positive = B above A).
struct ChangeMap {
  raster::RasterGrid grid;
  std::string epoch_a;
  std::string epoch_b;
};

/// Rasterizes both clouds with the mean aggregator onto one grid covering the
/// intersection of their xy bounds and subtracts. Cells missing either epoch
/// are nodata. Pre: both clouds in the same frame, overlapping xy extents,
/// cell > 0. Swapping the epochs exactly negates every valid cell.
ChangeMap vertical_distance(const PointCloud& a, const PointCloud& b,
                            double cell = 0.05);

struct Band {
  double lo = 0.0;  // inclusive
  double hi = 0.0;  // exclusive
  std::size_t count = 0;
};

struct ChangeSummary {
  double mean = 0.0;
  double rms = 0.0;
  double max_abs = 0.0;
  double tolerance = 0.0;
  double fraction_within = 0.0;  // |dz| <= tolerance
  std::size_t valid_cells = 0;
  std::vector<Band> bands;
};

/// band_edges must be strictly increasing; each adjacent pair forms one
/// [lo, hi) band (values outside the outer edges are not banded).
/// Pre: at least one valid cell.
ChangeSummary summarize(const ChangeMap& map, double tolerance,
                        std::span<const double> band_edges = {});

/// Keys: mean_m, rms_m, max_abs_m, fraction_within, tolerance_m, valid_cells,
/// bands (list of {min_m, max_m, count}).
void write_summary_json(const ChangeSummary& summary,
                        const std::filesystem::path& path);

/// Binary PPM (P6) heatmap, one pixel per cell, top row = highest y.
/// The diverging blue -> white -> red ramp maps [-range, +range] with white
/// exactly at zero:
///   t = clamp(dz / range, -1, 1)
///   t <= 0: (r, g, b) = (round(255*(1+t)), round(255*(1+t)), 255)
///   t >  0: (r, g, b) = (255, round(255*(1-t)), round(255*(1-t)))
/// nodata renders black. A sidecar "<image path>.legend.txt" records range_m,
/// ramp, and nodata_color. Pre: range > 0.
void export_heatmap(const ChangeMap& map, const std::filesystem::path& path,
                    double range = 0.02);

}  // namespace survscan::change

// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#include "survscan/change.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>
#include <string>

#include "survscan/error.hpp"

namespace survscan::change {

namespace {

struct Bounds {
  double minx = 0, miny = 0, maxx = 0, maxy = 0;
};

Bounds xy_bounds(const PointCloud& cloud) {
  Bounds b{cloud.positions[0].x(), cloud.positions[0].y(),
           cloud.positions[0].x(), cloud.positions[0].y()};
  for (const Vec3& p : cloud.positions) {
    b.minx = std::min(b.minx, p.x());
    b.maxx = std::max(b.maxx, p.x());
    b.miny = std::min(b.miny, p.y());
    b.maxy = std::max(b.maxy, p.y());
  }
  return b;
}

// Mean-z binning onto a fixed grid; points outside the grid are skipped.
std::vector<double> bin_mean(const PointCloud& cloud,
                             const raster::RasterGrid& frame) {
  std::vector<double> sums(frame.ncols * frame.nrows, 0.0);
  std::vector<std::size_t> counts(sums.size(), 0);
  for (const Vec3& p : cloud.positions) {
    const double fx = std::floor((p.x() - frame.x0) / frame.cell);
    const double fy = std::floor((p.y() - frame.y0) / frame.cell);
    if (fx < 0 || fy < 0 || fx >= static_cast<double>(frame.ncols) ||
        fy >= static_cast<double>(frame.nrows))
      continue;
    const std::size_t idx = static_cast<std::size_t>(fy) * frame.ncols +
                            static_cast<std::size_t>(fx);
    sums[idx] += p.z();
    ++counts[idx];
  }
  for (std::size_t i = 0; i < sums.size(); ++i)
    sums[i] = counts[i] > 0 ? sums[i] / static_cast<double>(counts[i])
                            : raster::kNoData;
  return sums;
}

std::string epoch_label(const PointCloud& cloud) {
  if (cloud.epoch) return std::to_string(*cloud.epoch);
  return cloud.source;
}

}  // namespace

ChangeMap vertical_distance(const PointCloud& a, const PointCloud& b,
                            double cell) {
  if (!(cell > 0.0)) throw Error("vertical_distance: cell must be > 0");
  if (a.empty() || b.empty())
    throw Error("vertical_distance: both clouds must be non-empty");
  if (!(a.frame == b.frame))
    throw Error("vertical_distance: clouds are in different frames (" +
                a.frame.str() + " vs " + b.frame.str() + ")");

  const Bounds ba = xy_bounds(a), bb = xy_bounds(b);
  const double x0 = std::max(ba.minx, bb.minx);
  const double y0 = std::max(ba.miny, bb.miny);
  const double x1 = std::min(ba.maxx, bb.maxx);
  const double y1 = std::min(ba.maxy, bb.maxy);
  if (!(x0 < x1) || !(y0 < y1))
    throw Error("vertical_distance: no overlap between the xy extents");

  ChangeMap map;
  map.epoch_a = epoch_label(a);
  map.epoch_b = epoch_label(b);
  map.grid.x0 = x0;
  map.grid.y0 = y0;
  map.grid.cell = cell;
  map.grid.ncols = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil((x1 - x0) / cell)));
  map.grid.nrows = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil((y1 - y0) / cell)));

  const std::vector<double> za = bin_mean(a, map.grid);
  const std::vector<double> zb = bin_mean(b, map.grid);
  map.grid.values.assign(za.size(), raster::kNoData);
  for (std::size_t i = 0; i < za.size(); ++i)
    if (za[i] != raster::kNoData && zb[i] != raster::kNoData)
      map.grid.values[i] = zb[i] - za[i];
  return map;
}

ChangeSummary summarize(const ChangeMap& map, double tolerance,
                        std::span<const double> band_edges) {
  for (std::size_t i = 1; i < band_edges.size(); ++i)
    if (!(band_edges[i - 1] < band_edges[i]))
      throw Error("summarize: band edges must be strictly increasing");

  ChangeSummary summary;
  summary.tolerance = tolerance;
  for (std::size_t i = 0; i + 1 < band_edges.size(); ++i)
    summary.bands.push_back(Band{band_edges[i], band_edges[i + 1], 0});

  double sum = 0.0, sumsq = 0.0;
  std::size_t within = 0;
  for (double dz : map.grid.values) {
    if (dz == raster::kNoData) continue;
    ++summary.valid_cells;
    sum += dz;
    sumsq += dz * dz;
    summary.max_abs = std::max(summary.max_abs, std::fabs(dz));
    if (std::fabs(dz) <= tolerance) ++within;
    if (!band_edges.empty()) {
      const auto it =
          std::upper_bound(band_edges.begin(), band_edges.end(), dz);
      const auto idx = static_cast<std::size_t>(it - band_edges.begin());
      if (idx >= 1 && idx < band_edges.size())
        ++summary.bands[idx - 1].count;
    }
  }
  if (summary.valid_cells == 0)
    throw Error("summarize: change map has no valid cells");
  const auto n = static_cast<double>(summary.valid_cells);
  summary.mean = sum / n;
  summary.rms = std::sqrt(sumsq / n);
  summary.fraction_within = static_cast<double>(within) / n;
  return summary;
}

void write_summary_json(const ChangeSummary& summary,
                        const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["mean_m"] = summary.mean;
  doc["rms_m"] = summary.rms;
  doc["max_abs_m"] = summary.max_abs;
  doc["fraction_within"] = summary.fraction_within;
  doc["tolerance_m"] = summary.tolerance;
  doc["valid_cells"] = summary.valid_cells;
  doc["bands"] = nlohmann::json::array();
  for (const Band& band : summary.bands)
    doc["bands"].push_back(nlohmann::json{
        {"min_m", band.lo}, {"max_m", band.hi}, {"count", band.count}});

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  if (!out.good()) throw Error("failed while writing " + path.string());
}

void export_heatmap(const ChangeMap& map, const std::filesystem::path& path,
                    double range) {
  if (!(range > 0.0)) throw Error("export_heatmap: range must be > 0");
  const raster::RasterGrid& grid = map.grid;

  std::string body;
  body.reserve(grid.ncols * grid.nrows * 3 + 32);
  {
    char header[64];
    std::snprintf(header, sizeof header, "P6\n%zu %zu\n255\n", grid.ncols,
                  grid.nrows);
    body += header;
  }
  for (std::size_t rr = grid.nrows; rr-- > 0;) {  // top row = highest y
    for (std::size_t c = 0; c < grid.ncols; ++c) {
      const double dz = grid.at(rr, c);
      unsigned char px[3] = {0, 0, 0};  // nodata stays black
      if (dz != raster::kNoData) {
        const double t = std::clamp(dz / range, -1.0, 1.0);
        if (t <= 0.0) {
          const auto v =
              static_cast<unsigned char>(std::lround(255.0 * (1.0 + t)));
          px[0] = v;
          px[1] = v;
          px[2] = 255;
        } else {
          const auto v =
              static_cast<unsigned char>(std::lround(255.0 * (1.0 - t)));
          px[0] = 255;
          px[1] = v;
          px[2] = v;
        }
      }
      body.append(reinterpret_cast<const char*>(px), 3);
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out.good()) throw Error("failed while writing " + path.string());

  const std::filesystem::path legend_path = path.string() + ".legend.txt";
  std::ofstream legend(legend_path, std::ios::binary);
  if (!legend)
    throw Error("cannot open " + legend_path.string() + " for writing");
  char buf[64];
  std::snprintf(buf, sizeof buf, "range_m %.6f\n", range);
  legend << buf << "ramp blue-white-red\n"
         << "nodata_color 0 0 0\n";
  if (!legend.good())
    throw Error("failed while writing " + legend_path.string());
}

}  // namespace survscan::change

// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#include "survscan/raster.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>

#include "survscan/error.hpp"
#include "survscan/parallel.hpp"

namespace survscan::raster {

std::size_t RasterGrid::count_filled() const {
  std::size_t n = 0;
  for (double v : values)
    if (v != kNoData) ++n;
  return n;
}

RasterGrid rasterize_dsm(const PointCloud& cloud, double cell,
                         Aggregator aggregator) {
  if (cloud.empty()) throw Error("rasterize_dsm: cloud is empty");
  if (!(cell > 0.0)) throw Error("rasterize_dsm: cell must be > 0");

  double minx = cloud.positions[0].x(), maxx = minx;
  double miny = cloud.positions[0].y(), maxy = miny;
  for (const Vec3& p : cloud.positions) {
    minx = std::min(minx, p.x());
    maxx = std::max(maxx, p.x());
    miny = std::min(miny, p.y());
    maxy = std::max(maxy, p.y());
  }

  RasterGrid grid;
  grid.x0 = minx;
  grid.y0 = miny;
  grid.cell = cell;
  grid.ncols = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil((maxx - minx) / cell)));
  grid.nrows = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil((maxy - miny) / cell)));
  const std::size_t ncells = grid.ncols * grid.nrows;
  grid.values.assign(ncells, kNoData);

  std::vector<std::size_t> counts;
  if (aggregator == Aggregator::kMean) counts.assign(ncells, 0);

  // Sequential binning in input order keeps mean accumulation deterministic.
  for (const Vec3& p : cloud.positions) {
    const auto col = std::min(
        grid.ncols - 1,
        static_cast<std::size_t>(
            std::max(0.0, std::floor((p.x() - grid.x0) / cell))));
    const auto row = std::min(
        grid.nrows - 1,
        static_cast<std::size_t>(
            std::max(0.0, std::floor((p.y() - grid.y0) / cell))));
    double& v = grid.at(row, col);
    switch (aggregator) {
      case Aggregator::kMean:
        if (counts[row * grid.ncols + col]++ == 0)
          v = p.z();
        else
          v += p.z();
        break;
      case Aggregator::kMax:
        v = (v == kNoData) ? p.z() : std::max(v, p.z());
        break;
      case Aggregator::kMin:
        v = (v == kNoData) ? p.z() : std::min(v, p.z());
        break;
    }
  }
  if (aggregator == Aggregator::kMean) {
    for (std::size_t i = 0; i < ncells; ++i)
      if (counts[i] > 0) grid.values[i] /= static_cast<double>(counts[i]);
  }
  return grid;
}

FillResult fill_holes(const RasterGrid& grid, int max_ring) {
  if (max_ring < 1) throw Error("fill_holes: max_ring must be >= 1");

  FillResult result;
  result.grid = grid;
  const auto nrows = static_cast<std::ptrdiff_t>(grid.nrows);
  const auto ncols = static_cast<std::ptrdiff_t>(grid.ncols);
  std::vector<std::size_t> filled_per_row(grid.nrows, 0);

  parallel_for(grid.nrows, [&](std::size_t row) {
    const auto r = static_cast<std::ptrdiff_t>(row);
    for (std::ptrdiff_t c = 0; c < ncols; ++c) {
      if (grid.at(row, static_cast<std::size_t>(c)) != kNoData) continue;
      double wsum = 0.0, wvsum = 0.0;
      int donors = 0;
      for (int ring = 1; ring <= max_ring && donors < 3; ++ring) {
        for (std::ptrdiff_t dr = -ring; dr <= ring; ++dr) {
          for (std::ptrdiff_t dc = -ring; dc <= ring; ++dc) {
            if (std::max(std::llabs(dr), std::llabs(dc)) != ring) continue;
            const std::ptrdiff_t rr = r + dr, cc = c + dc;
            if (rr < 0 || rr >= nrows || cc < 0 || cc >= ncols) continue;
            const double v = grid.at(static_cast<std::size_t>(rr),
                                     static_cast<std::size_t>(cc));
            if (v == kNoData) continue;  // donors come from the input grid
            const double w =
                1.0 / static_cast<double>(dr * dr + dc * dc);
            wsum += w;
            wvsum += w * v;
            ++donors;
          }
        }
      }
      if (donors > 0) {
        result.grid.at(row, static_cast<std::size_t>(c)) = wvsum / wsum;
        ++filled_per_row[row];
      }
    }
  });

  for (std::size_t n : filled_per_row) result.interpolated_cells += n;
  return result;
}

VolumeResult volume_area(const RasterGrid& grid, std::optional<double> base) {
  VolumeResult result;
  double lowest = std::numeric_limits<double>::infinity();
  for (double v : grid.values) {
    if (v == kNoData) continue;
    ++result.filled_cells;
    lowest = std::min(lowest, v);
  }
  if (result.filled_cells == 0)
    throw Error("volume_area: grid has no filled cells");
  result.base = base.value_or(lowest);

  double sum = 0.0, comp = 0.0;  // Kahan-compensated, fixed row-major order
  for (double v : grid.values) {
    if (v == kNoData) continue;
    const double dz = v - result.base;
    if (dz <= 0.0) continue;
    ++result.cells_above;
    const double y = dz - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  result.volume = sum * grid.cell * grid.cell;
  result.area = static_cast<double>(result.cells_above) * grid.cell * grid.cell;
  return result;
}

void write_asc(const RasterGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  char buf[64];
  std::snprintf(buf, sizeof buf, "ncols %zu\n", grid.ncols);
  out << buf;
  std::snprintf(buf, sizeof buf, "nrows %zu\n", grid.nrows);
  out << buf;
  std::snprintf(buf, sizeof buf, "xllcorner %.6f\n", grid.x0);
  out << buf;
  std::snprintf(buf, sizeof buf, "yllcorner %.6f\n", grid.y0);
  out << buf;
  std::snprintf(buf, sizeof buf, "cellsize %.6f\n", grid.cell);
  out << buf;
  out << "NODATA_value -9999\n";

  for (std::size_t rr = grid.nrows; rr-- > 0;) {  // north to south
    for (std::size_t c = 0; c < grid.ncols; ++c) {
      const double v = grid.at(rr, c);
      if (v == kNoData)
        std::snprintf(buf, sizeof buf, "%s-9999", c == 0 ? "" : " ");
      else
        std::snprintf(buf, sizeof buf, "%s%.6f", c == 0 ? "" : " ", v);
      out << buf;
    }
    out << '\n';
  }
  if (!out.good()) throw Error("failed while writing " + path.string());
}

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error("failed while reading " + path.string());
  return std::move(buf).str();
}

struct TokenStream {
  std::string_view text;
  std::size_t pos = 0;

  std::string_view next() {
    while (pos < text.size() &&
           std::isspace(static_cast<unsigned char>(text[pos])))
      ++pos;
    const std::size_t start = pos;
    while (pos < text.size() &&
           !std::isspace(static_cast<unsigned char>(text[pos])))
      ++pos;
    return text.substr(start, pos - start);
  }
};

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  return true;
}

double header_value(TokenStream& tokens, std::string_view key,
                    const std::filesystem::path& path) {
  const std::string_view name = tokens.next();
  if (!iequals(name, key)) {
    std::ostringstream os;
    os << path.string() << ": expected header key \"" << key << "\", got \""
       << name << "\"";
    throw Error(os.str());
  }
  const std::string_view value = tokens.next();
  double out = 0.0;
  auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() ||
      !std::isfinite(out)) {
    std::ostringstream os;
    os << path.string() << ": invalid value \"" << value << "\" for header "
       << "key \"" << key << "\"";
    throw Error(os.str());
  }
  return out;
}

}  // namespace

RasterGrid read_asc(const std::filesystem::path& path) {
  const std::string text = slurp(path);
  TokenStream tokens{text};

  const double ncols_v = header_value(tokens, "ncols", path);
  const double nrows_v = header_value(tokens, "nrows", path);
  const double xll = header_value(tokens, "xllcorner", path);
  const double yll = header_value(tokens, "yllcorner", path);
  const double cellsize = header_value(tokens, "cellsize", path);
  const double nodata = header_value(tokens, "NODATA_value", path);

  if (ncols_v < 1 || nrows_v < 1 || ncols_v != std::floor(ncols_v) ||
      nrows_v != std::floor(nrows_v))
    throw Error(path.string() + ": ncols/nrows must be positive integers");
  if (!(cellsize > 0.0)) throw Error(path.string() + ": cellsize must be > 0");

  RasterGrid grid;
  grid.ncols = static_cast<std::size_t>(ncols_v);
  grid.nrows = static_cast<std::size_t>(nrows_v);
  grid.x0 = xll;
  grid.y0 = yll;
  grid.cell = cellsize;
  grid.values.assign(grid.ncols * grid.nrows, kNoData);

  for (std::size_t rr = grid.nrows; rr-- > 0;) {
    for (std::size_t c = 0; c < grid.ncols; ++c) {
      const std::string_view token = tokens.next();
      if (token.empty()) {
        std::ostringstream os;
        os << path.string() << ": data ends after "
           << (grid.nrows - 1 - rr) * grid.ncols + c << " of "
           << grid.ncols * grid.nrows << " values";
        throw Error(os.str());
      }
      double v = 0.0;
      auto [ptr, ec] =
          std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec != std::errc() || ptr != token.data() + token.size()) {
        std::ostringstream os;
        os << path.string() << ": invalid data value \"" << token << "\"";
        throw Error(os.str());
      }
      grid.at(rr, c) = (v == nodata) ? kNoData : v;
    }
  }
  if (!tokens.next().empty())
    throw Error(path.string() + ": more data values than ncols * nrows");
  return grid;
}

}  // namespace survscan::raster

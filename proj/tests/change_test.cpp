// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "survscan/change.hpp"
#include "survscan/error.hpp"
#include "survscan/raster.hpp"
#include "test_helpers.hpp"

using survscan::Error;
using survscan::FrameTag;
using survscan::PointCloud;
using survscan::Vec3;
using survscan::change::ChangeMap;
using survscan::change::ChangeSummary;
using survscan::raster::kNoData;
using survscan::raster::RasterGrid;

namespace {

// Reference pipeline: intersection-of-extents grid, mean binning per epoch
// (skipping points that fall outside the grid), cellwise subtraction.
RasterGrid reference_diff(const PointCloud& a, const PointCloud& b,
                          double cell) {
  auto bounds = [](const PointCloud& c) {
    double minx = c.positions[0].x(), maxx = minx;
    double miny = c.positions[0].y(), maxy = miny;
    for (const Vec3& p : c.positions) {
      minx = std::min(minx, p.x());
      maxx = std::max(maxx, p.x());
      miny = std::min(miny, p.y());
      maxy = std::max(maxy, p.y());
    }
    return std::array<double, 4>{minx, miny, maxx, maxy};
  };
  const auto ba = bounds(a), bb = bounds(b);
  RasterGrid g;
  g.x0 = std::max(ba[0], bb[0]);
  g.y0 = std::max(ba[1], bb[1]);
  g.cell = cell;
  const double x1 = std::min(ba[2], bb[2]);
  const double y1 = std::min(ba[3], bb[3]);
  g.ncols = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil((x1 - g.x0) / cell)));
  g.nrows = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil((y1 - g.y0) / cell)));

  auto mean_bin = [&g](const PointCloud& c) {
    std::vector<double> sums(g.ncols * g.nrows, 0.0);
    std::vector<std::size_t> counts(sums.size(), 0);
    for (const Vec3& p : c.positions) {
      const double fx = std::floor((p.x() - g.x0) / g.cell);
      const double fy = std::floor((p.y() - g.y0) / g.cell);
      if (fx < 0 || fy < 0 || fx >= static_cast<double>(g.ncols) ||
          fy >= static_cast<double>(g.nrows))
        continue;
      const std::size_t idx = static_cast<std::size_t>(fy) * g.ncols +
                              static_cast<std::size_t>(fx);
      sums[idx] += p.z();
      ++counts[idx];
    }
    for (std::size_t i = 0; i < sums.size(); ++i)
      sums[i] = counts[i] > 0 ? sums[i] / static_cast<double>(counts[i])
                              : kNoData;
    return sums;
  };
  const std::vector<double> za = mean_bin(a);
  const std::vector<double> zb = mean_bin(b);
  g.values.assign(za.size(), kNoData);
  for (std::size_t i = 0; i < za.size(); ++i)
    if (za[i] != kNoData && zb[i] != kNoData) g.values[i] = zb[i] - za[i];
  return g;
}

ChangeMap map_of(std::vector<double> values, std::size_t ncols,
                 std::size_t nrows, double cell = 0.1) {
  ChangeMap m;
  m.grid.ncols = ncols;
  m.grid.nrows = nrows;
  m.grid.cell = cell;
  m.grid.values = std::move(values);
  m.epoch_a = "a";
  m.epoch_b = "b";
  return m;
}

std::string slurp_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("vertical difference matches the reference pipeline bitwise") {
  std::mt19937 g(801);
  for (int rep = 0; rep < 20; ++rep) {
    PointCloud a = testutil::random_cloud(g, 500, 6.0);
    PointCloud b = testutil::random_cloud(g, 500, 6.0);
    const double cell = (rep % 2 == 0) ? 0.4 : 0.9;
    const ChangeMap got = survscan::change::vertical_distance(a, b, cell);
    const RasterGrid want = reference_diff(a, b, cell);
    CHECK(got.grid.x0 == want.x0);
    CHECK(got.grid.y0 == want.y0);
    CHECK(got.grid.ncols == want.ncols);
    CHECK(got.grid.nrows == want.nrows);
    CHECK(got.grid.values == want.values);
  }
}

TEST_CASE("vertical difference covers only the shared extent") {
  // a spans [0,4]x[0,2], b spans [1,6]x[-1,3]; the shared box is
  // [1,4]x[0,2], so with 0.5 m cells the grid is 6x4 anchored at (1, 0).
  PointCloud a = testutil::cloud_of({Vec3(0, 0, 1), Vec3(4, 2, 1),
                                     Vec3(1.25, 0.25, 2), Vec3(3.1, 1.1, 4)});
  PointCloud b = testutil::cloud_of({Vec3(1, -1, 5), Vec3(6, 3, 5),
                                     Vec3(3.1, 1.1, 7)});
  const ChangeMap m = survscan::change::vertical_distance(a, b, 0.5);
  CHECK(m.grid.x0 == 1.0);
  CHECK(m.grid.y0 == 0.0);
  CHECK(m.grid.ncols == 6);
  CHECK(m.grid.nrows == 4);
  // Only the cell populated in both epochs gets a difference.
  CHECK(m.grid.at(2, 4) == 3.0);  // (3.1, 1.1): 7 - 4
  // a alone fills (0.25 band) -> nodata because b has nothing there.
  CHECK(m.grid.at(0, 0) == kNoData);
  CHECK(m.grid.count_filled() == 1);
}

TEST_CASE("vertical difference labels epochs from timestamps or sources") {
  PointCloud a = testutil::cloud_of({Vec3(0, 0, 0), Vec3(1, 1, 0)});
  PointCloud b = a;
  a.epoch = 1719878400;
  b.epoch.reset();
  b.source = "later_scan.xyz";
  const ChangeMap m = survscan::change::vertical_distance(a, b, 0.5);
  CHECK(m.epoch_a == "1719878400");
  CHECK(m.epoch_b == "later_scan.xyz");
}

TEST_CASE("swapping the epochs exactly negates every valid cell") {
  std::mt19937 g(802);
  for (int rep = 0; rep < 10; ++rep) {
    PointCloud a = testutil::random_cloud(g, 400, 5.0);
    PointCloud b = testutil::random_cloud(g, 400, 5.0);
    const ChangeMap ab = survscan::change::vertical_distance(a, b, 0.5);
    const ChangeMap ba = survscan::change::vertical_distance(b, a, 0.5);
    REQUIRE(ab.grid.values.size() == ba.grid.values.size());
    for (std::size_t i = 0; i < ab.grid.values.size(); ++i) {
      if (ab.grid.values[i] == kNoData) {
        CHECK(ba.grid.values[i] == kNoData);
      } else {
        CHECK(ba.grid.values[i] == -ab.grid.values[i]);
      }
    }
  }
}

TEST_CASE("translating both epochs together leaves the differences alone") {
  SUBCASE("grid-aligned shift reproduces every cell bitwise") {
    // Cell centers on a 2^-8 lattice with heights on a 2^-10 lattice keep
    // every intermediate quantity exactly representable, so a shift by
    // dyadic offsets (4.5, -2.25, 3) must not change a single bit.
    const double cell = 1.0 / 256.0;
    PointCloud a, b;
    for (int i = 0; i < 16; ++i) {
      for (int j = 0; j < 16; ++j) {
        const double x = (i + 0.5) * cell;
        const double y = (j + 0.5) * cell;
        a.positions.emplace_back(x, y,
                                 1.0 + ((i * 17 + j * 5) % 512) / 1024.0);
        b.positions.emplace_back(x, y,
                                 1.0 + ((i * 11 + j * 3) % 512) / 1024.0);
      }
    }
    const Vec3 t(4.5, -2.25, 3.0);
    PointCloud as = a, bs = b;
    for (Vec3& p : as.positions) p += t;
    for (Vec3& p : bs.positions) p += t;

    const ChangeMap base = survscan::change::vertical_distance(a, b, cell);
    const ChangeMap moved = survscan::change::vertical_distance(as, bs, cell);
    CHECK(moved.grid.ncols == base.grid.ncols);
    CHECK(moved.grid.nrows == base.grid.nrows);
    CHECK(moved.grid.values == base.grid.values);
  }

  SUBCASE("arbitrary shift agrees to a picometre on interior points") {
    std::mt19937 g(803);
    const double cell = 0.25;
    PointCloud a, b;
    for (int i = 0; i < 12; ++i) {
      for (int j = 0; j < 12; ++j) {
        // Keep every point at least 0.1 cells away from cell edges so
        // rounding from the shift cannot move it across a boundary.
        const double u = testutil::uniform(g, 0.1, 0.9);
        const double v = testutil::uniform(g, 0.1, 0.9);
        const double x = (i + u) * cell;
        const double y = (j + v) * cell;
        a.positions.emplace_back(x, y, testutil::uniform(g, 0.0, 2.0));
        b.positions.emplace_back(x, y, testutil::uniform(g, 0.0, 2.0));
      }
    }
    const Vec3 t(7.312, -4.981, 2.77);
    PointCloud as = a, bs = b;
    for (Vec3& p : as.positions) p += t;
    for (Vec3& p : bs.positions) p += t;

    const ChangeMap base = survscan::change::vertical_distance(a, b, cell);
    const ChangeMap moved = survscan::change::vertical_distance(as, bs, cell);
    REQUIRE(moved.grid.values.size() == base.grid.values.size());
    for (std::size_t i = 0; i < base.grid.values.size(); ++i) {
      if (base.grid.values[i] == kNoData) {
        CHECK(moved.grid.values[i] == kNoData);
      } else {
        CHECK(std::abs(moved.grid.values[i] - base.grid.values[i]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("vertical difference rejects mismatched or disjoint inputs") {
  PointCloud a = testutil::cloud_of({Vec3(0, 0, 0), Vec3(1, 1, 0)});

  SUBCASE("different frames") {
    PointCloud b = a;
    b.frame = FrameTag::parse("georeferenced(EPSG:25832)");
    CHECK_THROWS_WITH_AS(
        survscan::change::vertical_distance(a, b),
        "vertical_distance: clouds are in different frames "
        "(local(unspecified) vs georeferenced(EPSG:25832))",
        Error);
  }

  SUBCASE("no xy overlap") {
    PointCloud b = testutil::cloud_of({Vec3(5, 5, 0), Vec3(6, 6, 0)});
    CHECK_THROWS_WITH_AS(survscan::change::vertical_distance(a, b),
                         "vertical_distance: no overlap between the xy extents",
                         Error);
  }

  SUBCASE("extents that only touch do not overlap") {
    PointCloud b = testutil::cloud_of({Vec3(1, 0, 0), Vec3(2, 1, 0)});
    CHECK_THROWS_WITH_AS(survscan::change::vertical_distance(a, b),
                         "vertical_distance: no overlap between the xy extents",
                         Error);
  }

  SUBCASE("empty input") {
    CHECK_THROWS_WITH_AS(survscan::change::vertical_distance(a, PointCloud{}),
                         "vertical_distance: both clouds must be non-empty",
                         Error);
  }

  SUBCASE("bad cell") {
    CHECK_THROWS_WITH_AS(survscan::change::vertical_distance(a, a, 0.0),
                         "vertical_distance: cell must be > 0", Error);
  }
}

TEST_CASE("summary statistics match a direct pass over the valid cells") {
  std::mt19937 g(804);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> values(60);
    for (double& v : values)
      v = testutil::uniform(g, 0.0, 1.0) < 0.3
              ? kNoData
              : testutil::uniform(g, -0.05, 0.05);
    const ChangeMap m = map_of(values, 10, 6);
    const double tolerance = testutil::uniform(g, 0.001, 0.03);
    const std::vector<double> edges = {-0.05, -0.01, 0.0, 0.01, 0.05};
    const ChangeSummary s =
        survscan::change::summarize(m, tolerance, edges);

    double sum = 0, sumsq = 0, max_abs = 0;
    std::size_t valid = 0, within = 0;
    std::vector<std::size_t> band_counts(edges.size() - 1, 0);
    for (double dz : values) {
      if (dz == kNoData) continue;
      ++valid;
      sum += dz;
      sumsq += dz * dz;
      max_abs = std::max(max_abs, std::fabs(dz));
      if (std::fabs(dz) <= tolerance) ++within;
      for (std::size_t bi = 0; bi + 1 < edges.size(); ++bi)
        if (edges[bi] <= dz && dz < edges[bi + 1]) ++band_counts[bi];
    }
    CHECK(s.valid_cells == valid);
    CHECK(s.mean == sum / static_cast<double>(valid));
    CHECK(s.rms == std::sqrt(sumsq / static_cast<double>(valid)));
    CHECK(s.max_abs == max_abs);
    CHECK(s.fraction_within ==
          static_cast<double>(within) / static_cast<double>(valid));
    REQUIRE(s.bands.size() == band_counts.size());
    for (std::size_t bi = 0; bi < band_counts.size(); ++bi) {
      CHECK(s.bands[bi].lo == edges[bi]);
      CHECK(s.bands[bi].hi == edges[bi + 1]);
      CHECK(s.bands[bi].count == band_counts[bi]);
    }
  }
}

TEST_CASE("summary bands are half-open intervals") {
  const ChangeMap m =
      map_of({0.003, -0.001, 0.007, 0.005, 0.01, -0.005, kNoData, kNoData},
             4, 2);
  const std::vector<double> edges = {-0.005, 0.0, 0.005, 0.01};
  const ChangeSummary s = survscan::change::summarize(m, 0.005, edges);
  CHECK(s.valid_cells == 6);
  REQUIRE(s.bands.size() == 3);
  CHECK(s.bands[0].count == 2);  // [-5mm, 0): -0.001 and the edge -0.005
  CHECK(s.bands[1].count == 1);  // [0, 5mm): only 0.003; 0.005 goes up
  CHECK(s.bands[2].count == 2);  // [5mm, 10mm): 0.005 and 0.007
  // 0.01 sits on the last edge and is outside every half-open band.
  CHECK(s.bands[0].count + s.bands[1].count + s.bands[2].count == 5);
}

TEST_CASE("a symmetric field summarizes to zero mean and full rms") {
  const ChangeMap m = map_of({0.01, 0.01, -0.01, -0.01}, 2, 2);
  const ChangeSummary s = survscan::change::summarize(m, 0.02);
  CHECK(s.mean == 0.0);
  CHECK(s.rms == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(s.max_abs == 0.01);
  CHECK(s.fraction_within == 1.0);
  CHECK(s.bands.empty());
}

TEST_CASE("summary rejects bad band edges and empty maps") {
  const ChangeMap m = map_of({0.001, kNoData}, 2, 1);
  const std::vector<double> bad = {0.0, 0.0};
  CHECK_THROWS_WITH_AS(survscan::change::summarize(m, 0.01, bad),
                       "summarize: band edges must be strictly increasing",
                       Error);
  const ChangeMap empty = map_of({kNoData, kNoData}, 2, 1);
  CHECK_THROWS_WITH_AS(survscan::change::summarize(empty, 0.01),
                       "summarize: change map has no valid cells", Error);
}

TEST_CASE("summary serializes with stable keys and exact values") {
  testutil::TempDir dir;
  const ChangeMap m = map_of({0.003, -0.001, 0.007, kNoData}, 2, 2);
  const std::vector<double> edges = {0.0, 0.005, 0.01};
  const ChangeSummary s = survscan::change::summarize(m, 0.005, edges);
  const auto p = dir.file("summary.json");
  survscan::change::write_summary_json(s, p);

  std::ifstream f(p);
  const nlohmann::json doc = nlohmann::json::parse(f);
  CHECK(doc.at("mean_m").get<double>() == s.mean);
  CHECK(doc.at("rms_m").get<double>() == s.rms);
  CHECK(doc.at("max_abs_m").get<double>() == s.max_abs);
  CHECK(doc.at("fraction_within").get<double>() == s.fraction_within);
  CHECK(doc.at("tolerance_m").get<double>() == 0.005);
  CHECK(doc.at("valid_cells").get<std::size_t>() == 3);
  REQUIRE(doc.at("bands").size() == 2);
  CHECK(doc["bands"][0].at("min_m").get<double>() == 0.0);
  CHECK(doc["bands"][0].at("max_m").get<double>() == 0.005);
  CHECK(doc["bands"][0].at("count").get<std::size_t>() == 1);
  CHECK(doc["bands"][1].at("count").get<std::size_t>() == 1);

  const auto missing = dir.path() / "no_such_dir" / "summary.json";
  const std::string want = "cannot open " + missing.string() + " for writing";
  CHECK_THROWS_WITH_AS(survscan::change::write_summary_json(s, missing),
                       want.c_str(), Error);
}

TEST_CASE("heatmap pixels follow the diverging ramp") {
  testutil::TempDir dir;
  const double r = 0.02;

  SUBCASE("extremes and the neutral point") {
    const ChangeMap m = map_of({-r, 0.0, r}, 3, 1);
    const auto p = dir.file("ramp.ppm");
    survscan::change::export_heatmap(m, p, r);
    const std::string bytes = slurp_bytes(p);
    const std::string header = "P6\n3 1\n255\n";
    REQUIRE(bytes.size() == header.size() + 9);
    CHECK(bytes.substr(0, header.size()) == header);
    const auto* px = reinterpret_cast<const unsigned char*>(
        bytes.data() + header.size());
    CHECK(px[0] == 0);    // full negative: saturated blue
    CHECK(px[1] == 0);
    CHECK(px[2] == 255);
    CHECK(px[3] == 255);  // zero: white
    CHECK(px[4] == 255);
    CHECK(px[5] == 255);
    CHECK(px[6] == 255);  // full positive: saturated red
    CHECK(px[7] == 0);
    CHECK(px[8] == 0);
  }

  SUBCASE("half-scale values and out-of-range clamping") {
    const ChangeMap m = map_of({r / 2, -r / 2, 3 * r, -9 * r}, 4, 1);
    const auto p = dir.file("clamp.ppm");
    survscan::change::export_heatmap(m, p, r);
    const std::string bytes = slurp_bytes(p);
    const auto* px = reinterpret_cast<const unsigned char*>(
        bytes.data() + std::string("P6\n4 1\n255\n").size());
    CHECK(px[0] == 255);  // +r/2: (255, 128, 128)
    CHECK(px[1] == 128);
    CHECK(px[2] == 128);
    CHECK(px[3] == 128);  // -r/2: (128, 128, 255)
    CHECK(px[4] == 128);
    CHECK(px[5] == 255);
    CHECK(px[6] == 255);  // clamped to full red
    CHECK(px[7] == 0);
    CHECK(px[8] == 0);
    CHECK(px[9] == 0);    // clamped to full blue
    CHECK(px[10] == 0);
    CHECK(px[11] == 255);
  }

  SUBCASE("nodata renders black and the top row is the north row") {
    // Grid row 1 (north) is nodata + positive; row 0 (south) negative + 0.
    const ChangeMap m = map_of({-r, 0.0, kNoData, r}, 2, 2);
    const auto p = dir.file("rows.ppm");
    survscan::change::export_heatmap(m, p, r);
    const std::string bytes = slurp_bytes(p);
    const auto* px = reinterpret_cast<const unsigned char*>(
        bytes.data() + std::string("P6\n2 2\n255\n").size());
    // First file row = grid row 1: black, then red.
    CHECK(px[0] == 0);
    CHECK(px[1] == 0);
    CHECK(px[2] == 0);
    CHECK(px[3] == 255);
    CHECK(px[4] == 0);
    CHECK(px[5] == 0);
    // Second file row = grid row 0: blue, then white.
    CHECK(px[6] == 0);
    CHECK(px[7] == 0);
    CHECK(px[8] == 255);
    CHECK(px[9] == 255);
    CHECK(px[10] == 255);
    CHECK(px[11] == 255);
  }
}

TEST_CASE("heatmap bytes match an independent render of a random map") {
  std::mt19937 g(805);
  testutil::TempDir dir;
  std::vector<double> values(9 * 7);
  for (double& v : values)
    v = testutil::uniform(g, 0.0, 1.0) < 0.2
            ? kNoData
            : testutil::uniform(g, -0.05, 0.05);
  const ChangeMap m = map_of(values, 9, 7);
  const double range = 0.03;
  const auto p = dir.file("full.ppm");
  survscan::change::export_heatmap(m, p, range);

  std::string want = "P6\n9 7\n255\n";
  for (std::size_t rr = 7; rr-- > 0;) {
    for (std::size_t c = 0; c < 9; ++c) {
      const double dz = m.grid.at(rr, c);
      unsigned char px[3] = {0, 0, 0};
      if (dz != kNoData) {
        const double t = std::clamp(dz / range, -1.0, 1.0);
        if (t <= 0.0) {
          const auto v =
              static_cast<unsigned char>(std::lround(255.0 * (1.0 + t)));
          px[0] = px[1] = v;
          px[2] = 255;
        } else {
          const auto v =
              static_cast<unsigned char>(std::lround(255.0 * (1.0 - t)));
          px[0] = 255;
          px[1] = px[2] = v;
        }
      }
      want.append(reinterpret_cast<const char*>(px), 3);
    }
  }
  CHECK(slurp_bytes(p) == want);
}

TEST_CASE("heatmap writes a legend sidecar and validates its range") {
  testutil::TempDir dir;
  const ChangeMap m = map_of({0.01}, 1, 1);
  const auto p = dir.file("map.ppm");
  survscan::change::export_heatmap(m, p, 0.02);
  const std::string legend = slurp_bytes(dir.path() / "map.ppm.legend.txt");
  CHECK(legend ==
        "range_m 0.020000\nramp blue-white-red\nnodata_color 0 0 0\n");

  CHECK_THROWS_WITH_AS(survscan::change::export_heatmap(m, p, 0.0),
                       "export_heatmap: range must be > 0", Error);
}

// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0
//
// survscan — batch command line front end for the survscan core library.
//
// Exit codes: 0 success, 1 usage error, 2 data/validation error (the message
// names the violated contract), 3 accuracy verdict "fail".
//
// Every successful run writes a JSON run manifest beside its first output
// (or "<subcommand>.manifest.json" in the working directory for subcommands
// that only print to stdout). The manifest records the command line, the
// resolved option values, input digests, output paths, the toolkit version,
// and the wall time; wall time is the only field that may differ between
// reruns on identical inputs.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "survscan/change.hpp"
#include "survscan/cloud_io.hpp"
#include "survscan/error.hpp"
#include "survscan/parallel.hpp"
#include "survscan/point_cloud.hpp"
#include "survscan/preprocess.hpp"
#include "survscan/raster.hpp"
#include "survscan/spatial_index.hpp"
#include "survscan/targets.hpp"
#include "survscan/tin.hpp"
#include "survscan/transform.hpp"
#include "survscan/version.hpp"

namespace fs = std::filesystem;
using survscan::Error;

namespace {

// ---------------------------------------------------------------------------
// Small utilities

std::string join_args(int argc, char** argv) {
  std::string line;
  for (int i = 0; i < argc; ++i) {
    if (i) line += ' ';
    line += argv[i];
  }
  return line;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string() + " for digesting");
  std::ostringstream buf;
  buf << in.rdbuf();
  char hex[32];
  std::snprintf(hex, sizeof hex, "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(buf.str())));
  return hex;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [p, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && p == end;
}

__attribute__((format(printf, 1, 2))) void print_line(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  std::cout << buf << '\n';
}

// ---------------------------------------------------------------------------
// Run manifest

struct RunContext {
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;  // first entry decides the manifest location
};

void collect_options(const CLI::App& sub, nlohmann::json& cfg) {
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_positional()) continue;
    const auto& lnames = opt->get_lnames();
    if (lnames.empty()) continue;
    const std::string& name = lnames.front();
    if (name == "help") continue;
    std::string value;
    if (opt->count() > 0) {
      const std::vector<std::string>& results = opt->results();
      for (std::size_t i = 0; i < results.size(); ++i) {
        if (i) value += ' ';
        value += results[i];
      }
      if (results.empty()) value = "true";  // bare flag
    } else {
      value = opt->get_default_str();
      if (value.empty()) continue;  // unset option without a default
    }
    cfg[name] = value;
  }
  for (const CLI::App* group : sub.get_subcommands(nullptr))
    collect_options(*group, cfg);  // option groups hold their own options
}

nlohmann::json resolved_options(const CLI::App& sub) {
  nlohmann::json cfg = nlohmann::json::object();
  collect_options(sub, cfg);
  return cfg;
}

void write_manifest(const CLI::App& sub, const std::string& command_line,
                    const RunContext& ctx, double wall_seconds) {
  nlohmann::json doc;
  doc["tool"] = "survscan";
  doc["version"] = std::string(survscan::kVersion);
  doc["subcommand"] = sub.get_name();
  doc["command_line"] = command_line;
  doc["config"] = resolved_options(sub);
  doc["inputs"] = nlohmann::json::array();
  for (const fs::path& p : ctx.inputs)
    doc["inputs"].push_back({{"path", p.string()}, {"digest", file_digest(p)}});
  doc["outputs"] = nlohmann::json::array();
  for (const fs::path& p : ctx.outputs) doc["outputs"].push_back(p.string());
  doc["wall_time_s"] = wall_seconds;

  const fs::path where = ctx.outputs.empty()
                             ? fs::path(sub.get_name() + ".manifest.json")
                             : fs::path(ctx.outputs.front().string() +
                                        ".manifest.json");
  std::ofstream out(where, std::ios::binary);
  if (!out) throw Error("cannot open " + where.string() + " for writing");
  out << doc.dump(2) << '\n';
  if (!out.good()) throw Error("failed while writing " + where.string());
}

// ---------------------------------------------------------------------------
// Shared option helpers

survscan::RigidTransform read_transform_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  survscan::RigidTransform t;
  try {
    const nlohmann::json doc = nlohmann::json::parse(in);
    const auto& rot = doc.at("rotation");
    if (rot.size() != 3) throw Error("rotation must be a 3x3 matrix");
    for (int r = 0; r < 3; ++r) {
      if (rot[r].size() != 3) throw Error("rotation must be a 3x3 matrix");
      for (int c = 0; c < 3; ++c) t.rotation(r, c) = rot[r][c].get<double>();
    }
    const auto& tr = doc.at("translation");
    if (tr.size() != 3) throw Error("translation must hold 3 components");
    for (int r = 0; r < 3; ++r) t.translation(r) = tr[r].get<double>();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  t.validate();
  return t;
}

void write_transform_json(const survscan::RegistrationResult& reg,
                          const fs::path& path) {
  nlohmann::json doc;
  doc["rotation"] = nlohmann::json::array();
  for (int r = 0; r < 3; ++r)
    doc["rotation"].push_back({reg.transform.rotation(r, 0),
                               reg.transform.rotation(r, 1),
                               reg.transform.rotation(r, 2)});
  doc["translation"] = {reg.transform.translation(0),
                        reg.transform.translation(1),
                        reg.transform.translation(2)};
  doc["rms_residual_m"] = reg.rms_residual;
  doc["iterations"] = reg.iterations;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  if (!out.good()) throw Error("failed while writing " + path.string());
}

survscan::PolygonRegion read_polygon_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  survscan::PolygonRegion region;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    double x, y;
    if (!(row >> x)) continue;  // blank or comment-only line
    std::string trailing;
    if (!(row >> y) || (row >> trailing)) {
      throw Error(path.string() + ":" + std::to_string(lineno) +
                  ": expected exactly two numbers \"x y\"");
    }
    region.vertices.emplace_back(x, y);
  }
  return region;
}

const std::map<std::string, survscan::raster::Aggregator>& aggregator_names() {
  static const std::map<std::string, survscan::raster::Aggregator> names{
      {"mean", survscan::raster::Aggregator::kMean},
      {"min", survscan::raster::Aggregator::kMin},
      {"max", survscan::raster::Aggregator::kMax}};
  return names;
}

// ---------------------------------------------------------------------------
// Subcommand state + runners. Each runner returns the process exit code and
// fills the run context with the files it read and wrote.

struct FilterCmd {
  std::string input, output, removed;
  double cell = 0.001;
  std::size_t k = 8;
  double alpha = 3.0;
};

int run_filter(const FilterCmd& o, RunContext& ctx) {
  ctx.inputs = {o.input};
  const survscan::PointCloud cloud = survscan::read_cloud(o.input);
  const auto dedup = survscan::deduplicate(cloud, o.cell);
  const auto result = survscan::remove_outliers(dedup.kept, o.k, o.alpha);
  survscan::write_cloud(result.kept, o.output);
  ctx.outputs = {o.output};
  if (!o.removed.empty()) {
    survscan::write_cloud(result.removed, o.removed);
    ctx.outputs.push_back(o.removed);
  }
  print_line("deduplicated=%zu outliers_removed=%zu kept=%zu", dedup.removed,
             result.removed.size(), result.kept.size());
  return 0;
}

struct ClassifyCmd {
  std::string input, output;
  double cell = 0.5;
  double h_thresh = 0.15;
};

int run_classify(const ClassifyCmd& o, RunContext& ctx) {
  ctx.inputs = {o.input};
  const survscan::PointCloud cloud = survscan::read_cloud(o.input);
  const survscan::PointCloud labeled =
      survscan::classify_ground(cloud, o.cell, o.h_thresh);
  survscan::write_cloud(labeled, o.output);
  ctx.outputs = {o.output};
  std::size_t ground = 0;
  for (std::uint8_t c : labeled.classes)
    if (c == static_cast<std::uint8_t>(survscan::PointClass::kGround)) ++ground;
  print_line("ground=%zu non_ground=%zu", ground, labeled.size() - ground);
  return 0;
}

struct CropCmd {
  std::string input, output, polygon;
  std::vector<double> box;  // xmin ymin zmin xmax ymax zmax
};

int run_crop(const CropCmd& o, RunContext& ctx) {
  ctx.inputs = {o.input};
  const survscan::PointCloud cloud = survscan::read_cloud(o.input);
  survscan::PointCloud kept;
  if (!o.box.empty()) {
    const survscan::BoxRegion region{
        survscan::Vec3(o.box[0], o.box[1], o.box[2]),
        survscan::Vec3(o.box[3], o.box[4], o.box[5])};
    kept = survscan::crop(cloud, region);
  } else {
    ctx.inputs.push_back(o.polygon);
    kept = survscan::crop(cloud, read_polygon_file(o.polygon));
  }
  survscan::write_cloud(kept, o.output);
  ctx.outputs = {o.output};
  print_line("kept=%zu of=%zu", kept.size(), cloud.size());
  return 0;
}

struct RegisterCmd {
  std::string pairs, transform_out;
  bool icp = false;
  std::string source, target;
  int icp_max_iter = 50;
  double icp_tol = 1e-6;
  double gate = 0.0;
  bool gate_set = false;
  std::string apply_to, output;
};

int run_register(const RegisterCmd& o, RunContext& ctx) {
  ctx.inputs = {o.pairs};
  const auto pairs = survscan::read_correspondences(o.pairs);
  survscan::RegistrationResult result = survscan::estimate_rigid(pairs);
  print_line("rms_residual_m=%.6f pairs=%zu", result.rms_residual,
             pairs.size());
  if (o.icp) {
    ctx.inputs.push_back(o.source);
    ctx.inputs.push_back(o.target);
    const survscan::PointCloud source = survscan::read_cloud(o.source);
    const survscan::PointCloud target = survscan::read_cloud(o.target);
    survscan::IcpOptions options;
    options.max_iterations = o.icp_max_iter;
    options.converge_tol = o.icp_tol;
    if (o.gate_set) options.max_correspondence_dist = o.gate;
    result = survscan::icp_refine(source, target, result.transform, options);
    print_line("icp_rms_m=%.6f icp_iterations=%d", result.rms_residual,
               result.iterations);
  }
  write_transform_json(result, o.transform_out);
  ctx.outputs = {o.transform_out};
  if (!o.apply_to.empty()) {
    ctx.inputs.push_back(o.apply_to);
    const survscan::PointCloud cloud = survscan::read_cloud(o.apply_to);
    survscan::write_cloud(survscan::apply_transform(cloud, result.transform),
                          o.output);
    ctx.outputs.push_back(o.output);
  }
  return 0;
}

struct GeorefCmd {
  std::string input, output, pairs, transform, crs = "unspecified";
};

int run_georef(const GeorefCmd& o, RunContext& ctx) {
  ctx.inputs = {o.input};
  const survscan::PointCloud cloud = survscan::read_cloud(o.input);
  survscan::PointCloud placed;
  if (!o.pairs.empty()) {
    ctx.inputs.push_back(o.pairs);
    const auto control = survscan::read_correspondences(o.pairs);
    auto [shifted, reg] = survscan::georeference(cloud, control, o.crs);
    placed = std::move(shifted);
    print_line("rms_residual_m=%.6f pairs=%zu", reg.rms_residual,
               control.size());
  } else {
    ctx.inputs.push_back(o.transform);
    const survscan::RigidTransform t = read_transform_json(o.transform);
    placed = survscan::apply_transform(
        cloud, t,
        survscan::FrameTag{survscan::FrameTag::Kind::kGeoreferenced, o.crs});
  }
  survscan::write_cloud(placed, o.output);
  ctx.outputs = {o.output};
  print_line("frame=%s", placed.frame.str().c_str());
  return 0;
}

struct DsmCmd {
  std::string input, output;
  double cell = 0.05;
  survscan::raster::Aggregator method = survscan::raster::Aggregator::kMean;
  int max_ring = 8;
  bool no_fill = false;
};

int run_dsm(const DsmCmd& o, RunContext& ctx) {
  ctx.inputs = {o.input};
  const survscan::PointCloud cloud = survscan::read_cloud(o.input);
  survscan::raster::RasterGrid grid =
      survscan::raster::rasterize_dsm(cloud, o.cell, o.method);
  std::size_t interpolated = 0;
  if (!o.no_fill) {
    auto filled = survscan::raster::fill_holes(grid, o.max_ring);
    grid = std::move(filled.grid);
    interpolated = filled.interpolated_cells;
  }
  survscan::raster::write_asc(grid, o.output);
  ctx.outputs = {o.output};
  print_line("ncols=%zu nrows=%zu filled_cells=%zu interpolated_cells=%zu",
             grid.ncols, grid.nrows, grid.count_filled(), interpolated);
  return 0;
}

struct VolumeCmd {
  std::string input;
  double cell = 0.05;
  std::string base = "lowest";
  survscan::raster::Aggregator method = survscan::raster::Aggregator::kMean;
  std::string json;
};

int run_volume(const VolumeCmd& o, RunContext& ctx) {
  ctx.inputs = {o.input};
  const survscan::PointCloud cloud = survscan::read_cloud(o.input);
  const survscan::raster::RasterGrid grid =
      survscan::raster::rasterize_dsm(cloud, o.cell, o.method);
  std::optional<double> base;
  if (o.base != "lowest") {
    double h = 0.0;
    if (!parse_double(o.base, h))
      throw Error("volume: --base must be \"lowest\" or a height in meters");
    base = h;
  }
  const survscan::raster::VolumeResult result =
      survscan::raster::volume_area(grid, base);
  if (!o.json.empty()) {
    nlohmann::json doc;
    doc["volume_m3"] = result.volume;
    doc["area_m2"] = result.area;
    doc["base_m"] = result.base;
    doc["cells_above"] = result.cells_above;
    doc["filled_cells"] = result.filled_cells;
    std::ofstream out(o.json, std::ios::binary);
    if (!out) throw Error("cannot open " + o.json + " for writing");
    out << doc.dump(2) << '\n';
    if (!out.good()) throw Error("failed while writing " + o.json);
    ctx.outputs = {o.json};
  }
  print_line("volume_m3=%.3f area_m2=%.3f", result.volume, result.area);
  return 0;
}

struct DiffCmd {
  std::string epoch_a, epoch_b, heatmap, summary;
  double cell = 0.05;
  double range = 0.02;
  double tolerance = 0.005;
  std::vector<double> bands;
};

int run_diff(const DiffCmd& o, RunContext& ctx) {
  ctx.inputs = {o.epoch_a, o.epoch_b};
  const survscan::PointCloud a = survscan::read_cloud(o.epoch_a);
  const survscan::PointCloud b = survscan::read_cloud(o.epoch_b);
  const survscan::change::ChangeMap map =
      survscan::change::vertical_distance(a, b, o.cell);
  const survscan::change::ChangeSummary summary =
      survscan::change::summarize(map, o.tolerance, o.bands);
  survscan::change::export_heatmap(map, o.heatmap, o.range);
  ctx.outputs = {o.heatmap, o.heatmap + ".legend.txt"};
  if (!o.summary.empty()) {
    survscan::change::write_summary_json(summary, o.summary);
    ctx.outputs.push_back(o.summary);
  }
  print_line("mean_m=%.6f rms_m=%.6f max_abs_m=%.6f fraction_within=%.4f",
             summary.mean, summary.rms, summary.max_abs,
             summary.fraction_within);
  return 0;
}

struct TinCmd {
  std::string input, output;
};

int run_tin(const TinCmd& o, RunContext& ctx) {
  ctx.inputs = {o.input};
  const survscan::PointCloud cloud = survscan::read_cloud(o.input);
  const survscan::tin::TriangulatedSurface surface =
      survscan::tin::delaunay(cloud);
  survscan::tin::export_obj(surface, o.output);
  ctx.outputs = {o.output};
  print_line("vertices=%zu triangles=%zu", surface.vertices.size(),
             surface.triangles.size());
  return 0;
}

struct AccuracyCmd {
  std::string observations, distances, json;
  double tolerance_mm = 0.0;
};

int run_accuracy(const AccuracyCmd& o, RunContext& ctx) {
  survscan::targets::AccuracyReport report;
  if (!o.observations.empty()) {
    ctx.inputs = {o.observations};
    report = survscan::targets::distance_stats(
        survscan::targets::read_observations(o.observations), o.tolerance_mm);
  } else {
    ctx.inputs = {o.distances};
    report = survscan::targets::distance_stats_from_distances(
        survscan::targets::read_distances(o.distances), o.tolerance_mm);
  }
  survscan::targets::write_accuracy_json(report, o.json);
  ctx.outputs = {o.json};
  print_line("max_std_mm=%.1f verdict=%s", report.max_std_mm,
             report.pass ? "pass" : "fail");
  return report.pass ? 0 : 3;
}

struct SpacingCmd {
  std::string input;
};

int run_spacing(const SpacingCmd& o, RunContext& ctx) {
  ctx.inputs = {o.input};
  const survscan::PointCloud cloud = survscan::read_cloud(o.input);
  print_line("mean_nn_spacing_m=%.6f", survscan::mean_nn_spacing(cloud));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const auto start = std::chrono::steady_clock::now();
  const std::string command_line = join_args(argc, argv);

  CLI::App app{"survscan — terrestrial laser scanning survey toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(survscan::kVersion));
  app.set_config("--config", "survscan.conf",
                 "INI configuration (one [section] per subcommand); command "
                 "line flags override config values",
                 false);
  unsigned threads = 0;
  app.add_option("--threads", threads,
                 "Worker thread cap; 0 uses all hardware threads")
      ->envname("SURVSCAN_THREADS");

  const auto subcommand = [&app](const std::string& name,
                                 const std::string& desc) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->configurable();
    sub->fallthrough();
    return sub;
  };

  // --- filter ---------------------------------------------------------------
  FilterCmd filter;
  CLI::App* filter_cmd =
      subcommand("filter", "Deduplicate, then remove statistical outliers");
  filter_cmd->add_option("input", filter.input, "Input cloud (.xyz or .sspc)")
      ->required();
  filter_cmd->add_option("output", filter.output, "Filtered cloud")->required();
  filter_cmd->add_option("--cell", filter.cell,
                         "Deduplication grid pitch in meters")
      ->capture_default_str();
  filter_cmd->add_option("--k", filter.k, "Neighbor count for outlier scores")
      ->capture_default_str();
  filter_cmd
      ->add_option("--alpha", filter.alpha,
                   "Std-deviation multiplier above the mean score")
      ->capture_default_str();
  filter_cmd->add_option("--removed", filter.removed,
                         "Also write the removed outliers to this path");

  // --- classify ---------------------------------------------------------------
  ClassifyCmd classify;
  CLI::App* classify_cmd =
      subcommand("classify", "Label points ground / non-ground");
  classify_cmd
      ->add_option("input", classify.input, "Input cloud (.xyz or .sspc)")
      ->required();
  classify_cmd->add_option("output", classify.output, "Labeled cloud")
      ->required();
  classify_cmd->add_option("--cell", classify.cell, "Grid pitch in meters")
      ->capture_default_str();
  classify_cmd
      ->add_option("--h-thresh", classify.h_thresh,
                   "Height above the cell minimum still counted as ground")
      ->capture_default_str();

  // --- crop -------------------------------------------------------------------
  CropCmd crop;
  CLI::App* crop_cmd = subcommand("crop", "Keep points inside a region");
  crop_cmd->add_option("input", crop.input, "Input cloud (.xyz or .sspc)")
      ->required();
  crop_cmd->add_option("output", crop.output, "Cropped cloud")->required();
  CLI::Option_group* region =
      crop_cmd->add_option_group("region", "Crop region (choose one)");
  region->add_option("--box", crop.box,
                     "Inclusive bounds: xmin ymin zmin xmax ymax zmax")
      ->expected(6);
  region->add_option("--polygon", crop.polygon,
                     "File with one \"x y\" vertex per line");
  region->require_option(1);

  // --- register ---------------------------------------------------------------
  RegisterCmd reg;
  CLI::App* register_cmd = subcommand(
      "register", "Estimate a rigid transform from correspondence pairs");
  register_cmd
      ->add_option("pairs", reg.pairs,
                   "Correspondence file: id sx sy sz dx dy dz per line")
      ->required();
  register_cmd
      ->add_option("transform", reg.transform_out,
                   "Output transform (JSON rotation + translation)")
      ->required();
  CLI::Option* icp_flag = register_cmd->add_flag(
      "--icp", reg.icp, "Refine with point-to-point ICP on full clouds");
  CLI::Option* icp_src = register_cmd->add_option(
      "--source", reg.source, "Source cloud for ICP refinement");
  CLI::Option* icp_dst = register_cmd->add_option(
      "--target", reg.target, "Destination cloud for ICP refinement");
  icp_flag->needs(icp_src)->needs(icp_dst);
  icp_src->needs(icp_flag);
  icp_dst->needs(icp_flag);
  register_cmd
      ->add_option("--icp-max-iter", reg.icp_max_iter, "ICP iteration cap")
      ->capture_default_str();
  register_cmd
      ->add_option("--icp-tol", reg.icp_tol,
                   "Convergence tolerance in meters (rms or rms improvement)")
      ->capture_default_str();
  CLI::Option* gate_opt = register_cmd->add_option(
      "--gate", reg.gate,
      "Max correspondence distance in meters (default: 5 x mean spacing)");
  CLI::Option* apply_opt = register_cmd->add_option(
      "--apply-to", reg.apply_to, "Cloud to transform with the result");
  CLI::Option* apply_out = register_cmd->add_option(
      "--output", reg.output, "Where to write the transformed cloud");
  apply_opt->needs(apply_out);
  apply_out->needs(apply_opt);

  // --- georef -----------------------------------------------------------------
  GeorefCmd georef;
  CLI::App* georef_cmd =
      subcommand("georef", "Move a cloud into a georeferenced frame");
  georef_cmd->add_option("input", georef.input, "Input cloud (.xyz or .sspc)")
      ->required();
  georef_cmd->add_option("output", georef.output, "Georeferenced cloud")
      ->required();
  CLI::Option_group* georef_how =
      georef_cmd->add_option_group("mapping", "Transform source (choose one)");
  georef_how->add_option("--pairs", georef.pairs,
                         "Control point file: id sx sy sz dx dy dz per line");
  georef_how->add_option("--transform", georef.transform,
                         "Transform JSON produced by the register subcommand");
  georef_how->require_option(1);
  georef_cmd->add_option("--crs", georef.crs, "Coordinate system name")
      ->capture_default_str();

  // --- dsm --------------------------------------------------------------------
  DsmCmd dsm;
  CLI::App* dsm_cmd =
      subcommand("dsm", "Rasterize to a surface model and write ESRI ASCII");
  dsm_cmd->add_option("input", dsm.input, "Input cloud (.xyz or .sspc)")
      ->required();
  dsm_cmd->add_option("output", dsm.output, "Output .asc grid")->required();
  dsm_cmd->add_option("--cell", dsm.cell, "Cell size in meters")
      ->capture_default_str();
  dsm_cmd->add_option("--method", dsm.method, "Per-cell aggregation")
      ->transform(CLI::CheckedTransformer(aggregator_names(), CLI::ignore_case))
      ->default_str("mean");
  dsm_cmd
      ->add_option("--max-ring", dsm.max_ring,
                   "Farthest neighbor ring searched when filling holes")
      ->capture_default_str();
  dsm_cmd->add_flag("--no-fill", dsm.no_fill, "Skip hole filling");

  // --- volume -----------------------------------------------------------------
  VolumeCmd volume;
  CLI::App* volume_cmd =
      subcommand("volume", "Cut volume and footprint area above a base");
  volume_cmd->add_option("input", volume.input, "Input cloud (.xyz or .sspc)")
      ->required();
  volume_cmd->add_option("--cell", volume.cell, "Cell size in meters")
      ->capture_default_str();
  volume_cmd
      ->add_option("--base", volume.base,
                   "Base surface: \"lowest\" or a height in meters")
      ->capture_default_str()
      ->check(
          [](const std::string& s) -> std::string {
            double ignored;
            if (s == "lowest" || parse_double(s, ignored)) return {};
            return "must be \"lowest\" or a number (meters)";
          },
          "BASE");
  volume_cmd->add_option("--method", volume.method, "Per-cell aggregation")
      ->transform(CLI::CheckedTransformer(aggregator_names(), CLI::ignore_case))
      ->default_str("mean");
  volume_cmd->add_option("--json", volume.json,
                         "Also write the full-precision result as JSON");

  // --- diff -------------------------------------------------------------------
  DiffCmd diff;
  CLI::App* diff_cmd =
      subcommand("diff", "Vertical change between two epochs plus a heatmap");
  diff_cmd->add_option("epoch_a", diff.epoch_a, "Earlier epoch cloud")
      ->required();
  diff_cmd->add_option("epoch_b", diff.epoch_b, "Later epoch cloud")
      ->required();
  diff_cmd->add_option("heatmap", diff.heatmap, "Output heatmap (.ppm)")
      ->required();
  diff_cmd->add_option("--cell", diff.cell, "Cell size in meters")
      ->capture_default_str();
  diff_cmd
      ->add_option("--range", diff.range,
                   "Heatmap color range in meters (full red/blue at +/-range)")
      ->capture_default_str();
  diff_cmd
      ->add_option("--tolerance", diff.tolerance,
                   "\"Within tolerance\" band in meters for the summary")
      ->capture_default_str();
  diff_cmd
      ->add_option("--bands", diff.bands,
                   "Histogram band edges in meters, strictly increasing")
      ->delimiter(',');
  diff_cmd->add_option("--summary", diff.summary,
                       "Also write the summary as JSON");

  // --- tin --------------------------------------------------------------------
  TinCmd tin;
  CLI::App* tin_cmd =
      subcommand("tin", "Delaunay-triangulate and export a Wavefront OBJ");
  tin_cmd->add_option("input", tin.input, "Input cloud (.xyz or .sspc)")
      ->required();
  tin_cmd->add_option("output", tin.output, "Output .obj mesh")->required();

  // --- accuracy ---------------------------------------------------------------
  AccuracyCmd accuracy;
  CLI::App* accuracy_cmd = subcommand(
      "accuracy", "Pairwise target-distance repeatability across scans");
  CLI::Option_group* accuracy_src = accuracy_cmd->add_option_group(
      "measurements", "Measurement source (choose one)");
  accuracy_src->add_option(
      "--observations", accuracy.observations,
      "Target centers: scan_id target_id x y z per line");
  accuracy_src->add_option(
      "--distances", accuracy.distances,
      "Measured distances: scan_id target_a target_b distance_m per line");
  accuracy_src->require_option(1);
  accuracy_cmd
      ->add_option("--tolerance-mm", accuracy.tolerance_mm,
                   "Pass/fail threshold on the largest distance std")
      ->required();
  accuracy_cmd->add_option("--json", accuracy.json, "Output report JSON")
      ->required();

  // --- spacing ----------------------------------------------------------------
  SpacingCmd spacing;
  CLI::App* spacing_cmd =
      subcommand("spacing", "Mean nearest-neighbor spacing of a cloud");
  spacing_cmd->add_option("input", spacing.input, "Input cloud (.xyz or .sspc)")
      ->required();

  // --- parse and dispatch -----------------------------------------------------
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help / --version
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  survscan::set_max_threads(threads);

  RunContext ctx;
  const CLI::App* chosen = nullptr;
  int code = 0;
  try {
    if (filter_cmd->parsed()) {
      chosen = filter_cmd;
      code = run_filter(filter, ctx);
    } else if (classify_cmd->parsed()) {
      chosen = classify_cmd;
      code = run_classify(classify, ctx);
    } else if (crop_cmd->parsed()) {
      chosen = crop_cmd;
      code = run_crop(crop, ctx);
    } else if (register_cmd->parsed()) {
      chosen = register_cmd;
      reg.gate_set = gate_opt->count() > 0;
      code = run_register(reg, ctx);
    } else if (georef_cmd->parsed()) {
      chosen = georef_cmd;
      code = run_georef(georef, ctx);
    } else if (dsm_cmd->parsed()) {
      chosen = dsm_cmd;
      code = run_dsm(dsm, ctx);
    } else if (volume_cmd->parsed()) {
      chosen = volume_cmd;
      code = run_volume(volume, ctx);
    } else if (diff_cmd->parsed()) {
      chosen = diff_cmd;
      code = run_diff(diff, ctx);
    } else if (tin_cmd->parsed()) {
      chosen = tin_cmd;
      code = run_tin(tin, ctx);
    } else if (accuracy_cmd->parsed()) {
      chosen = accuracy_cmd;
      code = run_accuracy(accuracy, ctx);
    } else if (spacing_cmd->parsed()) {
      chosen = spacing_cmd;
      code = run_spacing(spacing, ctx);
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (chosen != nullptr) write_manifest(*chosen, command_line, ctx, wall);
  } catch (const std::exception& e) {
    std::cerr << "survscan: " << e.what() << '\n';
    return 2;
  }
  return code;
}

// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "survscan/point_cloud.hpp"

namespace survscan::targets {

struct SphereFit {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  double rms = 0.0;  // rms of |p - center| - radius
};

/// Least-squares sphere fit: algebraic linear solve for the initial estimate,
/// Gauss-Newton on the geometric residuals to finish. With known_radius only
/// the center is estimated; both mirror-side initializations are tried and
/// the lower-rms solution wins, which keeps partial caps well determined.
/// Pre: >= 4 non-coplanar points, or >= 3 points with known_radius.
SphereFit fit_sphere(std::span<const Vec3> points,
                     std::optional<double> known_radius = std::nullopt);

struct TargetObservation {
  std::string target_id;
  std::string scan_id;
  Vec3 center = Vec3::Zero();
  double fit_rms = 0.0;
  std::size_t point_count = 0;
};

/// Fits a sphere of known radius to the cloud points within search_radius of
/// approx_center. Throws Error("target not found ...") when fewer than 10
/// points qualify.
TargetObservation extract_target(const PointCloud& cloud,
                                 const Vec3& approx_center,
                                 double search_radius, double sphere_radius,
                                 std::string target_id = {},
                                 std::string scan_id = {});

struct ScanObservations {
  std::string scan_id;
  std::vector<TargetObservation> targets;
};

struct AccuracyReport {
  std::vector<std::string> target_ids;  // sorted
  std::vector<double> mean_m;           // upper triangle (i < j), row-major
  std::vector<double> std_mm;           // sample std (n - 1), millimeters
  std::size_t scan_count = 0;
  double max_std_mm = 0.0;
  double tolerance_mm = 0.0;
  bool pass = false;
  std::string distance_type = "euclidean_3d";
  std::string estimator = "sample_stddev_n_minus_1";

  std::size_t pairs() const { return mean_m.size(); }
  std::size_t pair_index(std::size_t i, std::size_t j) const;
  double mean_at(std::size_t i, std::size_t j) const;
  double std_at(std::size_t i, std::size_t j) const;
};

/// Pairwise-distance repeatability: per scan the Euclidean 3D distance
/// between every pair of target centers, then mean and sample std per pair
/// across scans. Verdict passes when max std <= tolerance_mm. Every scan must
/// observe every target exactly once (violations name the scan and target);
/// scan order never affects the result. Pre: >= 2 scans, >= 2 targets.
AccuracyReport distance_stats(std::span<const ScanObservations> scans,
                              double tolerance_mm);

struct PairDistance {
  std::string a;
  std::string b;
  double distance_m = 0.0;
};

struct ScanDistances {
  std::string scan_id;
  std::vector<PairDistance> distances;
};

/// Same statistics fed with per-scan distances measured directly off the
/// clouds (each scan must list every unordered pair exactly once).
AccuracyReport distance_stats_from_distances(
    std::span<const ScanDistances> scans, double tolerance_mm);

/// JSON round-trip. Means serialize at 1 mm and stds at 0.1 mm resolution;
/// keys: targets, scan_count, pairs (a, b, mean_m, std_mm), max_std_mm,
/// tolerance_mm, verdict ("pass"/"fail"), distance_type, estimator.
void write_accuracy_json(const AccuracyReport& report,
                         const std::filesystem::path& path);
AccuracyReport read_accuracy_json(const std::filesystem::path& path);

/// One "scan_id target_id x y z" per line, '#' comments; scans keep first-
/// appearance order.
std::vector<ScanObservations> read_observations(
    const std::filesystem::path& path);

/// One "scan_id target_a target_b distance_m" per line, '#' comments.
std::vector<ScanDistances> read_distances(const std::filesystem::path& path);

}  // namespace survscan::targets

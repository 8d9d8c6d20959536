// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "survscan/point_cloud.hpp"
#include "survscan/transform.hpp"

namespace survscan {

struct DeduplicateResult {
  PointCloud kept;
  std::size_t removed = 0;
};

/// Keeps the first point (in input order) of each tolerance-sized grid cell;
/// the cell key is floor(coord / tolerance) per axis. Pre: tolerance > 0.
DeduplicateResult deduplicate(const PointCloud& cloud, double tolerance = 0.001);

struct OutlierRemovalResult {
  PointCloud kept;
  PointCloud removed;
};

/// Statistical outlier removal: point i is dropped when its mean distance to
/// its k nearest neighbors exceeds mean + alpha * std of that statistic over
/// the whole cloud (sample standard deviation, n - 1 divisor).
/// Pre: cloud.size() > k >= 1, alpha >= 0.
OutlierRemovalResult remove_outliers(const PointCloud& cloud, std::size_t k = 8,
                                     double alpha = 3.0);

/// Inclusive axis-aligned bounds.
struct BoxRegion {
  Vec3 min;
  Vec3 max;
};

/// Simple polygon in xy, vertices in order (either winding); a closing
/// repeat of the first vertex is tolerated.
struct PolygonRegion {
  std::vector<Eigen::Vector2d> vertices;
};

PointCloud crop(const PointCloud& cloud, const BoxRegion& region);

/// Even-odd membership in xy; points exactly on the boundary are kept
/// (decided with exact orientation tests). Pre: >= 3 vertices, nonzero area.
PointCloud crop(const PointCloud& cloud, const PolygonRegion& region);

/// Grid-minimum ground filter: over an xy grid of pitch `cell`, points with
/// z within h_thresh of their cell's lowest z become kGround, all others
/// kNonGround. Returns a copy with the class channel rewritten; coordinates
/// and order are untouched. Pre: cell > 0, h_thresh >= 0.
PointCloud classify_ground(const PointCloud& cloud, double cell = 0.5,
                           double h_thresh = 0.15);

struct CorrespondencePair {
  std::string id;
  Vec3 source;
  Vec3 destination;
};

struct RegistrationResult {
  RigidTransform transform;
  double rms_residual = 0.0;
  std::vector<std::pair<std::string, double>> per_pair_residuals;
  int iterations = 0;
  std::vector<double> rms_history;  // one entry per accepted ICP iteration
};

/// Least-squares rigid fit of source onto destination: SVD orthogonal
/// Procrustes with the reflection guard (det forced to +1).
/// Pre: >= 3 pairs; source points not collinear (the second principal extent
/// of the centered source set must exceed 1e-6 m).
RegistrationResult estimate_rigid(std::span<const CorrespondencePair> pairs);

/// estimate_rigid on the control pairs, then applies the transform and tags
/// the cloud georeferenced(crs_name).
std::pair<PointCloud, RegistrationResult> georeference(
    const PointCloud& cloud, std::span<const CorrespondencePair> control,
    const std::string& crs_name = "unspecified");

struct IcpOptions {
  int max_iterations = 50;
  /// Stop once rms falls below this or improves by less than this (meters).
  double converge_tol = 1e-6;
  /// Pairs farther apart are ignored; default is 5 x mean_nn_spacing of the
  /// destination cloud.
  std::optional<double> max_correspondence_dist;
};

/// Point-to-point ICP from an initial guess. Each iteration matches every
/// source point to its nearest destination point under the current transform,
/// drops pairs beyond the distance gate, and re-solves the rigid fit from the
/// original source positions. An iteration that would raise the rms over the
/// best seen is rolled back and iteration stops, so rms_history never
/// increases and the result is never worse than the initial guess. With no
/// usable correspondences at all, the initial transform is returned with an
/// infinite rms.
RegistrationResult icp_refine(const PointCloud& source,
                              const PointCloud& destination,
                              const RigidTransform& initial,
                              const IcpOptions& options = {});

/// Pair file: one "id sx sy sz dx dy dz" per line, '#' comments.
std::vector<CorrespondencePair> read_correspondences(
    const std::filesystem::path& path);

}  // namespace survscan

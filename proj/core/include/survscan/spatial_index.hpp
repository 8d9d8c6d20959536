// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "survscan/point_cloud.hpp"

namespace survscan {

/// kd-tree over an immutable snapshot of a cloud's coordinates.
///
/// Neighbor ties are broken lexicographically by (distance, input index), so
/// every query returns exactly what a brute-force scan with the same ordering
/// would. Queries are const and safe to run concurrently.
class SpatialIndex {
 public:
  explicit SpatialIndex(const PointCloud& cloud);

  /// Indices of the k nearest points to q (all of them when k >= size()),
  /// ordered by ascending (distance, index).
  std::vector<std::size_t> knn(const Vec3& q, std::size_t k) const;

  /// Indices of every point with |p - q| <= r, ascending by index.
  std::vector<std::size_t> radius(const Vec3& q, double r) const;

  const Vec3& point(std::size_t i) const { return pts_[i]; }
  std::size_t size() const { return pts_.size(); }

 private:
  struct Node {
    double bmin[3], bmax[3];
    std::uint32_t left = 0, right = 0;  // 0 = leaf (node 0 is the root)
    std::uint32_t begin = 0, end = 0;   // range in order_ for leaves
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  double box_dist2(const Node& n, const Vec3& q) const;

  std::vector<Vec3> pts_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

/// Mean over all points of the distance to the nearest other point.
/// Pre: cloud.size() >= 2.
double mean_nn_spacing(const PointCloud& cloud);

}  // namespace survscan

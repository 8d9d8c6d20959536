// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#include "survscan/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "survscan/error.hpp"
#include "survscan/parallel.hpp"

namespace survscan {

namespace {
constexpr std::uint32_t kLeafSize = 16;
using Cand = std::pair<double, std::size_t>;  // (squared distance, index)
}  // namespace

SpatialIndex::SpatialIndex(const PointCloud& cloud) : pts_(cloud.positions) {
  order_.resize(pts_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!pts_.empty()) {
    nodes_.reserve(2 * (pts_.size() / kLeafSize + 1));
    build(0, static_cast<std::uint32_t>(pts_.size()));
  }
}

std::uint32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();

  Node n;
  for (int d = 0; d < 3; ++d) {
    n.bmin[d] = std::numeric_limits<double>::infinity();
    n.bmax[d] = -std::numeric_limits<double>::infinity();
  }
  for (std::uint32_t i = begin; i < end; ++i) {
    const Vec3& p = pts_[order_[i]];
    for (int d = 0; d < 3; ++d) {
      n.bmin[d] = std::min(n.bmin[d], p[d]);
      n.bmax[d] = std::max(n.bmax[d], p[d]);
    }
  }
  n.begin = begin;
  n.end = end;

  if (end - begin > kLeafSize) {
    int dim = 0;
    double widest = -1.0;
    for (int d = 0; d < 3; ++d) {
      const double extent = n.bmax[d] - n.bmin[d];
      if (extent > widest) {
        widest = extent;
        dim = d;
      }
    }
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end,
                     [this, dim](std::uint32_t a, std::uint32_t b) {
                       const double pa = pts_[a][dim], pb = pts_[b][dim];
                       return pa < pb || (pa == pb && a < b);
                     });
    n.left = build(begin, mid);
    n.right = build(mid, end);
  }
  nodes_[id] = n;
  return id;
}

double SpatialIndex::box_dist2(const Node& n, const Vec3& q) const {
  double d2 = 0.0;
  for (int d = 0; d < 3; ++d) {
    double delta = 0.0;
    if (q[d] < n.bmin[d])
      delta = n.bmin[d] - q[d];
    else if (q[d] > n.bmax[d])
      delta = q[d] - n.bmax[d];
    d2 += delta * delta;
  }
  return d2;
}

std::vector<std::size_t> SpatialIndex::knn(const Vec3& q, std::size_t k) const {
  if (k == 0 || pts_.empty()) return {};
  k = std::min(k, pts_.size());

  // Max-heap on (d2, index); a subtree is skipped only when its box is
  // strictly farther than the current worst, so equal-distance candidates
  // with lower indices are never lost.
  std::priority_queue<Cand> heap;
  auto consider = [&](const Cand& c) {
    if (heap.size() < k) {
      heap.push(c);
    } else if (c < heap.top()) {
      heap.pop();
      heap.push(c);
    }
  };

  auto visit = [&](auto&& self, std::uint32_t id) -> void {
    const Node& n = nodes_[id];
    if (n.left == 0) {  // leaf
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::size_t pi = order_[i];
        consider({(pts_[pi] - q).squaredNorm(), pi});
      }
      return;
    }
    const double dl = box_dist2(nodes_[n.left], q);
    const double dr = box_dist2(nodes_[n.right], q);
    const std::uint32_t first = dl <= dr ? n.left : n.right;
    const std::uint32_t second = dl <= dr ? n.right : n.left;
    const double dsecond = std::max(dl, dr);
    if (heap.size() < k || std::min(dl, dr) <= heap.top().first)
      self(self, first);
    if (heap.size() < k || dsecond <= heap.top().first) self(self, second);
  };
  visit(visit, 0);

  std::vector<Cand> ranked;
  ranked.reserve(heap.size());
  while (!heap.empty()) {
    ranked.push_back(heap.top());
    heap.pop();
  }
  std::vector<std::size_t> out(ranked.size());
  for (std::size_t i = 0; i < ranked.size(); ++i)
    out[ranked.size() - 1 - i] = ranked[i].second;
  return out;
}

std::vector<std::size_t> SpatialIndex::radius(const Vec3& q, double r) const {
  std::vector<std::size_t> out;
  if (pts_.empty() || r < 0.0) return out;
  const double r2 = r * r;

  auto visit = [&](auto&& self, std::uint32_t id) -> void {
    const Node& n = nodes_[id];
    if (box_dist2(n, q) > r2) return;
    if (n.left == 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::size_t pi = order_[i];
        if ((pts_[pi] - q).squaredNorm() <= r2) out.push_back(pi);
      }
      return;
    }
    self(self, n.left);
    self(self, n.right);
  };
  visit(visit, 0);
  std::sort(out.begin(), out.end());
  return out;
}

double mean_nn_spacing(const PointCloud& cloud) {
  const std::size_t n = cloud.size();
  if (n < 2) throw Error("mean_nn_spacing: insufficient points");
  const SpatialIndex index(cloud);
  std::vector<double> nn(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    const auto res = index.knn(cloud.positions[i], 2);
    for (std::size_t j : res) {
      if (j != i) {
        nn[i] = (cloud.positions[j] - cloud.positions[i]).norm();
        break;
      }
    }
  });
  double sum = 0.0;
  for (double d : nn) sum += d;  // fixed order keeps the result thread-safe
  return sum / static_cast<double>(n);
}

}  // namespace survscan

// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Geometry>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "survscan/point_cloud.hpp"

namespace testutil {

namespace fs = std::filesystem;
using survscan::PointCloud;
using survscan::Vec3;

inline PointCloud cloud_of(std::vector<Vec3> pts) {
  PointCloud c;
  c.positions = std::move(pts);
  return c;
}

inline double uniform(std::mt19937& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline PointCloud random_cloud(std::mt19937& g, std::size_t n,
                               double extent = 10.0) {
  PointCloud c;
  c.positions.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    c.positions.emplace_back(uniform(g, -extent, extent),
                             uniform(g, -extent, extent),
                             uniform(g, 0.0, extent * 0.2));
  return c;
}

inline Eigen::Matrix3d random_rotation(std::mt19937& g) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d axis(n(g), n(g), n(g));
  while (axis.norm() < 1e-3) axis = Eigen::Vector3d(n(g), n(g), n(g));
  axis.normalize();
  return Eigen::AngleAxisd(uniform(g, -3.14159, 3.14159), axis)
      .toRotationMatrix();
}

/// Self-deleting unique directory under the system temp path.
class TempDir {
 public:
  TempDir() {
    const fs::path base = fs::temp_directory_path();
    std::random_device rd;
    for (int tries = 0; tries < 64; ++tries) {
      fs::path cand = base / ("survscan-test-" + std::to_string(rd()));
      std::error_code ec;
      if (fs::create_directory(cand, ec)) {
        path_ = std::move(cand);
        return;
      }
    }
    throw std::runtime_error("could not create a temp directory");
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path file(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

}  // namespace testutil

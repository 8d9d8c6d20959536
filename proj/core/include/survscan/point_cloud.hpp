// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace survscan {

using Vec3 = Eigen::Vector3d;

/// LAS-style classification codes used throughout the toolkit.
enum class PointClass : std::uint8_t {
  kUnassigned = 0,
  kNonGround = 1,
  kGround = 2,
  kTarget = 64,
  kNoise = 65,
};

bool is_valid_class(std::uint8_t code);

struct Rgb8 {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  bool operator==(const Rgb8&) const = default;
};

/// Coordinate frame a cloud lives in: scanner-local or a georeferenced CRS.
/// Serialized as "local(name)" / "georeferenced(name)".
struct FrameTag {
  enum class Kind { kLocal, kGeoreferenced };
  Kind kind = Kind::kLocal;
  std::string name = "unspecified";

  std::string str() const;
  static FrameTag parse(const std::string& s);  // inverse of str(), throws Error
  bool operator==(const FrameTag&) const = default;
};

/// Column-oriented point cloud. Optional channels are either empty or hold
/// exactly one entry per point. Operations never mutate their inputs; they
/// return new clouds, so a built cloud can be shared freely across threads.
struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<float> intensities;     // each in [0, 1]
  std::vector<Rgb8> colors;
  std::vector<std::uint8_t> classes;  // PointClass codes
  FrameTag frame;
  std::optional<std::int64_t> epoch;  // Unix seconds, UTC
  std::string source;                 // provenance label (usually a file name)

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  bool has_intensity() const { return !intensities.empty(); }
  bool has_color() const { return !colors.empty(); }
  bool has_class() const { return !classes.empty(); }

  /// Throws Error when a channel length disagrees with size(), a coordinate
  /// is non-finite, an intensity leaves [0, 1], or a class code is unknown.
  void validate() const;

  /// New cloud holding the points at `idx` (in that order) with all present
  /// channel values and the metadata copied over.
  PointCloud subset(const std::vector<std::size_t>& idx) const;
};

}  // namespace survscan

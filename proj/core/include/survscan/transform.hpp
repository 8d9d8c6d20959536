// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <optional>

#include "survscan/point_cloud.hpp"

namespace survscan {

/// Proper rigid motion p -> R p + t, det(R) = +1.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  /// Throws Error unless rotation is orthonormal with positive determinant
  /// (entrywise |R^T R - I| <= tol and det within tol of +1).
  void validate(double tol = 1e-9) const;

  static RigidTransform identity() { return {}; }
};

/// a after b: compose(a, b).apply(p) == a.apply(b.apply(p)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

RigidTransform invert(const RigidTransform& t);

/// Applies t to every point. The frame tag is replaced when new_frame is set,
/// kept otherwise; channels and metadata pass through untouched.
PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t,
                           const std::optional<FrameTag>& new_frame = std::nullopt);

}  // namespace survscan

// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#include "survscan/transform.hpp"

#include <Eigen/LU>

#include "survscan/error.hpp"
#include "survscan/parallel.hpp"

namespace survscan {

void RigidTransform::validate(double tol) const {
  const Eigen::Matrix3d gram =
      rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
  if (gram.cwiseAbs().maxCoeff() > tol) {
    throw Error("rotation is not orthonormal");
  }
  if (std::abs(rotation.determinant() - 1.0) > tol) {
    throw Error("rotation determinant is not +1 (improper transform)");
  }
  if (!translation.allFinite()) throw Error("translation is not finite");
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

RigidTransform invert(const RigidTransform& t) {
  Eigen::Matrix3d rt = t.rotation.transpose();
  return {rt, -(rt * t.translation)};
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t,
                           const std::optional<FrameTag>& new_frame) {
  t.validate();
  PointCloud out = cloud;
  parallel_for(out.positions.size(),
               [&](std::size_t i) { out.positions[i] = t.apply(cloud.positions[i]); });
  if (new_frame) out.frame = *new_frame;
  return out;
}

}  // namespace survscan

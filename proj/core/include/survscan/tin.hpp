// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "survscan/point_cloud.hpp"

namespace survscan::tin {

struct TriangulatedSurface {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;  // CCW in xy
};

/// 2.5D Delaunay triangulation of the cloud's xy projection (z carried along).
/// xy duplicates within 1e-9 m collapse to the lowest z (first in input order
/// on z ties). Orientation and incircle tests are exact; exactly cocircular
/// ties resolve as if lower-indexed vertices sat lower on the lifting
/// paraboloid, so a cocircular quad keeps the diagonal through its lowest
/// vertex index. The result is the unique triangulation of the perturbed
/// lift, hence deterministic for a fixed input order. Triangles come out
/// canonically sorted. Pre: >= 3 distinct xy positions, not all collinear.
TriangulatedSurface delaunay(const PointCloud& cloud);

/// Linear interpolation of z at (x, y); nullopt outside the hull. Containment
/// uses the exact predicates, so queries on a shared edge give bit-identical
/// results from both triangles, and a query at a vertex returns that vertex's
/// z exactly.
std::optional<double> interpolate_z(const TriangulatedSurface& surface,
                                    double x, double y);

/// Wavefront OBJ: "v x y z" per vertex (12 significant digits) and 1-based
/// CCW "f a b c" faces.
void export_obj(const TriangulatedSurface& surface,
                const std::filesystem::path& path);

}  // namespace survscan::tin

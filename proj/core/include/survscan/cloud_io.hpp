// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "survscan/point_cloud.hpp"

namespace survscan {

/// kAuto picks by extension: ".sspc" means binary, anything else ASCII xyz.
enum class CloudFormat { kAuto, kXyzAscii, kSspcBinary };

/// ASCII xyz: one point per line, whitespace separated; columns are
/// "x y z", "x y z i", "x y z r g b" or "x y z i r g b" and the column count
/// is fixed per file. '#' starts a comment, blank lines are skipped.
/// Intensity i is a real in [0, 1]; r g b are integers in [0, 255].
/// Malformed input raises Error naming the 1-based line.
///
/// Binary sspc (all fields little-endian): magic "SSPC", u16 version (= 1),
/// u16 field mask (bit0 intensity, bit1 rgb, bit2 class), u64 point count,
/// 32-byte zero-padded frame tag, i64 epoch Unix seconds (-1 = absent); then
/// per point 3 x f64 coordinates followed by the channels the mask names
/// (f32 intensity, 3 x u8 rgb, u8 class). Round-trips are bit-exact.
PointCloud read_cloud(const std::filesystem::path& path,
                      CloudFormat format = CloudFormat::kAuto);

/// ASCII output keeps 9 decimals, which round-trips coordinates to 1e-9 m.
void write_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                 CloudFormat format = CloudFormat::kAuto);

}  // namespace survscan

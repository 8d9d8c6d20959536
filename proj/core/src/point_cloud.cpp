// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#include "survscan/point_cloud.hpp"

#include <cmath>
#include <sstream>

#include "survscan/error.hpp"

namespace survscan {

bool is_valid_class(std::uint8_t code) {
  switch (static_cast<PointClass>(code)) {
    case PointClass::kUnassigned:
    case PointClass::kNonGround:
    case PointClass::kGround:
    case PointClass::kTarget:
    case PointClass::kNoise:
      return true;
  }
  return false;
}

std::string FrameTag::str() const {
  return (kind == Kind::kLocal ? "local(" : "georeferenced(") + name + ")";
}

FrameTag FrameTag::parse(const std::string& s) {
  for (auto kind : {Kind::kLocal, Kind::kGeoreferenced}) {
    const std::string prefix =
        kind == Kind::kLocal ? "local(" : "georeferenced(";
    if (s.size() >= prefix.size() + 1 && s.back() == ')' &&
        s.compare(0, prefix.size(), prefix) == 0) {
      return {kind, s.substr(prefix.size(), s.size() - prefix.size() - 1)};
    }
  }
  throw Error("invalid frame tag \"" + s +
              "\" (expected local(name) or georeferenced(name))");
}

void PointCloud::validate() const {
  const std::size_t n = size();
  auto check_len = [n](std::size_t len, const char* channel) {
    if (len != 0 && len != n) {
      std::ostringstream os;
      os << channel << " channel holds " << len << " entries for " << n
         << " points";
      throw Error(os.str());
    }
  };
  check_len(intensities.size(), "intensity");
  check_len(colors.size(), "color");
  check_len(classes.size(), "class");

  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& p = positions[i];
    if (!std::isfinite(p.x()) || !std::isfinite(p.y()) ||
        !std::isfinite(p.z())) {
      std::ostringstream os;
      os << "point " << i << " has a non-finite coordinate";
      throw Error(os.str());
    }
  }
  for (std::size_t i = 0; i < intensities.size(); ++i) {
    const float v = intensities[i];
    if (!(v >= 0.0f && v <= 1.0f)) {
      std::ostringstream os;
      os << "point " << i << " intensity " << v << " outside [0, 1]";
      throw Error(os.str());
    }
  }
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (!is_valid_class(classes[i])) {
      std::ostringstream os;
      os << "point " << i << " has unknown class code "
         << static_cast<int>(classes[i]);
      throw Error(os.str());
    }
  }
}

PointCloud PointCloud::subset(const std::vector<std::size_t>& idx) const {
  PointCloud out;
  out.frame = frame;
  out.epoch = epoch;
  out.source = source;
  out.positions.reserve(idx.size());
  for (std::size_t i : idx) out.positions.push_back(positions[i]);
  if (has_intensity()) {
    out.intensities.reserve(idx.size());
    for (std::size_t i : idx) out.intensities.push_back(intensities[i]);
  }
  if (has_color()) {
    out.colors.reserve(idx.size());
    for (std::size_t i : idx) out.colors.push_back(colors[i]);
  }
  if (has_class()) {
    out.classes.reserve(idx.size());
    for (std::size_t i : idx) out.classes.push_back(classes[i]);
  }
  return out;
}

}  // namespace survscan

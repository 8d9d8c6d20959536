// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#include "survscan/preprocess.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "survscan/error.hpp"
#include "survscan/parallel.hpp"
#include "survscan/predicates.hpp"
#include "survscan/spatial_index.hpp"

namespace survscan {

namespace {

struct CellKey {
  std::int64_t x = 0, y = 0, z = 0;
  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a over the three words
    for (std::uint64_t w : {std::uint64_t(k.x), std::uint64_t(k.y),
                            std::uint64_t(k.z)}) {
      for (int i = 0; i < 8; ++i) {
        h ^= (w >> (8 * i)) & 0xff;
        h *= 1099511628211ull;
      }
    }
    return static_cast<std::size_t>(h);
  }
};

std::int64_t cell_of(double v, double pitch) {
  return static_cast<std::int64_t>(std::floor(v / pitch));
}

}  // namespace

DeduplicateResult deduplicate(const PointCloud& cloud, double tolerance) {
  if (!(tolerance > 0.0)) throw Error("deduplicate: tolerance must be > 0");
  std::unordered_set<CellKey, CellKeyHash> seen;
  seen.reserve(cloud.size());
  std::vector<std::size_t> keep;
  keep.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    const CellKey key{cell_of(p.x(), tolerance), cell_of(p.y(), tolerance),
                      cell_of(p.z(), tolerance)};
    if (seen.insert(key).second) keep.push_back(i);
  }
  DeduplicateResult result;
  result.removed = cloud.size() - keep.size();
  result.kept = cloud.subset(keep);
  return result;
}

OutlierRemovalResult remove_outliers(const PointCloud& cloud, std::size_t k,
                                     double alpha) {
  if (k < 1) throw Error("remove_outliers: k must be >= 1");
  if (cloud.size() <= k)
    throw Error("remove_outliers: insufficient points for k-neighborhood");
  if (!(alpha >= 0.0)) throw Error("remove_outliers: alpha must be >= 0");

  const std::size_t n = cloud.size();
  const SpatialIndex index(cloud);
  std::vector<double> score(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    const auto res = index.knn(cloud.positions[i], k + 1);
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t j : res) {
      if (j == i) continue;
      sum += (cloud.positions[j] - cloud.positions[i]).norm();
      if (++used == k) break;
    }
    score[i] = sum / static_cast<double>(used);
  });

  double mean = 0.0;
  for (double s : score) mean += s;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double s : score) var += (s - mean) * (s - mean);
  var /= static_cast<double>(n - 1);
  const double threshold = mean + alpha * std::sqrt(var);

  std::vector<std::size_t> keep, drop;
  for (std::size_t i = 0; i < n; ++i)
    (score[i] <= threshold ? keep : drop).push_back(i);

  OutlierRemovalResult result;
  result.kept = cloud.subset(keep);
  result.removed = cloud.subset(drop);
  return result;
}

PointCloud crop(const PointCloud& cloud, const BoxRegion& region) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    bool inside = true;
    for (int d = 0; d < 3; ++d)
      inside = inside && region.min[d] <= p[d] && p[d] <= region.max[d];
    if (inside) keep.push_back(i);
  }
  return cloud.subset(keep);
}

PointCloud crop(const PointCloud& cloud, const PolygonRegion& region) {
  std::vector<Eigen::Vector2d> poly = region.vertices;
  if (poly.size() >= 2 && poly.front() == poly.back()) poly.pop_back();
  if (poly.size() < 3)
    throw Error("polygon crop: need at least 3 distinct vertices");
  double twice_area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    twice_area += a.x() * b.y() - b.x() * a.y();
  }
  if (twice_area == 0.0) throw Error("polygon crop: polygon has zero area");

  const auto contains = [&poly](double px, double py) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
      const auto& a = poly[j];
      const auto& b = poly[i];
      if (geom::orient2d(a.x(), a.y(), b.x(), b.y(), px, py) == 0 &&
          std::min(a.x(), b.x()) <= px && px <= std::max(a.x(), b.x()) &&
          std::min(a.y(), b.y()) <= py && py <= std::max(a.y(), b.y()))
        return true;  // exactly on the boundary
      if ((a.y() > py) != (b.y() > py)) {
        const double xint =
            a.x() + (py - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
        if (px < xint) inside = !inside;
      }
    }
    return inside;
  };

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    if (contains(p.x(), p.y())) keep.push_back(i);
  }
  return cloud.subset(keep);
}

PointCloud classify_ground(const PointCloud& cloud, double cell,
                           double h_thresh) {
  if (!(cell > 0.0)) throw Error("classify_ground: cell must be > 0");
  if (!(h_thresh >= 0.0)) throw Error("classify_ground: h_thresh must be >= 0");

  std::unordered_map<CellKey, double, CellKeyHash> zmin;
  zmin.reserve(cloud.size());
  for (const Vec3& p : cloud.positions) {
    const CellKey key{cell_of(p.x(), cell), cell_of(p.y(), cell), 0};
    auto [it, inserted] = zmin.try_emplace(key, p.z());
    if (!inserted) it->second = std::min(it->second, p.z());
  }

  PointCloud out = cloud;
  out.classes.assign(cloud.size(),
                     static_cast<std::uint8_t>(PointClass::kNonGround));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    const CellKey key{cell_of(p.x(), cell), cell_of(p.y(), cell), 0};
    if (p.z() - zmin.at(key) <= h_thresh)
      out.classes[i] = static_cast<std::uint8_t>(PointClass::kGround);
  }
  return out;
}

namespace {

// Least-squares rotation + translation taking `src` onto `dst`; the shared
// core of estimate_rigid and the ICP inner loop.
RigidTransform solve_rigid(const std::vector<Vec3>& src,
                           const std::vector<Vec3>& dst) {
  const std::size_t n = src.size();
  Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(n);
  cd /= static_cast<double>(n);

  Eigen::Matrix3Xd centered(3, static_cast<Eigen::Index>(n));
  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 s = src[i] - cs;
    centered.col(static_cast<Eigen::Index>(i)) = s;
    cross += s * (dst[i] - cd).transpose();
  }
  const Eigen::JacobiSVD<Eigen::Matrix3Xd> extent(centered);
  if (extent.singularValues()(1) <= 1e-6)
    throw Error(
        "rigid fit: degenerate configuration (source points are collinear "
        "or coincident, the rotation is not determined)");

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  Eigen::Vector3d guard = Eigen::Vector3d::Ones();
  guard(2) = ((v * u.transpose()).determinant() < 0.0) ? -1.0 : 1.0;
  RigidTransform t;
  t.rotation = v * guard.asDiagonal() * u.transpose();
  t.translation = cd - t.rotation * cs;
  return t;
}

double rms_of(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
              const RigidTransform& t) {
  double sum = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i)
    sum += (t.apply(src[i]) - dst[i]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(src.size()));
}

}  // namespace

RegistrationResult estimate_rigid(std::span<const CorrespondencePair> pairs) {
  if (pairs.size() < 3) {
    std::ostringstream os;
    os << "rigid fit needs at least 3 correspondence pairs, got "
       << pairs.size();
    throw Error(os.str());
  }
  std::vector<Vec3> src, dst;
  src.reserve(pairs.size());
  dst.reserve(pairs.size());
  for (const auto& pair : pairs) {
    src.push_back(pair.source);
    dst.push_back(pair.destination);
  }

  RegistrationResult result;
  result.transform = solve_rigid(src, dst);
  double sum = 0.0;
  result.per_pair_residuals.reserve(pairs.size());
  for (const auto& pair : pairs) {
    const double r =
        (result.transform.apply(pair.source) - pair.destination).norm();
    result.per_pair_residuals.emplace_back(pair.id, r);
    sum += r * r;
  }
  result.rms_residual = std::sqrt(sum / static_cast<double>(pairs.size()));
  result.iterations = 1;
  result.rms_history = {result.rms_residual};
  return result;
}

std::pair<PointCloud, RegistrationResult> georeference(
    const PointCloud& cloud, std::span<const CorrespondencePair> control,
    const std::string& crs_name) {
  RegistrationResult result = estimate_rigid(control);
  FrameTag frame{FrameTag::Kind::kGeoreferenced, crs_name};
  PointCloud out = apply_transform(cloud, result.transform, frame);
  return {std::move(out), std::move(result)};
}

RegistrationResult icp_refine(const PointCloud& source,
                              const PointCloud& destination,
                              const RigidTransform& initial,
                              const IcpOptions& options) {
  initial.validate();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  RegistrationResult result;
  result.transform = initial;
  result.rms_residual = kInf;
  if (source.empty() || destination.empty() || options.max_iterations <= 0)
    return result;

  const SpatialIndex dest_index(destination);
  const double gate = options.max_correspondence_dist.value_or(
      destination.size() >= 2 ? 5.0 * mean_nn_spacing(destination) : kInf);

  const std::size_t n = source.size();
  RigidTransform current = initial;
  double best_rms = kInf;
  std::vector<std::size_t> match(n);
  std::vector<Vec3> src, dst;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    constexpr std::size_t kUnmatched = std::numeric_limits<std::size_t>::max();
    parallel_for(n, [&](std::size_t i) {
      const Vec3 moved = current.apply(source.positions[i]);
      const auto nn = dest_index.knn(moved, 1);
      match[i] = (!nn.empty() &&
                  (destination.positions[nn[0]] - moved).norm() <= gate)
                     ? nn[0]
                     : kUnmatched;
    });
    src.clear();
    dst.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (match[i] == kUnmatched) continue;
      src.push_back(source.positions[i]);
      dst.push_back(destination.positions[match[i]]);
    }
    if (src.size() < 3) break;

    RigidTransform next;
    try {
      next = solve_rigid(src, dst);
    } catch (const Error&) {
      break;  // matched set degenerate; keep the best transform so far
    }
    const double rms = rms_of(src, dst, next);
    if (rms > best_rms) break;  // would get worse: roll back and stop

    const double improvement = best_rms - rms;
    current = next;
    result.transform = next;
    result.rms_residual = rms;
    result.rms_history.push_back(rms);
    ++result.iterations;
    best_rms = rms;
    if (rms < options.converge_tol || improvement < options.converge_tol)
      break;
  }
  return result;
}

std::vector<CorrespondencePair> read_correspondences(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  std::vector<CorrespondencePair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string_view> tokens;
    std::string_view view = line;
    std::size_t i = 0;
    while (i < view.size()) {
      while (i < view.size() && (view[i] == ' ' || view[i] == '\t')) ++i;
      if (i >= view.size() || view[i] == '#') break;
      const std::size_t start = i;
      while (i < view.size() && view[i] != ' ' && view[i] != '\t') ++i;
      tokens.push_back(view.substr(start, i - start));
    }
    if (tokens.empty()) continue;
    if (tokens.size() != 7) {
      std::ostringstream os;
      os << path.string() << ":" << line_no
         << ": expected \"id sx sy sz dx dy dz\", got " << tokens.size()
         << " fields";
      throw Error(os.str());
    }
    CorrespondencePair pair;
    pair.id = std::string(tokens[0]);
    double values[6];
    for (int c = 0; c < 6; ++c) {
      const std::string_view tok = tokens[c + 1];
      auto [ptr, ec] =
          std::from_chars(tok.data(), tok.data() + tok.size(), values[c]);
      if (ec != std::errc() || ptr != tok.data() + tok.size() ||
          !std::isfinite(values[c])) {
        std::ostringstream os;
        os << path.string() << ":" << line_no << ": invalid number \"" << tok
           << "\"";
        throw Error(os.str());
      }
    }
    pair.source = Vec3(values[0], values[1], values[2]);
    pair.destination = Vec3(values[3], values[4], values[5]);
    pairs.push_back(std::move(pair));
  }
  if (in.bad()) throw Error("failed while reading " + path.string());
  return pairs;
}

}  // namespace survscan

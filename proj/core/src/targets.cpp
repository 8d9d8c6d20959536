// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#include "survscan/targets.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include "survscan/error.hpp"

namespace survscan::targets {

namespace {

double rms_residual(std::span<const Vec3> points, const Vec3& center,
                    double radius) {
  double sum = 0.0;
  for (const Vec3& p : points) {
    const double f = (p - center).norm() - radius;
    sum += f * f;
  }
  return std::sqrt(sum / static_cast<double>(points.size()));
}

// Damped Gauss-Newton on the geometric residuals |p - c| - r. The radius is
// frozen when fix_radius is set. Steps that would not reduce the rms are
// halved away, so the iteration never diverges from its start.
void refine_sphere(std::span<const Vec3> points, Vec3& center, double& radius,
                   bool fix_radius) {
  const int params = fix_radius ? 3 : 4;
  double current = rms_residual(points, center, radius);
  for (int iter = 0; iter < 60; ++iter) {
    Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(params, params);
    Eigen::VectorXd jtf = Eigen::VectorXd::Zero(params);
    for (const Vec3& p : points) {
      const Vec3 d = p - center;
      const double dist = d.norm();
      if (dist <= 0.0) continue;
      const double f = dist - radius;
      Eigen::VectorXd row(params);
      row.head<3>() = -d / dist;
      if (!fix_radius) row(3) = -1.0;
      jtj += row * row.transpose();
      jtf += row * f;
    }
    const Eigen::VectorXd step = jtj.ldlt().solve(-jtf);
    if (!step.allFinite()) break;

    double scale = 1.0;
    bool accepted = false;
    for (int halvings = 0; halvings < 25; ++halvings, scale *= 0.5) {
      const Vec3 c_try = center + scale * step.head<3>();
      const double r_try = fix_radius ? radius : radius + scale * step(3);
      if (r_try <= 0.0) continue;
      const double rms_try = rms_residual(points, c_try, r_try);
      if (rms_try <= current) {
        center = c_try;
        radius = r_try;
        const bool converged = current - rms_try < 1e-15 * (1.0 + current);
        current = rms_try;
        accepted = true;
        if (converged) iter = 60;  // no meaningful progress left
        break;
      }
    }
    if (!accepted) break;
  }
}

}  // namespace

SphereFit fit_sphere(std::span<const Vec3> points,
                     std::optional<double> known_radius) {
  if (known_radius) {
    if (!(*known_radius > 0.0))
      throw Error("sphere fit: known radius must be > 0");
    if (points.size() < 3)
      throw Error(
          "sphere fit: degenerate sphere configuration (need at least 3 "
          "points with a known radius)");
  } else if (points.size() < 4) {
    throw Error(
        "sphere fit: degenerate sphere configuration (need at least 4 "
        "points)");
  }

  SphereFit fit;
  if (!known_radius) {
    // Algebraic initialization: |p|^2 = 2 p . c + (r^2 - |c|^2) is linear in
    // (c, r^2 - |c|^2); coplanar points make the system rank deficient.
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd a(n, 4);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec3& p = points[static_cast<std::size_t>(i)];
      a(i, 0) = 2.0 * p.x();
      a(i, 1) = 2.0 * p.y();
      a(i, 2) = 2.0 * p.z();
      a(i, 3) = 1.0;
      b(i) = p.squaredNorm();
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.singularValues()(3) <= 1e-12 * svd.singularValues()(0))
      throw Error(
          "sphere fit: degenerate sphere configuration (coplanar points)");
    const Eigen::Vector4d w = svd.solve(b);
    fit.center = w.head<3>();
    const double r2 = w(3) + fit.center.squaredNorm();
    if (!(r2 > 0.0)) throw Error("sphere fit: degenerate sphere configuration");
    fit.radius = std::sqrt(r2);
    refine_sphere(points, fit.center, fit.radius, false);
    fit.rms = rms_residual(points, fit.center, fit.radius);
    return fit;
  }

  // Known radius: the center must sit at offset h = sqrt(r^2 - s^2) from the
  // centroid along the cap's plane normal, on one of the two sides. Both
  // seeds are refined and the lower rms wins.
  const double radius = *known_radius;
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double spread2 = 0.0;
  for (const Vec3& p : points) {
    const Vec3 d = p - centroid;
    cov += d * d.transpose();
    spread2 += d.squaredNorm();
  }
  spread2 /= static_cast<double>(points.size());
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Vec3 normal = eig.eigenvectors().col(0);  // smallest eigenvalue
  const double h =
      std::sqrt(std::max(radius * radius - spread2, 0.0));

  SphereFit best;
  best.rms = std::numeric_limits<double>::infinity();
  for (const double side : {1.0, -1.0}) {
    Vec3 center = centroid + side * h * normal;
    double r = radius;
    refine_sphere(points, center, r, true);
    const double rms = rms_residual(points, center, r);
    if (rms < best.rms) {
      best.center = center;
      best.radius = r;
      best.rms = rms;
    }
  }
  return best;
}

TargetObservation extract_target(const PointCloud& cloud,
                                 const Vec3& approx_center,
                                 double search_radius, double sphere_radius,
                                 std::string target_id, std::string scan_id) {
  if (!(search_radius > 0.0))
    throw Error("extract_target: search_radius must be > 0");
  std::vector<Vec3> nearby;
  const double r2 = search_radius * search_radius;
  for (const Vec3& p : cloud.positions)
    if ((p - approx_center).squaredNorm() <= r2) nearby.push_back(p);

  if (nearby.size() < 10) {
    std::ostringstream os;
    os << "target not found";
    if (!target_id.empty()) os << " (" << target_id << ")";
    os << ": only " << nearby.size() << " points within " << search_radius
       << " m of the approximate center, need at least 10";
    throw Error(os.str());
  }

  const SphereFit fit = fit_sphere(nearby, sphere_radius);
  TargetObservation obs;
  obs.target_id = std::move(target_id);
  obs.scan_id = std::move(scan_id);
  obs.center = fit.center;
  obs.fit_rms = fit.rms;
  obs.point_count = nearby.size();
  return obs;
}

std::size_t AccuracyReport::pair_index(std::size_t i, std::size_t j) const {
  if (i > j) std::swap(i, j);
  const std::size_t m = target_ids.size();
  if (i == j || j >= m)
    throw Error("accuracy report: invalid target pair index");
  return i * (2 * m - i - 1) / 2 + (j - i - 1);
}

double AccuracyReport::mean_at(std::size_t i, std::size_t j) const {
  return mean_m[pair_index(i, j)];
}

double AccuracyReport::std_at(std::size_t i, std::size_t j) const {
  return std_mm[pair_index(i, j)];
}

namespace {

// Shared reduction: per-pair samples (one value per scan) to mean and sample
// std. Samples are sorted first, so scan order can never affect the sums.
AccuracyReport reduce_samples(std::vector<std::string> ids,
                              std::vector<std::vector<double>> samples,
                              std::size_t scan_count, double tolerance_mm) {
  AccuracyReport report;
  report.target_ids = std::move(ids);
  report.scan_count = scan_count;
  report.tolerance_mm = tolerance_mm;
  report.mean_m.reserve(samples.size());
  report.std_mm.reserve(samples.size());

  for (auto& sample : samples) {
    std::sort(sample.begin(), sample.end());
    double sum = 0.0;
    for (double d : sample) sum += d;
    const double mean = sum / static_cast<double>(sample.size());
    double varsum = 0.0;
    for (double d : sample) varsum += (d - mean) * (d - mean);
    const double std_m =
        std::sqrt(varsum / static_cast<double>(sample.size() - 1));
    report.mean_m.push_back(mean);
    report.std_mm.push_back(std_m * 1000.0);
  }
  report.max_std_mm = 0.0;
  for (double s : report.std_mm)
    report.max_std_mm = std::max(report.max_std_mm, s);
  report.pass = report.max_std_mm <= tolerance_mm;
  return report;
}

std::vector<std::string> sorted_union_check(
    std::span<const ScanObservations> scans) {
  std::set<std::string> ids;
  for (const ScanObservations& scan : scans)
    for (const TargetObservation& obs : scan.targets)
      ids.insert(obs.target_id);
  std::vector<std::string> sorted(ids.begin(), ids.end());

  for (const ScanObservations& scan : scans) {
    std::map<std::string, int> count;
    for (const TargetObservation& obs : scan.targets)
      ++count[obs.target_id];
    for (const std::string& id : sorted) {
      const auto it = count.find(id);
      if (it == count.end())
        throw Error("distance stats: scan \"" + scan.scan_id +
                    "\" is missing target \"" + id + "\"");
      if (it->second > 1)
        throw Error("distance stats: scan \"" + scan.scan_id +
                    "\" observes target \"" + id + "\" more than once");
    }
  }
  return sorted;
}

}  // namespace

AccuracyReport distance_stats(std::span<const ScanObservations> scans,
                              double tolerance_mm) {
  if (scans.size() < 2)
    throw Error("distance stats: need at least 2 scans");
  std::vector<std::string> ids = sorted_union_check(scans);
  const std::size_t m = ids.size();
  if (m < 2) throw Error("distance stats: need at least 2 targets");

  const std::size_t pairs = m * (m - 1) / 2;
  std::vector<std::vector<double>> samples(pairs);
  for (auto& s : samples) s.reserve(scans.size());

  for (const ScanObservations& scan : scans) {
    std::unordered_map<std::string_view, const Vec3*> center;
    for (const TargetObservation& obs : scan.targets)
      center[obs.target_id] = &obs.center;
    std::size_t slot = 0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j, ++slot)
        samples[slot].push_back(
            (*center.at(ids[i]) - *center.at(ids[j])).norm());
  }
  return reduce_samples(std::move(ids), std::move(samples), scans.size(),
                        tolerance_mm);
}

AccuracyReport distance_stats_from_distances(
    std::span<const ScanDistances> scans, double tolerance_mm) {
  if (scans.size() < 2)
    throw Error("distance stats: need at least 2 scans");
  std::set<std::string> id_set;
  for (const ScanDistances& scan : scans) {
    for (const PairDistance& pd : scan.distances) {
      if (pd.a == pd.b)
        throw Error("distance stats: scan \"" + scan.scan_id +
                    "\" lists a pair with identical targets \"" + pd.a +
                    "\"");
      if (!std::isfinite(pd.distance_m) || pd.distance_m < 0.0)
        throw Error("distance stats: scan \"" + scan.scan_id +
                    "\" has an invalid distance for pair \"" + pd.a +
                    "\" - \"" + pd.b + "\"");
      id_set.insert(pd.a);
      id_set.insert(pd.b);
    }
  }
  std::vector<std::string> ids(id_set.begin(), id_set.end());
  const std::size_t m = ids.size();
  if (m < 2) throw Error("distance stats: need at least 2 targets");

  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < m; ++i) index[ids[i]] = i;
  const std::size_t pairs = m * (m - 1) / 2;
  const auto slot_of = [m](std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    return i * (2 * m - i - 1) / 2 + (j - i - 1);
  };

  std::vector<std::vector<double>> samples(pairs);
  for (auto& s : samples) s.reserve(scans.size());
  for (const ScanDistances& scan : scans) {
    std::vector<char> seen(pairs, 0);
    for (const PairDistance& pd : scan.distances) {
      const std::size_t slot = slot_of(index.at(pd.a), index.at(pd.b));
      if (seen[slot])
        throw Error("distance stats: scan \"" + scan.scan_id +
                    "\" lists pair \"" + pd.a + "\" - \"" + pd.b +
                    "\" more than once");
      seen[slot] = 1;
      samples[slot].push_back(pd.distance_m);
    }
    for (std::size_t slot = 0; slot < pairs; ++slot) {
      if (!seen[slot]) {
        // Recover (i, j) for the message.
        std::size_t i = 0, j = 0, s = slot;
        for (i = 0; i < m; ++i) {
          const std::size_t row = m - i - 1;
          if (s < row) {
            j = i + 1 + s;
            break;
          }
          s -= row;
        }
        throw Error("distance stats: scan \"" + scan.scan_id +
                    "\" is missing pair \"" + ids[i] + "\" - \"" + ids[j] +
                    "\"");
      }
    }
  }
  return reduce_samples(std::move(ids), std::move(samples), scans.size(),
                        tolerance_mm);
}

void write_accuracy_json(const AccuracyReport& report,
                         const std::filesystem::path& path) {
  const auto round_to = [](double v, double step) {
    return std::round(v / step) * step;
  };
  nlohmann::json doc;
  doc["targets"] = report.target_ids;
  doc["scan_count"] = report.scan_count;
  doc["pairs"] = nlohmann::json::array();
  const std::size_t m = report.target_ids.size();
  std::size_t slot = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j, ++slot) {
      doc["pairs"].push_back(
          nlohmann::json{{"a", report.target_ids[i]},
                         {"b", report.target_ids[j]},
                         {"mean_m", round_to(report.mean_m[slot], 0.001)},
                         {"std_mm", round_to(report.std_mm[slot], 0.1)}});
    }
  }
  doc["max_std_mm"] = round_to(report.max_std_mm, 0.1);
  doc["tolerance_mm"] = report.tolerance_mm;
  doc["verdict"] = report.pass ? "pass" : "fail";
  doc["distance_type"] = report.distance_type;
  doc["estimator"] = report.estimator;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  if (!out.good()) throw Error("failed while writing " + path.string());
}

AccuracyReport read_accuracy_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  AccuracyReport report;
  try {
    const nlohmann::json doc = nlohmann::json::parse(in);
    report.target_ids = doc.at("targets").get<std::vector<std::string>>();
    report.scan_count = doc.at("scan_count").get<std::size_t>();
    report.max_std_mm = doc.at("max_std_mm").get<double>();
    report.tolerance_mm = doc.at("tolerance_mm").get<double>();
    const std::string verdict = doc.at("verdict").get<std::string>();
    if (verdict != "pass" && verdict != "fail")
      throw Error("verdict must be \"pass\" or \"fail\"");
    report.pass = verdict == "pass";
    report.distance_type = doc.at("distance_type").get<std::string>();
    report.estimator = doc.at("estimator").get<std::string>();

    const std::size_t m = report.target_ids.size();
    const std::size_t pairs = m * (m - 1) / 2;
    report.mean_m.assign(pairs, 0.0);
    report.std_mm.assign(pairs, 0.0);
    std::vector<char> seen(pairs, 0);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < m; ++i) index[report.target_ids[i]] = i;
    for (const auto& entry : doc.at("pairs")) {
      const auto ia = index.find(entry.at("a").get<std::string>());
      const auto ib = index.find(entry.at("b").get<std::string>());
      if (ia == index.end() || ib == index.end())
        throw Error("pair references an unknown target");
      const std::size_t slot = report.pair_index(ia->second, ib->second);
      if (seen[slot]) throw Error("duplicate pair entry");
      seen[slot] = 1;
      report.mean_m[slot] = entry.at("mean_m").get<double>();
      report.std_mm[slot] = entry.at("std_mm").get<double>();
    }
    for (std::size_t slot = 0; slot < pairs; ++slot)
      if (!seen[slot]) throw Error("missing pair entry");
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return report;
}

namespace {

std::vector<std::string_view> split_tokens(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size() || line[i] == '#') break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

double parse_field(std::string_view token, const std::filesystem::path& path,
                   std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() ||
      !std::isfinite(v)) {
    std::ostringstream os;
    os << path.string() << ":" << line_no << ": invalid number \"" << token
       << "\"";
    throw Error(os.str());
  }
  return v;
}

}  // namespace

std::vector<ScanObservations> read_observations(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  std::vector<ScanObservations> scans;
  std::unordered_map<std::string, std::size_t> slot;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tokens = split_tokens(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 5) {
      std::ostringstream os;
      os << path.string() << ":" << line_no
         << ": expected \"scan_id target_id x y z\", got " << tokens.size()
         << " fields";
      throw Error(os.str());
    }
    TargetObservation obs;
    obs.scan_id = std::string(tokens[0]);
    obs.target_id = std::string(tokens[1]);
    obs.center = Vec3(parse_field(tokens[2], path, line_no),
                      parse_field(tokens[3], path, line_no),
                      parse_field(tokens[4], path, line_no));
    auto [it, inserted] = slot.try_emplace(obs.scan_id, scans.size());
    if (inserted) scans.push_back(ScanObservations{obs.scan_id, {}});
    scans[it->second].targets.push_back(std::move(obs));
  }
  if (in.bad()) throw Error("failed while reading " + path.string());
  return scans;
}

std::vector<ScanDistances> read_distances(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  std::vector<ScanDistances> scans;
  std::unordered_map<std::string, std::size_t> slot;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tokens = split_tokens(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 4) {
      std::ostringstream os;
      os << path.string() << ":" << line_no
         << ": expected \"scan_id target_a target_b distance_m\", got "
         << tokens.size() << " fields";
      throw Error(os.str());
    }
    const std::string scan_id(tokens[0]);
    PairDistance pd;
    pd.a = std::string(tokens[1]);
    pd.b = std::string(tokens[2]);
    pd.distance_m = parse_field(tokens[3], path, line_no);
    auto [it, inserted] = slot.try_emplace(scan_id, scans.size());
    if (inserted) scans.push_back(ScanDistances{scan_id, {}});
    scans[it->second].distances.push_back(std::move(pd));
  }
  if (in.bad()) throw Error("failed while reading " + path.string());
  return scans;
}

}  // namespace survscan::targets

// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#include "survscan/tin.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "survscan/error.hpp"
#include "survscan/predicates.hpp"

namespace survscan::tin {

namespace {

using std::uint32_t;
using geom::incircle_perturbed;
using geom::orient2d;

constexpr uint32_t kGhost = 0xffffffffu;  // hull-exterior pseudo-vertex
constexpr uint32_t kNone = 0xffffffffu;

struct Vertex {
  double x, y, z;
};

/// Collapses xy positions within `tol` of an earlier kept point onto that
/// point (its xy stays, its z drops to the cluster minimum; earlier input
/// wins z ties). Kept points end up pairwise farther than tol apart.
std::vector<Vertex> dedupe_xy(const PointCloud& cloud, double tol) {
  struct Key {
    std::int64_t x, y;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = 1469598103934665603ull;
      for (std::uint64_t w : {std::uint64_t(k.x), std::uint64_t(k.y)}) {
        for (int i = 0; i < 8; ++i) {
          h ^= (w >> (8 * i)) & 0xff;
          h *= 1099511628211ull;
        }
      }
      return static_cast<std::size_t>(h);
    }
  };

  std::vector<Vertex> kept;
  kept.reserve(cloud.size());
  std::unordered_map<Key, std::vector<uint32_t>, KeyHash> grid;
  grid.reserve(cloud.size());
  const double tol2 = tol * tol;

  for (const Vec3& p : cloud.positions) {
    const auto cx = static_cast<std::int64_t>(std::floor(p.x() / tol));
    const auto cy = static_cast<std::int64_t>(std::floor(p.y() / tol));
    uint32_t hit = kNone;
    for (std::int64_t dx = -1; dx <= 1 && hit == kNone; ++dx) {
      for (std::int64_t dy = -1; dy <= 1 && hit == kNone; ++dy) {
        const auto it = grid.find(Key{cx + dx, cy + dy});
        if (it == grid.end()) continue;
        for (uint32_t idx : it->second) {
          const double ddx = kept[idx].x - p.x();
          const double ddy = kept[idx].y - p.y();
          if (ddx * ddx + ddy * ddy <= tol2) {
            hit = idx;
            break;
          }
        }
      }
    }
    if (hit != kNone) {
      kept[hit].z = std::min(kept[hit].z, p.z());
    } else {
      kept.push_back(Vertex{p.x(), p.y(), p.z()});
      grid[Key{cx, cy}].push_back(static_cast<uint32_t>(kept.size() - 1));
    }
  }
  return kept;
}

struct Tri {
  std::array<uint32_t, 3> v;    // CCW; ghosts carry kGhost in one slot
  std::array<uint32_t, 3> adj;  // adj[i] faces the edge opposite v[i]
};

class Triangulator {
 public:
  explicit Triangulator(std::vector<Vertex> verts)
      : verts_(std::move(verts)) {}

  std::vector<std::array<uint32_t, 3>> run() {
    const uint32_t n = static_cast<uint32_t>(verts_.size());
    uint32_t j0 = kNone;
    for (uint32_t j = 2; j < n; ++j) {
      if (ort(0, 1, j) != 0) {
        j0 = j;
        break;
      }
    }
    if (j0 == kNone)
      throw Error("triangulation: degenerate input (xy positions are all collinear)");

    init_triangle(j0);
    for (uint32_t i = 2; i < n; ++i) {
      if (i == j0) continue;
      insert(i);
    }

    std::vector<std::array<uint32_t, 3>> out;
    for (uint32_t t = 0; t < tris_.size(); ++t) {
      if (!alive_[t] || is_ghost(t)) continue;
      std::array<uint32_t, 3> tri = tris_[t].v;
      const int m = static_cast<int>(
          std::min_element(tri.begin(), tri.end()) - tri.begin());
      out.push_back({tri[m], tri[(m + 1) % 3], tri[(m + 2) % 3]});
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  int ort(uint32_t a, uint32_t b, uint32_t c) const {
    return orient2d(verts_[a].x, verts_[a].y, verts_[b].x, verts_[b].y,
                    verts_[c].x, verts_[c].y);
  }

  bool is_ghost(uint32_t t) const {
    const auto& v = tris_[t].v;
    return v[0] == kGhost || v[1] == kGhost || v[2] == kGhost;
  }

  uint32_t add_tri(uint32_t a, uint32_t b, uint32_t c) {
    tris_.push_back(Tri{{a, b, c}, {kNone, kNone, kNone}});
    alive_.push_back(true);
    mark_.push_back(0);
    in_cavity_.push_back(false);
    return static_cast<uint32_t>(tris_.size() - 1);
  }

  void link(uint32_t t, int side, uint32_t other) {
    tris_[t].adj[static_cast<std::size_t>(side)] = other;
  }

  // Replaces `from` with `to` in the adjacency of triangle t.
  void relink(uint32_t t, uint32_t from, uint32_t to) {
    for (int e = 0; e < 3; ++e) {
      if (tris_[t].adj[static_cast<std::size_t>(e)] == from) {
        tris_[t].adj[static_cast<std::size_t>(e)] = to;
        return;
      }
    }
  }

  void init_triangle(uint32_t j0) {
    uint32_t a = 0, b = 1, c = j0;
    if (ort(a, b, c) < 0) std::swap(b, c);
    const uint32_t real = add_tri(a, b, c);
    const uint32_t gab = add_tri(b, a, kGhost);  // hull edge a -> b
    const uint32_t gbc = add_tri(c, b, kGhost);  // hull edge b -> c
    const uint32_t gca = add_tri(a, c, kGhost);  // hull edge c -> a
    // Real triangle: adj[i] faces edge (v[i+1], v[i+2]).
    link(real, 2, gab);  // edge (a, b)
    link(real, 0, gbc);  // edge (b, c)
    link(real, 1, gca);  // edge (c, a)
    // Ghost (v, u, G): adj[2] = real across (v, u); adj[0] across (u, G) is
    // the previous hull edge's ghost; adj[1] across (G, v) is the next one.
    link(gab, 2, real);
    link(gbc, 2, real);
    link(gca, 2, real);
    link(gab, 0, gca);
    link(gab, 1, gbc);
    link(gbc, 0, gab);
    link(gbc, 1, gca);
    link(gca, 0, gbc);
    link(gca, 1, gab);
    hint_ = real;
  }

  // Is p (by vertex index) strictly inside the open segment (s, t)?
  // Pre: p is exactly collinear with s and t.
  bool inside_open_segment(uint32_t s, uint32_t t, uint32_t p) const {
    const Vertex& vs = verts_[s];
    const Vertex& vt = verts_[t];
    const Vertex& vp = verts_[p];
    if (std::fabs(vt.x - vs.x) >= std::fabs(vt.y - vs.y)) {
      return (vs.x < vp.x && vp.x < vt.x) || (vt.x < vp.x && vp.x < vs.x);
    }
    return (vs.y < vp.y && vp.y < vt.y) || (vt.y < vp.y && vp.y < vs.y);
  }

  // Perturbed circumdisk membership of vertex p in triangle t's disk.
  bool in_disk(uint32_t t, uint32_t p) const {
    const auto& v = tris_[t].v;
    int g = -1;
    for (int i = 0; i < 3; ++i)
      if (v[static_cast<std::size_t>(i)] == kGhost) g = i;
    if (g < 0) {
      const Vertex& a = verts_[v[0]];
      const Vertex& b = verts_[v[1]];
      const Vertex& c = verts_[v[2]];
      const Vertex& q = verts_[p];
      return incircle_perturbed(a.x, a.y, long(v[0]), b.x, b.y, long(v[1]),
                                c.x, c.y, long(v[2]), q.x, q.y, long(p)) > 0;
    }
    // Ghost over hull edge t2 -> t1 where the stored non-ghost edge runs
    // s -> t: outside-opening half plane plus the open edge itself.
    const uint32_t s = v[static_cast<std::size_t>((g + 1) % 3)];
    const uint32_t e = v[static_cast<std::size_t>((g + 2) % 3)];
    const int side = ort(e, s, p);  // hull edge is e -> s
    if (side < 0) return true;
    return side == 0 && inside_open_segment(s, e, p);
  }

  // Finds a triangle whose perturbed disk contains p: visibility walk from
  // the latest created real triangle, with a linear scan as the safety net.
  uint32_t locate(uint32_t p) {
    uint32_t cur = hint_;
    std::size_t steps = 0;
    const std::size_t cap = 4 * tris_.size() + 64;
    while (steps++ < cap) {
      if (is_ghost(cur)) return cur;  // entered through a hull edge: in disk
      const auto& tv = tris_[cur].v;
      bool moved = false;
      for (int e = 0; e < 3 && !moved; ++e) {
        const uint32_t x = tv[static_cast<std::size_t>((e + 1) % 3)];
        const uint32_t y = tv[static_cast<std::size_t>((e + 2) % 3)];
        if (ort(x, y, p) < 0) {
          cur = tris_[cur].adj[static_cast<std::size_t>(e)];
          moved = true;
        }
      }
      if (!moved) return cur;  // p inside or on the boundary of cur
    }
    for (uint32_t t = 0; t < tris_.size(); ++t)
      if (alive_[t] && in_disk(t, p)) return t;
    throw Error("triangulation: point location failed");  // unreachable
  }

  void insert(uint32_t p) {
    ++epoch_;
    const uint32_t seed = locate(p);

    // Flood the cavity: every triangle whose perturbed disk contains p.
    cavity_.clear();
    boundary_.clear();
    stack_.clear();
    mark_[seed] = epoch_;
    in_cavity_[seed] = true;
    stack_.push_back(seed);
    while (!stack_.empty()) {
      const uint32_t t = stack_.back();
      stack_.pop_back();
      cavity_.push_back(t);
      for (int e = 0; e < 3; ++e) {
        const uint32_t nb = tris_[t].adj[static_cast<std::size_t>(e)];
        if (mark_[nb] != epoch_) {
          mark_[nb] = epoch_;
          in_cavity_[nb] = in_disk(nb, p);
          if (in_cavity_[nb]) stack_.push_back(nb);
        }
        if (!in_cavity_[nb]) boundary_.push_back({t, e});
      }
    }

    // One new triangle (p, x, y) per boundary edge (x, y); ghosts when the
    // edge touches the hull pseudo-vertex.
    by_x_.clear();
    by_y_.clear();
    new_tris_.clear();
    for (const auto& [t, e] : boundary_) {
      const auto& tv = tris_[t].v;
      const uint32_t x = tv[static_cast<std::size_t>((e + 1) % 3)];
      const uint32_t y = tv[static_cast<std::size_t>((e + 2) % 3)];
      const uint32_t outer = tris_[t].adj[static_cast<std::size_t>(e)];
      const uint32_t nt = add_tri(p, x, y);
      link(nt, 0, outer);
      relink(outer, t, nt);
      by_x_[x] = nt;
      by_y_[y] = nt;
      new_tris_.push_back(nt);
      if (x != kGhost && y != kGhost) hint_ = nt;
    }
    for (const uint32_t nt : new_tris_) {
      const auto& tv = tris_[nt].v;
      link(nt, 1, by_x_.at(tv[2]));  // edge (y, p) meets the tri whose x == y
      link(nt, 2, by_y_.at(tv[1]));  // edge (p, x) meets the tri whose y == x
    }
    for (const uint32_t t : cavity_) alive_[t] = false;
  }

  std::vector<Vertex> verts_;
  std::vector<Tri> tris_;
  std::vector<bool> alive_;
  std::vector<uint32_t> mark_;
  std::vector<bool> in_cavity_;
  std::vector<uint32_t> cavity_;
  std::vector<std::pair<uint32_t, int>> boundary_;
  std::vector<uint32_t> stack_;
  std::vector<uint32_t> new_tris_;
  std::unordered_map<uint32_t, uint32_t> by_x_;
  std::unordered_map<uint32_t, uint32_t> by_y_;
  uint32_t hint_ = 0;
  uint32_t epoch_ = 0;
};

}  // namespace

TriangulatedSurface delaunay(const PointCloud& cloud) {
  constexpr double kXyTolerance = 1e-9;
  std::vector<Vertex> verts = dedupe_xy(cloud, kXyTolerance);
  if (verts.size() < 3)
    throw Error("triangulation: degenerate input (fewer than 3 distinct xy positions)");

  TriangulatedSurface surface;
  surface.vertices.reserve(verts.size());
  for (const Vertex& v : verts) surface.vertices.emplace_back(v.x, v.y, v.z);
  surface.triangles = Triangulator(std::move(verts)).run();
  return surface;
}

std::optional<double> interpolate_z(const TriangulatedSurface& surface,
                                    double x, double y) {
  const auto& vs = surface.vertices;
  for (const auto& tri : surface.triangles) {
    const Vec3& a = vs[tri[0]];
    const Vec3& b = vs[tri[1]];
    const Vec3& c = vs[tri[2]];
    const int oab = orient2d(a.x(), a.y(), b.x(), b.y(), x, y);
    if (oab < 0) continue;
    const int obc = orient2d(b.x(), b.y(), c.x(), c.y(), x, y);
    if (obc < 0) continue;
    const int oca = orient2d(c.x(), c.y(), a.x(), a.y(), x, y);
    if (oca < 0) continue;

    const int zeros = (oab == 0) + (obc == 0) + (oca == 0);
    if (zeros == 0) {
      const double d =
          (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
      const double wa =
          ((b.x() - x) * (c.y() - y) - (b.y() - y) * (c.x() - x)) / d;
      const double wb =
          ((c.x() - x) * (a.y() - y) - (c.y() - y) * (a.x() - x)) / d;
      const double wc = 1.0 - wa - wb;
      return wa * a.z() + wb * b.z() + wc * c.z();
    }
    if (zeros == 2) {  // exactly at a vertex
      if (oab == 0 && oca == 0) return a.z();
      if (oab == 0 && obc == 0) return b.z();
      return c.z();
    }
    // On one edge: interpolate along it with the endpoints in index order,
    // so both triangles sharing the edge evaluate the identical expression.
    std::uint32_t i0, i1;
    if (oab == 0) {
      i0 = tri[0];
      i1 = tri[1];
    } else if (obc == 0) {
      i0 = tri[1];
      i1 = tri[2];
    } else {
      i0 = tri[2];
      i1 = tri[0];
    }
    if (i0 > i1) std::swap(i0, i1);
    const Vec3& p0 = vs[i0];
    const Vec3& p1 = vs[i1];
    const double t =
        (std::fabs(p1.x() - p0.x()) >= std::fabs(p1.y() - p0.y()))
            ? (x - p0.x()) / (p1.x() - p0.x())
            : (y - p0.y()) / (p1.y() - p0.y());
    return p0.z() + t * (p1.z() - p0.z());
  }
  return std::nullopt;
}

void export_obj(const TriangulatedSurface& surface,
                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  char buf[160];
  for (const Vec3& v : surface.vertices) {
    std::snprintf(buf, sizeof buf, "v %.12g %.12g %.12g\n", v.x(), v.y(),
                  v.z());
    out << buf;
  }
  for (const auto& t : surface.triangles) {
    std::snprintf(buf, sizeof buf, "f %u %u %u\n", t[0] + 1, t[1] + 1,
                  t[2] + 1);
    out << buf;
  }
  if (!out.good()) throw Error("failed while writing " + path.string());
}

}  // namespace survscan::tin

// Copyright 2026 The scenemotion Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Ground-plane navigation: occupancy grid, A*, string pulling, sub-goals.
//
// Grid coordinates: column c runs along world x, row r along world z, cell
// index r * width + c. Step costs are fixed-point integers so that equal
// paths compare exactly.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "scenemotion/error.hpp"
#include "scenemotion/kinematics.hpp"
#include "scenemotion/state.hpp"
#include "scenemotion/voxel.hpp"

namespace scenemotion {

inline constexpr std::int64_t kStraightCost = 1'000'000;
inline constexpr std::int64_t kDiagonalCost = 1'414'214;

struct NavGrid {
  double cellSize = 0.25;
  double radius = 0.3;
  Vec2 origin = Vec2::Zero();  // world (x, z) of the lower corner of cell 0
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> blocked;

  int cellCount() const { return width * height; }
  int index(int c, int r) const { return r * width + c; }
  int col(int idx) const { return idx % width; }
  int row(int idx) const { return idx / width; }
  bool inside(int c, int r) const { return c >= 0 && r >= 0 && c < width && r < height; }
  bool isBlocked(int c, int r) const { return !inside(c, r) || blocked[index(c, r)] != 0; }
  bool isBlocked(int idx) const { return blocked[idx] != 0; }

  Vec2 center(int idx) const {
    return origin + cellSize * Vec2(col(idx) + 0.5, row(idx) + 0.5);
  }

  std::optional<int> cellAt(const Vec2& p) const {
    const int c = static_cast<int>(std::floor((p.x() - origin.x()) / cellSize));
    const int r = static_cast<int>(std::floor((p.y() - origin.y()) / cellSize));
    if (!inside(c, r)) return std::nullopt;
    return index(c, r);
  }

  std::size_t blockedCount() const {
    return static_cast<std::size_t>(std::count(blocked.begin(), blocked.end(), 1));
  }

  /// Grid of the given size with nothing blocked.
  static NavGrid open(int width, int height, double cellSize = 0.25, Vec2 origin = Vec2::Zero()) {
    if (width < 1 || height < 1 || !(cellSize > 0)) {
      throw Error(Errc::InvalidConfig, "grid needs positive size");
    }
    NavGrid g;
    g.cellSize = cellSize;
    g.radius = 0.0;
    g.origin = origin;
    g.width = width;
    g.height = height;
    g.blocked.assign(static_cast<std::size_t>(width) * height, 0);
    return g;
  }
};

inline Vec2 ground(const Vec3& p) { return {p.x(), p.z()}; }

// ---------------------------------------------------------------------------
// Footprints

using Polygon2 = std::vector<Vec2>;  // convex, counter-clockwise or clockwise

/// World ground-plane rectangle covered by a box of an object.
inline Polygon2 boxFootprint(const SceneObject& obj, const Box& b) {
  Polygon2 poly;
  for (const auto& [sx, sz] : std::array<std::pair<double, double>, 4>{
           {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}}) {
    const Vec3 local = b.fromLocal(Vec3(sx * b.halfExtents.x(), 0, sz * b.halfExtents.z()));
    poly.push_back(ground(obj.toWorld(local)));
  }
  return poly;
}

namespace detail {

inline double pointSegmentDistance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

inline bool separatedOnAxes(const Polygon2& a, const Polygon2& b, const Polygon2& axesFrom) {
  for (std::size_t i = 0; i < axesFrom.size(); ++i) {
    const Vec2 e = axesFrom[(i + 1) % axesFrom.size()] - axesFrom[i];
    const Vec2 n(-e.y(), e.x());
    double aMin = std::numeric_limits<double>::infinity(), aMax = -aMin;
    double bMin = aMin, bMax = -aMin;
    for (const auto& p : a) {
      aMin = std::min(aMin, p.dot(n));
      aMax = std::max(aMax, p.dot(n));
    }
    for (const auto& p : b) {
      bMin = std::min(bMin, p.dot(n));
      bMax = std::max(bMax, p.dot(n));
    }
    if (aMax < bMin || bMax < aMin) return true;
  }
  return false;
}

}  // namespace detail

/// Euclidean distance between two convex polygons (0 when they overlap).
inline double polygonDistance(const Polygon2& a, const Polygon2& b) {
  if (!detail::separatedOnAxes(a, b, a) && !detail::separatedOnAxes(a, b, b)) return 0.0;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      d = std::min(d, detail::pointSegmentDistance(a[i], b[j], b[(j + 1) % b.size()]));
      d = std::min(d, detail::pointSegmentDistance(b[j], a[i], a[(i + 1) % a.size()]));
    }
  }
  return d;
}

inline double pointPolygonDistance(const Vec2& p, const Polygon2& poly) {
  bool pos = false, neg = false;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    const Vec2 e = b - a, q = p - a;
    const double cross = e.x() * q.y() - e.y() * q.x();
    (cross >= 0 ? pos : neg) = true;
    d = std::min(d, detail::pointSegmentDistance(p, a, b));
  }
  return pos && neg ? d : 0.0;
}

/// Ground distance from `p` to the nearest object footprint in the scene.
inline double footprintClearance(const Scene& scene, const Vec2& p) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& obj : scene.objects)
    for (const auto& b : obj.boxes) d = std::min(d, pointPolygonDistance(p, boxFootprint(obj, b)));
  return d;
}

inline Polygon2 cellSquare(const NavGrid& g, int idx) {
  const Vec2 lo = g.origin + g.cellSize * Vec2(g.col(idx), g.row(idx));
  const double s = g.cellSize;
  return {lo, lo + Vec2(s, 0), lo + Vec2(s, s), lo + Vec2(0, s)};
}

struct NavGridOptions {
  double cellSize = 0.25;
  double radius = 0.3;
  double margin = 2.0;  // free border around the scene bounds (m)
};

/// Marks every cell whose square comes closer than `radius` to an object
/// footprint. `include` lists extra ground points the grid must cover.
inline NavGrid buildNavGrid(const Scene& scene, NavGridOptions opts = {},
                            std::span<const Vec2> include = {}) {
  if (!(opts.cellSize > 0) || !(opts.radius >= 0) || !(opts.margin >= 0)) {
    throw Error(Errc::InvalidConfig, "cell size must be positive, radius and margin non-negative");
  }
  std::vector<Polygon2> feet;
  Eigen::AlignedBox2d bounds;
  for (const auto& obj : scene.objects) {
    obj.validate();
    for (const auto& b : obj.boxes) {
      feet.push_back(boxFootprint(obj, b));
      for (const auto& p : feet.back()) bounds.extend(p);
    }
  }
  for (const auto& p : include) bounds.extend(p);
  if (bounds.isEmpty() || !bounds.min().allFinite() || !bounds.max().allFinite()) {
    throw Error(Errc::DegenerateScene, "scene has no extent to plan over");
  }
  const double pad = opts.margin + opts.radius;
  const Vec2 lo = bounds.min() - Vec2::Constant(pad);
  const Vec2 hi = bounds.max() + Vec2::Constant(pad);
  NavGrid g;
  g.cellSize = opts.cellSize;
  g.radius = opts.radius;
  g.origin = (lo / opts.cellSize).array().floor().matrix() * opts.cellSize;
  g.width = std::max(1, static_cast<int>(std::ceil((hi.x() - g.origin.x()) / opts.cellSize)));
  g.height = std::max(1, static_cast<int>(std::ceil((hi.y() - g.origin.y()) / opts.cellSize)));
  g.blocked.assign(static_cast<std::size_t>(g.width) * g.height, 0);
  for (int i = 0; i < g.cellCount(); ++i) {
    const Polygon2 sq = cellSquare(g, i);
    for (const auto& f : feet) {
      const double d = polygonDistance(sq, f);
      if (d < opts.radius || d == 0.0) {
        g.blocked[i] = 1;
        break;
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// A*

inline std::int64_t octileHeuristic(const NavGrid& g, int a, int b) {
  const std::int64_t dx = std::abs(g.col(a) - g.col(b));
  const std::int64_t dy = std::abs(g.row(a) - g.row(b));
  return kStraightCost * (std::max(dx, dy) - std::min(dx, dy)) + kDiagonalCost * std::min(dx, dy);
}

/// Free 8-neighbors of `idx` with step costs. Diagonals need both adjacent
/// orthogonal cells free.
inline std::vector<std::pair<int, std::int64_t>> neighbors(const NavGrid& g, int idx) {
  std::vector<std::pair<int, std::int64_t>> out;
  const int c = g.col(idx), r = g.row(idx);
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0) continue;
      if (g.isBlocked(c + dc, r + dr)) continue;
      if (dr != 0 && dc != 0) {
        if (g.isBlocked(c + dc, r) || g.isBlocked(c, r + dr)) continue;
        out.emplace_back(g.index(c + dc, r + dr), kDiagonalCost);
      } else {
        out.emplace_back(g.index(c + dc, r + dr), kStraightCost);
      }
    }
  }
  return out;
}

struct CellPath {
  std::vector<int> cells;
  std::int64_t cost = 0;  // fixed point, kStraightCost per cell edge

  double costMeters(double cellSize) const {
    return static_cast<double>(cost) / static_cast<double>(kStraightCost) * cellSize;
  }
};

/// Called for each expanded cell with its g and heuristic values.
using ExpandObserver = std::function<void(int cell, std::int64_t g, std::int64_t h)>;

inline CellPath aStar(const NavGrid& g, int start, int goal, const ExpandObserver& observe = {}) {
  if (start < 0 || start >= g.cellCount() || goal < 0 || goal >= g.cellCount()) {
    throw Error(Errc::InvalidConfig, "cell index outside the grid");
  }
  if (g.isBlocked(start)) throw Error(Errc::BlockedStart, "start cell is blocked");
  if (g.isBlocked(goal)) throw Error(Errc::Unreachable, "goal cell is blocked");

  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max();
  std::vector<std::int64_t> best(static_cast<std::size_t>(g.cellCount()), kInf);
  std::vector<int> parent(static_cast<std::size_t>(g.cellCount()), -1);
  std::vector<std::uint8_t> closed(static_cast<std::size_t>(g.cellCount()), 0);
  using Entry = std::tuple<std::int64_t, std::int64_t, int>;  // f, g, cell
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  best[start] = 0;
  open.emplace(octileHeuristic(g, start, goal), 0, start);
  while (!open.empty()) {
    const auto [f, cost, cell] = open.top();
    open.pop();
    if (closed[cell] || cost != best[cell]) continue;
    closed[cell] = 1;
    if (observe) observe(cell, cost, f - cost);
    if (cell == goal) {
      CellPath p;
      p.cost = cost;
      for (int c = goal; c != -1; c = parent[c]) p.cells.push_back(c);
      std::reverse(p.cells.begin(), p.cells.end());
      return p;
    }
    for (const auto& [next, step] : neighbors(g, cell)) {
      const std::int64_t ng = cost + step;
      if (closed[next] || ng >= best[next]) continue;
      best[next] = ng;
      parent[next] = cell;
      open.emplace(ng + octileHeuristic(g, next, goal), ng, next);
    }
  }
  throw Error(Errc::Unreachable, "goal is not connected to the start");
}

// ---------------------------------------------------------------------------
// Visibility and string pulling

/// True when the segment a-b touches no blocked or out-of-grid cell.
/// Cells touched only at a corner count as touched.
inline bool segmentClear(const NavGrid& g, const Vec2& a, const Vec2& b) {
  const Vec2 pa = (a - g.origin) / g.cellSize;
  const Vec2 pb = (b - g.origin) / g.cellSize;
  int c = static_cast<int>(std::floor(pa.x()));
  int r = static_cast<int>(std::floor(pa.y()));
  const int cEnd = static_cast<int>(std::floor(pb.x()));
  const int rEnd = static_cast<int>(std::floor(pb.y()));
  if (g.isBlocked(c, r) || g.isBlocked(cEnd, rEnd)) return false;
  const Vec2 d = pb - pa;
  const int stepC = d.x() > 0 ? 1 : (d.x() < 0 ? -1 : 0);
  const int stepR = d.y() > 0 ? 1 : (d.y() < 0 ? -1 : 0);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double dtC = stepC != 0 ? 1.0 / std::abs(d.x()) : kInf;
  const double dtR = stepR != 0 ? 1.0 / std::abs(d.y()) : kInf;
  double tC = stepC > 0 ? (c + 1 - pa.x()) * dtC : (stepC < 0 ? (pa.x() - c) * dtC : kInf);
  double tR = stepR > 0 ? (r + 1 - pa.y()) * dtR : (stepR < 0 ? (pa.y() - r) * dtR : kInf);
  constexpr double kTie = 1e-9;
  const int maxSteps = std::abs(cEnd - c) + std::abs(rEnd - r) + 2;
  for (int i = 0; i < maxSteps && (c != cEnd || r != rEnd); ++i) {
    if (std::abs(tC - tR) < kTie) {
      if (std::min(tC, tR) > 1.0) break;
      // Passing exactly through a corner: both side cells are touched.
      if (g.isBlocked(c + stepC, r) || g.isBlocked(c, r + stepR)) return false;
      c += stepC;
      r += stepR;
      tC += dtC;
      tR += dtR;
    } else if (tC < tR) {
      if (tC > 1.0) break;
      c += stepC;
      tC += dtC;
    } else {
      if (tR > 1.0) break;
      r += stepR;
      tR += dtR;
    }
    if (g.isBlocked(c, r)) return false;
  }
  return true;
}

struct NavPath {
  std::vector<Vec2> waypoints;
  double length = 0.0;

  static double polylineLength(std::span<const Vec2> pts) {
    double len = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) len += (pts[i] - pts[i - 1]).norm();
    return len;
  }
};

/// Greedy string pulling over the polyline start, cell centers..., end.
/// `start` and `end` default to the first and last cell centers.
inline NavPath simplify(const CellPath& path, const NavGrid& g, std::optional<Vec2> start = {},
                        std::optional<Vec2> end = {}) {
  if (path.cells.empty()) throw Error(Errc::InvalidConfig, "empty cell path");
  std::vector<Vec2> pts;
  for (int c : path.cells) pts.push_back(g.center(c));
  if (start) pts.front() = *start;
  if (end) pts.back() = *end;
  if (pts.size() == 1) return {{pts.front()}, 0.0};

  NavPath out;
  out.waypoints.push_back(pts.front());
  std::size_t i = 0;
  while (i + 1 < pts.size()) {
    std::size_t j = i + 1;
    for (std::size_t k = pts.size() - 1; k > i + 1; --k) {
      if (segmentClear(g, pts[i], pts[k])) {
        j = k;
        break;
      }
    }
    out.waypoints.push_back(pts[j]);
    i = j;
  }
  out.length = NavPath::polylineLength(out.waypoints);
  return out;
}

/// Nearest unblocked cell to `p` (ties by lower index).
inline std::optional<int> nearestFreeCell(const NavGrid& g, const Vec2& p) {
  std::optional<int> best;
  double bestD = std::numeric_limits<double>::infinity();
  for (int i = 0; i < g.cellCount(); ++i) {
    if (g.isBlocked(i)) continue;
    const double d = (g.center(i) - p).squaredNorm();
    if (d < bestD) {
      bestD = d;
      best = i;
    }
  }
  return best;
}

/// Plans from a world point to the free cell nearest `goal`. The last
/// waypoint is that cell's center (the stand-point).
inline NavPath planPath(const NavGrid& g, const Vec2& start, const Vec2& goal) {
  const auto s = g.cellAt(start);
  if (!s || g.isBlocked(*s)) throw Error(Errc::BlockedStart, "start point is blocked or off the grid");
  const auto t = nearestFreeCell(g, goal);
  if (!t) throw Error(Errc::Unreachable, "no free cell to stand on");
  return simplify(aStar(g, *s, *t), g, start, g.center(*t));
}

inline nlohmann::json pathToJson(const NavPath& p) {
  nlohmann::json w = nlohmann::json::array();
  for (const auto& v : p.waypoints) w.push_back({v.x(), v.y()});
  return {{"waypoints", w}, {"cost", p.length}};
}

// ---------------------------------------------------------------------------
// Sub-goals

inline constexpr double kWaypointReach = 0.4;

struct Subgoal {
  Goal goal;
  std::size_t cursor = 0;  // index of the waypoint being approached
  bool final = false;
};

/// Goal for the current leg. `cursor` is the waypoint index being walked to
/// (start with 1); waypoints within kWaypointReach of `root` are consumed.
/// Once the last waypoint is next, the target goal itself is returned.
inline Subgoal nextSubgoal(const NavPath& path, const Vec2& root, std::size_t cursor,
                           const Goal& target, double reach = kWaypointReach) {
  if (path.waypoints.empty()) throw Error(Errc::InvalidConfig, "empty path");
  const std::size_t last = path.waypoints.size() - 1;
  cursor = std::max<std::size_t>(cursor, 1);
  while (cursor < last && (path.waypoints[cursor] - root).norm() < reach) ++cursor;
  Subgoal s;
  s.cursor = std::min(cursor, last);
  if (cursor >= last) {
    s.goal = target;
    s.final = true;
    return s;
  }
  const Vec2 w = path.waypoints[cursor];
  const Vec2 dir = normalizedOr(w - path.waypoints[cursor - 1], Vec2(0, 1));
  s.goal.position = Vec3(w.x(), 0.0, w.y());
  s.goal.direction = Vec3(dir.x(), 0.0, dir.y());
  s.goal.action = Action::Walk;
  return s;
}

}  // namespace scenemotion

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

// Scene objects as unions of yawed boxes, their 8x8x8 occupancy encoding,
// and the scene file format.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "scenemotion/error.hpp"
#include "scenemotion/kinematics.hpp"
#include "scenemotion/state.hpp"

namespace scenemotion {

/// Box in its object's frame, rotated by `yaw` about +y around its center.
struct Box {
  Vec3 center = Vec3::Zero();
  Vec3 halfExtents = Vec3::Constant(0.5);
  double yaw = 0.0;

  Vec3 toLocal(const Vec3& p) const { return yawMatrix(yaw).transpose() * (p - center); }
  Vec3 fromLocal(const Vec3& q) const { return center + yawMatrix(yaw) * q; }

  bool contains(const Vec3& p) const {
    const Vec3 q = toLocal(p);
    return (q.cwiseAbs() - halfExtents).maxCoeff() <= 0.0;
  }

  /// Closest point of the solid box (p itself when inside).
  Vec3 closestPoint(const Vec3& p) const {
    const Vec3 q = toLocal(p);
    return fromLocal(q.cwiseMax(-halfExtents).cwiseMin(halfExtents));
  }

  /// Closest point on the boundary surface, also for interior points.
  Vec3 closestSurfacePoint(const Vec3& p) const {
    Vec3 q = toLocal(p);
    const Vec3 clamped = q.cwiseMax(-halfExtents).cwiseMin(halfExtents);
    if (clamped != q) return fromLocal(clamped);
    int axis = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      const double gap = halfExtents[a] - std::abs(q[a]);
      if (gap < best) { best = gap; axis = a; }
    }
    q[axis] = q[axis] >= 0 ? halfExtents[axis] : -halfExtents[axis];
    return fromLocal(q);
  }

  double distance(const Vec3& p) const { return (p - closestPoint(p)).norm(); }

  std::array<Vec3, 8> corners() const {
    std::array<Vec3, 8> out;
    for (int i = 0; i < 8; ++i) {
      const Vec3 s((i & 1) ? 1 : -1, (i & 2) ? 1 : -1, (i & 4) ? 1 : -1);
      out[i] = fromLocal(s.cwiseProduct(halfExtents));
    }
    return out;
  }
};

struct LabeledGoal {
  Vec3 position = Vec3::Zero();  // object frame, meters
  Vec3 direction = Vec3::UnitZ();
  Action action = Action::Sit;
};

struct SceneObject {
  std::string id;
  std::string category;
  std::vector<Box> boxes;
  RootTransform pose;  // placement on the ground
  std::vector<LabeledGoal> goals;

  Vec3 toWorld(const Vec3& p) const { return fromRootRelative(p, pose); }
  Vec3 toObject(const Vec3& p) const { return toRootRelative(p, pose); }
  Vec3 dirToWorld(const Vec3& d) const { return directionFromRoot(d, pose); }
  Vec3 dirToObject(const Vec3& d) const { return directionToRoot(d, pose); }

  void validate() const {
    if (boxes.empty()) throw Error(Errc::EmptyObject, "object '" + id + "' has no boxes");
    for (const auto& b : boxes) {
      if (!(b.halfExtents.minCoeff() > 0.0)) {
        throw Error(Errc::EmptyObject, "object '" + id + "' has a box with nonpositive extent");
      }
    }
  }

  /// Axis-aligned bounds in the object frame.
  Eigen::AlignedBox3d bounds() const {
    Eigen::AlignedBox3d box;
    for (const auto& b : boxes)
      for (const auto& c : b.corners()) box.extend(c);
    return box;
  }

  bool containsWorld(const Vec3& p) const {
    const Vec3 q = toObject(p);
    return std::any_of(boxes.begin(), boxes.end(), [&](const Box& b) { return b.contains(q); });
  }

  /// Nearest point on the object's surface, object frame. Interior points
  /// project to the nearest face of the box containing them.
  Vec3 nearestSurfacePoint(const Vec3& q) const {
    validate();
    for (const auto& b : boxes) {
      if (b.contains(q)) return b.closestSurfacePoint(q);
    }
    Vec3 best = boxes.front().closestPoint(q);
    double bestDist = (best - q).squaredNorm();
    for (std::size_t i = 1; i < boxes.size(); ++i) {
      const Vec3 c = boxes[i].closestPoint(q);
      const double d = (c - q).squaredNorm();
      if (d < bestDist) { bestDist = d; best = c; }
    }
    return best;
  }

  /// Distance from a world point to the solid object (0 inside).
  double distanceWorld(const Vec3& p) const {
    const Vec3 q = toObject(p);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : boxes) best = std::min(best, b.distance(q));
    return best;
  }

  double diagonal() const { return bounds().diagonal().norm(); }
};

/// Copy of `obj` with every box scaled about the object origin. Goal
/// directions follow the normal transform.
inline SceneObject scaledObject(const SceneObject& obj, const Vec3& scale) {
  SceneObject out = obj;
  for (auto& b : out.boxes) {
    // Axis-aligned scaling of a yawed box is only exact for multiples of 90
    // degrees or uniform x/z scale; boxes built here use those.
    const Mat3 r = yawMatrix(b.yaw);
    const Vec3 localScale = (r.transpose() * scale.asDiagonal() * r).diagonal().cwiseAbs();
    b.center = b.center.cwiseProduct(scale);
    b.halfExtents = b.halfExtents.cwiseProduct(localScale);
  }
  for (auto& g : out.goals) {
    g.position = g.position.cwiseProduct(scale);
    g.direction = g.direction.cwiseQuotient(scale).normalized();
  }
  return out;
}

struct Scene {
  std::vector<SceneObject> objects;

  const SceneObject* find(std::string_view id) const {
    for (const auto& o : objects)
      if (o.id == id) return &o;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Scene JSON
//
// {"objects": [{"id", "category", "pose": {"position": [x, z], "yaw"},
//   "boxes": [{"center": [x,y,z], "halfExtents": [x,y,z], "yaw"}],
//   "goals": [{"position": [x,y,z], "direction": [x,y,z], "action": "sit"}]}]}

namespace detail {
inline nlohmann::json vec(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
inline Vec3 vec3(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}
}  // namespace detail

inline nlohmann::json objectToJson(const SceneObject& o) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& b : o.boxes) {
    boxes.push_back({{"center", detail::vec(b.center)},
                     {"halfExtents", detail::vec(b.halfExtents)},
                     {"yaw", b.yaw}});
  }
  nlohmann::json goals = nlohmann::json::array();
  for (const auto& g : o.goals) {
    goals.push_back({{"position", detail::vec(g.position)},
                     {"direction", detail::vec(g.direction)},
                     {"action", std::string(actionName(g.action))}});
  }
  return {{"id", o.id},
          {"category", o.category},
          {"pose", {{"position", {o.pose.position.x(), o.pose.position.y()}}, {"yaw", o.pose.yaw()}}},
          {"boxes", boxes},
          {"goals", goals}};
}

inline SceneObject objectFromJson(const nlohmann::json& j) {
  SceneObject o;
  o.id = j.at("id").get<std::string>();
  o.category = j.value("category", std::string("object"));
  if (j.contains("pose")) {
    const auto& p = j.at("pose");
    o.pose = RootTransform::fromYaw(
        Vec2(p.at("position").at(0).get<double>(), p.at("position").at(1).get<double>()),
        p.value("yaw", 0.0));
  }
  for (const auto& b : j.at("boxes")) {
    o.boxes.push_back({detail::vec3(b.at("center")), detail::vec3(b.at("halfExtents")),
                       b.value("yaw", 0.0)});
  }
  if (j.contains("goals")) {
    for (const auto& g : j.at("goals")) {
      LabeledGoal lg;
      lg.position = detail::vec3(g.at("position"));
      lg.direction = detail::vec3(g.at("direction")).normalized();
      const auto a = parseAction(g.value("action", std::string("sit")));
      if (!a) throw Error(Errc::InvalidConfig, "unknown goal action in object " + o.id);
      lg.action = *a;
      o.goals.push_back(lg);
    }
  }
  o.validate();
  return o;
}

inline nlohmann::json sceneToJson(const Scene& s) {
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : s.objects) objs.push_back(objectToJson(o));
  return {{"objects", objs}};
}

inline Scene sceneFromJson(const nlohmann::json& j) {
  Scene s;
  try {
    for (const auto& o : j.at("objects")) s.objects.push_back(objectFromJson(o));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("scene json: ") + e.what());
  }
  return s;
}

inline Scene loadScene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, path + ": " + e.what());
  }
  return sceneFromJson(j);
}

inline void saveScene(const Scene& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  out << sceneToJson(s).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Voxel grid

inline constexpr int kVoxelRes = 8;
inline constexpr int kVoxelCells = kVoxelRes * kVoxelRes * kVoxelRes;
inline constexpr int kVoxelFeatures = 4 * kVoxelCells;  // 2048

inline constexpr int voxelIndex(int x, int y, int z) {
  return x + kVoxelRes * (y + kVoxelRes * z);
}

struct VoxelGrid {
  std::array<Vec3, kVoxelCells> centers;
  std::array<double, kVoxelCells> occupancy{};
  Eigen::AlignedBox3d bounds;       // object frame, margin included
  Vec3 origin = Vec3::Zero();       // bounds center in the object frame
  RootTransform objectPose;         // object placement in the world
};

/// Samples per cell along each axis when estimating occupancy.
inline constexpr int kOccupancySubsamples = 4;

/// Object-fit 8x8x8 grid (bounds grown by 5%); cell centers are relative to
/// the bounds center, in object axes.
inline VoxelGrid voxelizeObject(const SceneObject& obj) {
  obj.validate();
  const Eigen::AlignedBox3d tight = obj.bounds();
  const Vec3 mid = tight.center();
  const Vec3 half = 0.5 * tight.sizes() * 1.05;
  VoxelGrid g;
  g.bounds = Eigen::AlignedBox3d(mid - half, mid + half);
  g.origin = mid;
  g.objectPose = obj.pose;
  const Vec3 cell = 2.0 * half / kVoxelRes;
  constexpr int s = kOccupancySubsamples;
  for (int z = 0; z < kVoxelRes; ++z)
    for (int y = 0; y < kVoxelRes; ++y)
      for (int x = 0; x < kVoxelRes; ++x) {
        const Vec3 lo = g.bounds.min() + Vec3(x, y, z).cwiseProduct(cell);
        int inside = 0;
        for (int k = 0; k < s; ++k)
          for (int j = 0; j < s; ++j)
            for (int i = 0; i < s; ++i) {
              const Vec3 p = lo + Vec3(i + 0.5, j + 0.5, k + 0.5).cwiseProduct(cell) / s;
              if (std::any_of(obj.boxes.begin(), obj.boxes.end(),
                              [&](const Box& b) { return b.contains(p); })) {
                ++inside;
              }
            }
        const int idx = voxelIndex(x, y, z);
        g.centers[idx] = lo + 0.5 * cell - mid;
        g.occupancy[idx] = static_cast<double>(inside) / (s * s * s);
      }
  return g;
}

/// Re-expresses an object-frame grid in `frame` (e.g. the character root).
inline VoxelGrid encodeRelative(const VoxelGrid& grid, const RootTransform& frame) {
  VoxelGrid out = grid;
  for (int i = 0; i < kVoxelCells; ++i) {
    const Vec3 world = fromRootRelative(grid.origin + grid.centers[i], grid.objectPose);
    out.centers[i] = toRootRelative(world, frame);
  }
  return out;
}

/// Cells in x-fastest order, each as (cx, cy, cz, occupancy).
inline Eigen::VectorXd flattenGrid(const VoxelGrid& g) {
  Eigen::VectorXd v(kVoxelFeatures);
  for (int i = 0; i < kVoxelCells; ++i) {
    v.segment<3>(4 * i) = g.centers[i];
    v[4 * i + 3] = g.occupancy[i];
  }
  return v;
}

}  // namespace scenemotion

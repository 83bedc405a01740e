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

// Rotation encodings, ground-plane root frames and the stick-figure skeleton.
//
// Conventions: y is up, the ground is the x/z plane, and a root frame looks
// down its local +z axis. A 2D ground point stores (x, z).

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "scenemotion/error.hpp"

namespace scenemotion {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// First two columns of a rotation matrix, column-major: (c0.x c0.y c0.z c1.x c1.y c1.z).
struct Rotation6D {
  std::array<double, 6> v{1, 0, 0, 0, 1, 0};

  bool operator==(const Rotation6D&) const = default;
};

inline Mat3 rot6dToMatrix(const Rotation6D& r) {
  const Vec3 a(r.v[0], r.v[1], r.v[2]);
  const Vec3 b(r.v[3], r.v[4], r.v[5]);
  const double na = a.norm();
  if (na <= 1e-8 || b.norm() <= 1e-8) {
    throw Error(Errc::DegenerateRotation, "6D rotation column is near zero");
  }
  const Vec3 c0 = a / na;
  Vec3 c1 = b - c0.dot(b) * c0;
  const double n1 = c1.norm();
  if (n1 <= 1e-8 * b.norm()) {
    throw Error(Errc::DegenerateRotation, "6D rotation columns are parallel");
  }
  c1 /= n1;
  Mat3 m;
  m.col(0) = c0;
  m.col(1) = c1;
  m.col(2) = c0.cross(c1);
  return m;
}

inline Rotation6D matrixToRot6d(const Mat3& m) {
  if (!((m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-4) ||
      !(m.determinant() > 0.0)) {
    throw Error(Errc::NotARotation, "matrix is not orthonormal within 1e-4");
  }
  return Rotation6D{{m(0, 0), m(1, 0), m(2, 0), m(0, 1), m(1, 1), m(2, 1)}};
}

/// Rotation about +y by `angle` radians; maps local +z onto (sin, 0, cos).
inline Mat3 yawMatrix(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix();
}

/// Character or object placement on the ground plane.
struct RootTransform {
  Vec2 position = Vec2::Zero();
  Vec2 forward = Vec2(0, 1);

  static RootTransform fromYaw(const Vec2& pos, double yaw) {
    return {pos, Vec2(std::sin(yaw), std::cos(yaw))};
  }

  double yaw() const { return std::atan2(forward.x(), forward.y()); }

  /// Local +x axis expressed on the ground.
  Vec2 right() const { return Vec2(forward.y(), -forward.x()); }

  Mat3 rotation() const {
    Mat3 r;
    r << forward.y(), 0, forward.x(),
         0, 1, 0,
         -forward.x(), 0, forward.y();
    return r;
  }

  bool operator==(const RootTransform&) const = default;
};

inline Vec2 normalizedOr(const Vec2& v, const Vec2& fallback) {
  const double n = v.norm();
  return n > 1e-12 ? Vec2(v / n) : fallback;
}

inline Vec3 toRootRelative(const Vec3& world, const RootTransform& root) {
  const Vec2 d(world.x() - root.position.x(), world.z() - root.position.y());
  return Vec3(d.dot(root.right()), world.y(), d.dot(root.forward));
}

inline Vec3 fromRootRelative(const Vec3& local, const RootTransform& root) {
  const Vec2 g = root.position + local.x() * root.right() + local.z() * root.forward;
  return Vec3(g.x(), local.y(), g.y());
}

/// Rotates a direction into the root frame (no translation).
inline Vec3 directionToRoot(const Vec3& world, const RootTransform& root) {
  const Vec2 d(world.x(), world.z());
  return Vec3(d.dot(root.right()), world.y(), d.dot(root.forward));
}

inline Vec3 directionFromRoot(const Vec3& local, const RootTransform& root) {
  const Vec2 g = local.x() * root.right() + local.z() * root.forward;
  return Vec3(g.x(), local.y(), g.y());
}

inline Vec2 groundToRoot(const Vec2& p, const RootTransform& root) {
  const Vec2 d = p - root.position;
  return Vec2(d.dot(root.right()), d.dot(root.forward));
}

inline Vec2 groundDirToRoot(const Vec2& dir, const RootTransform& root) {
  return Vec2(dir.dot(root.right()), dir.dot(root.forward));
}

struct RootDelta {
  Vec2 position = Vec2::Zero();
  Vec2 forward = Vec2(0, 1);
};

/// `cur` expressed in the frame of `prev`.
inline RootDelta rootDelta(const RootTransform& prev, const RootTransform& cur) {
  return {groundToRoot(cur.position, prev), groundDirToRoot(cur.forward, prev)};
}

/// Inverse of rootDelta: composes `prev` with a delta to recover the new root.
inline RootTransform applyDelta(const RootTransform& prev, const RootDelta& delta) {
  RootTransform out;
  out.position = prev.position + delta.position.x() * prev.right() +
                 delta.position.y() * prev.forward;
  const Vec2 f = delta.forward.x() * prev.right() + delta.forward.y() * prev.forward;
  out.forward = normalizedOr(f, prev.forward);
  return out;
}

// ---------------------------------------------------------------------------
// Skeleton

struct Skeleton {
  std::vector<std::string> names;
  std::vector<int> parents;  // -1 for the root
  std::vector<Vec3> offsets; // rest offset from parent, meters (A-pose)

  int jointCount() const { return static_cast<int>(names.size()); }

  std::optional<int> find(std::string_view name) const {
    for (int i = 0; i < jointCount(); ++i) {
      if (names[i] == name) return i;
    }
    return std::nullopt;
  }

  int indexOf(std::string_view name) const {
    auto i = find(name);
    if (!i) throw Error(Errc::InvalidConfig, "skeleton has no joint '" + std::string(name) + "'");
    return *i;
  }

  /// Standing pelvis height: the lowest rest-pose joint touches the ground.
  double standingHeight() const;

  void validate() const {
    const auto n = names.size();
    if (n == 0 || parents.size() != n || offsets.size() != n) {
      throw Error(Errc::InvalidConfig, "skeleton arrays must be nonempty and equally sized");
    }
    if (parents[0] != -1) throw Error(Errc::InvalidConfig, "joint 0 must be the root");
    for (std::size_t i = 1; i < n; ++i) {
      if (parents[i] < 0 || parents[i] >= static_cast<int>(i)) {
        throw Error(Errc::InvalidConfig, "parents must precede children (joint " + names[i] + ")");
      }
    }
  }

  bool isDescendant(int joint, int ancestor) const {
    for (int j = joint; j >= 0; j = parents[j]) {
      if (j == ancestor) return true;
    }
    return false;
  }

  /// Joint path from `base` down to `tip`; empty when `tip` is not below `base`.
  std::vector<int> chain(int base, int tip) const {
    std::vector<int> rev;
    for (int j = tip; j >= 0; j = parents[j]) {
      rev.push_back(j);
      if (j == base) return {rev.rbegin(), rev.rend()};
    }
    return {};
  }
};

/// World-space pose: joint positions and global joint rotations.
struct Pose {
  std::vector<Vec3> positions;
  std::vector<Mat3> rotations;
};

inline Pose forwardKinematics(const Skeleton& skel, const Vec3& pelvis,
                              std::span<const Mat3> local) {
  const int n = skel.jointCount();
  if (static_cast<int>(local.size()) != n) {
    throw Error(Errc::DimMismatch, "local rotation count differs from joint count");
  }
  Pose pose;
  pose.positions.resize(n);
  pose.rotations.resize(n);
  pose.positions[0] = pelvis;
  pose.rotations[0] = local[0];
  for (int j = 1; j < n; ++j) {
    const int p = skel.parents[j];
    pose.rotations[j] = pose.rotations[p] * local[j];
    pose.positions[j] = pose.positions[p] + pose.rotations[p] * skel.offsets[j];
  }
  return pose;
}

inline double Skeleton::standingHeight() const {
  std::vector<Mat3> id(names.size(), Mat3::Identity());
  const Pose rest = forwardKinematics(*this, Vec3::Zero(), id);
  double lowest = 0.0;
  for (const auto& p : rest.positions) lowest = std::min(lowest, p.y());
  return -lowest;
}

namespace skeletons {

/// 22-joint body in the common parametric-body joint order.
inline Skeleton body22() {
  Skeleton s;
  auto add = [&](const char* name, int parent, Vec3 off) {
    s.names.emplace_back(name);
    s.parents.push_back(parent);
    s.offsets.push_back(off);
  };
  add("pelvis", -1, {0, 0, 0});
  add("left_hip", 0, {0.09, -0.06, 0});
  add("right_hip", 0, {-0.09, -0.06, 0});
  add("spine1", 0, {0, 0.11, -0.01});
  add("left_knee", 1, {0, -0.42, 0});
  add("right_knee", 2, {0, -0.42, 0});
  add("spine2", 3, {0, 0.13, 0});
  add("left_ankle", 4, {0, -0.41, -0.02});
  add("right_ankle", 5, {0, -0.41, -0.02});
  add("spine3", 6, {0, 0.05, 0.01});
  add("left_foot", 7, {0, -0.05, 0.12});
  add("right_foot", 8, {0, -0.05, 0.12});
  add("neck", 9, {0, 0.21, -0.02});
  add("left_collar", 9, {0.07, 0.12, -0.01});
  add("right_collar", 9, {-0.07, 0.12, -0.01});
  add("head", 12, {0, 0.09, 0.03});
  add("left_shoulder", 13, {0.11, 0.03, 0});
  add("right_shoulder", 14, {-0.11, 0.03, 0});
  add("left_elbow", 16, {0.04, -0.265, 0});
  add("right_elbow", 17, {-0.04, -0.265, 0});
  add("left_wrist", 18, {0.03, -0.25, 0.02});
  add("right_wrist", 19, {-0.03, -0.25, 0.02});
  return s;
}

/// Reduced 14-joint body for fast tests; keeps the five key joints and
/// two-bone limb chains.
inline Skeleton body14() {
  Skeleton s;
  auto add = [&](const char* name, int parent, Vec3 off) {
    s.names.emplace_back(name);
    s.parents.push_back(parent);
    s.offsets.push_back(off);
  };
  add("pelvis", -1, {0, 0, 0});
  add("left_hip", 0, {0.09, -0.06, 0});
  add("left_knee", 1, {0, -0.42, 0});
  add("left_foot", 2, {0, -0.46, 0.10});
  add("right_hip", 0, {-0.09, -0.06, 0});
  add("right_knee", 4, {0, -0.42, 0});
  add("right_foot", 5, {0, -0.46, 0.10});
  add("spine3", 0, {0, 0.29, 0});
  add("left_shoulder", 7, {0.18, 0.15, -0.01});
  add("left_elbow", 8, {0.04, -0.265, 0});
  add("left_wrist", 9, {0.03, -0.25, 0.02});
  add("right_shoulder", 7, {-0.18, 0.15, -0.01});
  add("right_elbow", 11, {-0.04, -0.265, 0});
  add("right_wrist", 12, {-0.03, -0.25, 0.02});
  return s;
}

}  // namespace skeletons

// JSON: {"joints": [{"name": ..., "parent": -1, "offset": [x, y, z]}, ...]}
inline nlohmann::json skeletonToJson(const Skeleton& s) {
  nlohmann::json joints = nlohmann::json::array();
  for (int i = 0; i < s.jointCount(); ++i) {
    joints.push_back({{"name", s.names[i]},
                      {"parent", s.parents[i]},
                      {"offset", {s.offsets[i].x(), s.offsets[i].y(), s.offsets[i].z()}}});
  }
  return {{"joints", joints}};
}

inline Skeleton skeletonFromJson(const nlohmann::json& j) {
  Skeleton s;
  try {
    for (const auto& joint : j.at("joints")) {
      s.names.push_back(joint.at("name").get<std::string>());
      s.parents.push_back(joint.at("parent").get<int>());
      const auto& o = joint.at("offset");
      s.offsets.emplace_back(o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("skeleton json: ") + e.what());
  }
  s.validate();
  return s;
}

inline Skeleton loadSkeleton(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, path + ": " + e.what());
  }
  return skeletonFromJson(j);
}

}  // namespace scenemotion

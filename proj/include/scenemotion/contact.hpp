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

// Body-object contacts on the five key joints.

#pragma once

#include <array>
#include <span>
#include <string_view>

#include "scenemotion/error.hpp"
#include "scenemotion/kinematics.hpp"
#include "scenemotion/state.hpp"
#include "scenemotion/voxel.hpp"

namespace scenemotion {

/// Contact slot order used by states and contact frames.
inline constexpr std::array<std::string_view, kContactCount> kKeyJointNames{
    "pelvis", "left_wrist", "right_wrist", "left_foot", "right_foot"};

enum KeyJoint { kPelvis = 0, kLeftHand, kRightHand, kLeftFoot, kRightFoot };

inline std::array<int, kContactCount> keyJointIndices(const Skeleton& skel) {
  std::array<int, kContactCount> out{};
  for (int k = 0; k < kContactCount; ++k) out[k] = skel.indexOf(kKeyJointNames[k]);
  return out;
}

struct ContactThresholds {
  double distance = 0.05;  // m
  double speed = 0.15;     // m/s
};

struct ContactFrame {
  std::array<bool, kContactCount> inContact{};
  std::array<Vec3, kContactCount> point{};  // object frame

  bool any() const {
    for (bool c : inContact)
      if (c) return true;
    return false;
  }
};

/// World-space key joint positions and velocities against one object.
inline ContactFrame detectContacts(std::span<const Vec3> positions, std::span<const Vec3> velocities,
                                   const SceneObject& obj, ContactThresholds th = {}) {
  if (positions.size() != kContactCount || velocities.size() != kContactCount) {
    throw Error(Errc::DimMismatch, "contacts need the five key joints");
  }
  ContactFrame f;
  for (int k = 0; k < kContactCount; ++k) {
    const Vec3 q = obj.toObject(positions[k]);
    const Vec3 s = obj.nearestSurfacePoint(q);
    const double gap = obj.containsWorld(positions[k]) ? 0.0 : (q - s).norm();
    f.inContact[k] = gap < th.distance && velocities[k].norm() < th.speed;
    f.point[k] = s;
  }
  return f;
}

/// Carries every contact point onto `newObj`: the point is first stretched
/// by `scale` (object axes, for rescaled objects), then snapped to the
/// nearest surface point.
inline ContactFrame projectContacts(const ContactFrame& contacts, const SceneObject& newObj,
                                    const Vec3& scale = Vec3::Ones()) {
  newObj.validate();
  ContactFrame out = contacts;
  for (int k = 0; k < kContactCount; ++k) {
    if (contacts.inContact[k]) out.point[k] = newObj.nearestSurfacePoint(contacts.point[k].cwiseProduct(scale));
  }
  return out;
}

}  // namespace scenemotion

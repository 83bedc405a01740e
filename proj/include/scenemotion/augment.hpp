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

// Object scale/switch augmentation: contacts are carried over to the new
// surface and limbs re-solved with cyclic coordinate descent.

#pragma once

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "scenemotion/contact.hpp"
#include "scenemotion/dataset.hpp"
#include "scenemotion/error.hpp"
#include "scenemotion/kinematics.hpp"
#include "scenemotion/voxel.hpp"

namespace scenemotion {

// ---------------------------------------------------------------------------
// CCD inverse kinematics

/// Serial chain: joint i rotates bone i and everything after it. Bones are
/// expressed in the frame of their joint; `rotations` are parent-relative.
struct IKChain {
  std::vector<int> joints;     // skeleton indices, base first, effector last
  Vec3 base = Vec3::Zero();    // world position of the first joint
  Quat baseFrame = Quat::Identity();
  std::vector<Quat> rotations; // one per bone
  std::vector<Vec3> bones;     // offset from joint i to joint i + 1

  void validate() const {
    if (bones.empty() || rotations.size() != bones.size()) {
      throw Error(Errc::InvalidConfig, "chain needs one rotation per bone");
    }
    for (const auto& b : bones)
      if (!(b.norm() > 0)) throw Error(Errc::InvalidConfig, "bone lengths must be positive");
  }

  double reach() const {
    double r = 0;
    for (const auto& b : bones) r += b.norm();
    return r;
  }

  /// World rotation of each joint's frame.
  std::vector<Quat> globalRotations() const {
    std::vector<Quat> g(bones.size());
    Quat r = baseFrame;
    for (std::size_t i = 0; i < bones.size(); ++i) g[i] = r = r * rotations[i];
    return g;
  }

  /// World joint positions, base first.
  std::vector<Vec3> positions() const {
    std::vector<Vec3> p{base};
    Quat r = baseFrame;
    for (std::size_t i = 0; i < bones.size(); ++i) {
      r = r * rotations[i];
      p.push_back(p.back() + r * bones[i]);
    }
    return p;
  }

  Vec3 effector() const { return positions().back(); }
};

/// Chain through world joint positions with identity rotations.
inline IKChain chainFromPositions(std::span<const Vec3> pts, std::vector<int> joints = {}) {
  if (pts.size() < 2) throw Error(Errc::InvalidConfig, "chain needs at least two joints");
  IKChain c;
  c.joints = std::move(joints);
  c.base = pts.front();
  for (std::size_t i = 1; i < pts.size(); ++i) {
    c.bones.push_back(pts[i] - pts[i - 1]);
    c.rotations.push_back(Quat::Identity());
  }
  c.validate();
  return c;
}

struct IKResult {
  bool converged = false;
  int iterations = 0;
  double distance = 0;
  std::vector<double> history;  // effector-target distance after each iteration
};

struct IKOptions {
  int maxIterations = 100;
  double tolerance = 1e-3;
  double maxStep = 0.2;  // radians per joint per iteration
};

namespace detail {

/// Rotates joint `i` by the world-space rotation `delta`, clamped to `maxStep` radians.
inline void rotateJoint(IKChain& chain, std::size_t i, const Quat& delta, double maxStep) {
  Eigen::AngleAxisd aa(delta);
  if (!(aa.angle() > 1e-15)) return;
  aa.angle() = std::min(aa.angle(), maxStep);
  Quat parent = chain.baseFrame;
  for (std::size_t k = 0; k < i; ++k) parent = parent * chain.rotations[k];
  chain.rotations[i] = (parent.inverse() * Quat(aa) * parent * chain.rotations[i]).normalized();
}

/// One tip-to-base CCD sweep.
inline void ccdSweep(IKChain& chain, const Vec3& target, double maxStep) {
  for (std::size_t i = chain.bones.size(); i-- > 0;) {
    const auto pos = chain.positions();
    const Vec3 a = pos.back() - pos[i];
    const Vec3 b = target - pos[i];
    if (a.norm() < 1e-12 || b.norm() < 1e-12) continue;
    rotateJoint(chain, i, Quat::FromTwoVectors(a, b), maxStep);
  }
}

/// Bends joint `j` so the distance from joint `j - 1` to the effector is
/// `reach`, first re-bending the joints beyond `j` when the sub-chain is too
/// bent or too straight for that. Plain CCD converges slowly near the edge
/// of the workspace; this coordinate move fixes the radial error directly.
/// A straight sub-chain bends in the plane that holds `target`.
inline void matchReach(IKChain& chain, std::size_t j, double reach, const Vec3& target, double maxStep) {
  if (j == 0 || j >= chain.bones.size()) return;
  auto pos = chain.positions();
  const double l = (pos[j] - pos[j - 1]).norm();
  const double inner = (pos.back() - pos[j]).norm();
  const double lo = std::abs(reach - l), hi = reach + l;
  if (inner < lo || inner > hi) {
    matchReach(chain, j + 1, std::clamp(inner, lo, hi), target, maxStep);
    pos = chain.positions();
  }
  const Vec3 u = pos[j] - pos[j - 1], v = pos.back() - pos[j];
  const double lv = v.norm();
  if (l < 1e-12 || lv < 1e-12) return;
  Vec3 n = u.cross(v);
  if (n.norm() < 1e-9 * l * lv) n = u.cross(target - pos[j - 1]);
  if (n.norm() < 1e-9 * l * lv) n = u.unitOrthogonal();
  n.normalize();
  const double want = std::acos(std::clamp((reach * reach - l * l - lv * lv) / (2 * l * lv), -1.0, 1.0));
  const double now = std::atan2(u.cross(v).dot(n), u.dot(v));
  rotateJoint(chain, j, Quat(Eigen::AngleAxisd(want - now, n)), maxStep);
}

/// Turns the whole chain about its base toward the target.
inline void alignBase(IKChain& chain, const Vec3& target, double maxStep) {
  const Vec3 a = chain.effector() - chain.base, b = target - chain.base;
  if (a.norm() < 1e-12 || b.norm() < 1e-12) return;
  rotateJoint(chain, 0, Quat::FromTwoVectors(a, b), maxStep);
}

}  // namespace detail

/// Cyclic coordinate descent, end to base, at most `maxStep` per joint per
/// iteration. Each iteration also tries a reach-matching bend plus a base
/// turn from the same pose and keeps whichever lands closer, so the effector
/// distance never increases.
inline IKResult ccdIK(IKChain& chain, const Vec3& target, IKOptions opts = {}) {
  chain.validate();
  IKResult r;
  r.distance = (chain.effector() - target).norm();
  if (r.distance <= opts.tolerance) {
    r.converged = true;
    return r;
  }
  while (r.iterations < opts.maxIterations) {
    IKChain bent = chain;
    detail::ccdSweep(chain, target, opts.maxStep);
    detail::matchReach(bent, 1, (target - bent.base).norm(), target, opts.maxStep);
    detail::alignBase(bent, target, opts.maxStep);
    r.distance = (chain.effector() - target).norm();
    const double alt = (bent.effector() - target).norm();
    if (alt < r.distance) {
      chain = std::move(bent);
      r.distance = alt;
    }
    ++r.iterations;
    r.history.push_back(r.distance);
    if (r.distance <= opts.tolerance) {
      r.converged = true;
      break;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Clip augmentation

/// Diagonal lengths within +-20% of each other.
inline bool similarSize(const SceneObject& a, const SceneObject& b, double tolerance = 0.2) {
  const double da = a.diagonal(), db = b.diagonal();
  return db >= da * (1 - tolerance) && db <= da * (1 + tolerance);
}

struct ObjectEdit {
  enum class Kind { Scale, Switch } kind = Kind::Scale;
  Vec3 scale = Vec3::Ones();
  SceneObject replacement;  // used for Switch; placed at the original pose

  static ObjectEdit identity() { return {}; }
  static ObjectEdit scaled(const Vec3& s) { return {Kind::Scale, s, {}}; }
  static ObjectEdit switched(SceneObject obj) { return {Kind::Switch, Vec3::Ones(), std::move(obj)}; }
};

/// Scale with probability 1/2, otherwise switch to a similar-size object
/// from `pool` (falls back to scaling when none qualifies).
inline ObjectEdit randomEdit(const SceneObject& current, std::span<const SceneObject> pool, Rng& rng) {
  std::uniform_real_distribution<double> u(0.8, 1.2);
  std::vector<const SceneObject*> similar;
  for (const auto& o : pool)
    if (o.id != current.id && similarSize(current, o)) similar.push_back(&o);
  if (!similar.empty() && std::bernoulli_distribution(0.5)(rng)) {
    return ObjectEdit::switched(*similar[std::uniform_int_distribution<std::size_t>(0, similar.size() - 1)(rng)]);
  }
  const double a = u(rng), b = u(rng), c = u(rng);
  return ObjectEdit::scaled(Vec3(a, b, c));
}

inline SceneObject applyEdit(const SceneObject& obj, const ObjectEdit& e) {
  if (e.kind == ObjectEdit::Kind::Scale) return scaledObject(obj, e.scale);
  SceneObject out = e.replacement;
  out.id = obj.id;
  out.pose = obj.pose;
  out.validate();
  return out;
}

struct AugmentOptions {
  ContactThresholds thresholds;
  IKOptions ik;
  double easeSeconds = 0.25;
  double floorHeight = 0.08;  // feet this low and slow are held in place
};

struct AugmentResult {
  Performance performance;
  SceneObject object;                     // the edited object
  std::vector<ContactFrame> original;     // contacts on the old object
  std::vector<ContactFrame> projected;    // contacts carried to the new one
  std::vector<std::array<Vec3, kContactCount>> targets;  // world targets, contacted joints
  double maxViolation = 0;                // worst contacted-joint error (m)
  int unconverged = 0;                    // IK solves that missed the tolerance
};

namespace detail {

inline double cubicEase(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3 - 2 * x);
}

/// Moves `joint` and its descendants rigidly by `delta` rotation about
/// `pivot`, updating global rotations too.
inline void rotateSubtree(const Skeleton& skel, Pose& pose, int joint, const Quat& delta,
                          const Vec3& pivot) {
  const Mat3 r = delta.toRotationMatrix();
  for (int j = 0; j < skel.jointCount(); ++j) {
    if (!skel.isDescendant(j, joint)) continue;
    pose.positions[j] = pivot + r * (pose.positions[j] - pivot);
    pose.rotations[j] = r * pose.rotations[j];
  }
}

/// Re-solves the limb ending at `tip` (chain from `base`) toward `target`.
inline IKResult solveLimb(const Skeleton& skel, Pose& pose, int base, int tip, const Vec3& target,
                          const IKOptions& opts) {
  const auto joints = skel.chain(base, tip);
  std::vector<Vec3> pts;
  for (int j : joints) pts.push_back(pose.positions[j]);
  IKChain chain = chainFromPositions(pts, joints);
  const IKResult r = ccdIK(chain, target, opts);
  // Apply each bone's world rotation change to its subtree, base first.
  const auto solved = chain.globalRotations();
  Quat applied = Quat::Identity();
  for (std::size_t i = 0; i + 1 < joints.size(); ++i) {
    const Quat step = solved[i] * applied.inverse();
    rotateSubtree(skel, pose, joints[i], step, pose.positions[joints[i]]);
    applied = solved[i];
  }
  return r;
}

}  // namespace detail

/// Replaces or rescales the performance's object and re-poses the body so
/// each contacted key joint keeps its offset to the (moved) contact point.
inline AugmentResult augmentClip(const Performance& perf, const Scene& scene, const ObjectEdit& edit,
                                 const AugmentOptions& opts = {}) {
  const SceneObject* oldObj = scene.find(perf.objectRef);
  if (!oldObj) throw Error(Errc::UnknownObject, "performance has no object to edit");
  AugmentResult res;
  res.object = applyEdit(*oldObj, edit);
  res.performance = perf;
  const Skeleton& skel = perf.skeleton;
  const auto key = keyJointIndices(skel);
  const int n = static_cast<int>(perf.frames.size());
  const Vec3 stretch = edit.kind == ObjectEdit::Kind::Scale ? edit.scale : Vec3::Ones();

  // Contacts on the old object and their projections.
  std::vector<std::array<Vec3, kContactCount>> offset(n);
  std::vector<std::array<bool, kContactCount>> active(n);
  for (int i = 0; i < n; ++i) {
    const int a = std::max(0, i - 1), b = std::min(n - 1, i + 1);
    std::array<Vec3, kContactCount> pos, vel;
    for (int k = 0; k < kContactCount; ++k) {
      pos[k] = perf.frames[i].pose.positions[key[k]];
      vel[k] = b > a ? Vec3((perf.frames[b].pose.positions[key[k]] - perf.frames[a].pose.positions[key[k]]) *
                            (perf.fps / (b - a)))
                     : Vec3::Zero();
    }
    res.original.push_back(detectContacts(pos, vel, *oldObj, opts.thresholds));
    res.projected.push_back(projectContacts(res.original.back(), res.object, stretch));
    for (int k = 0; k < kContactCount; ++k) {
      active[i][k] = res.original[i].inContact[k];
      offset[i][k] = active[i][k] ? Vec3(res.object.toWorld(res.projected[i].point[k]) -
                                         oldObj->toWorld(res.original[i].point[k]))
                                  : Vec3::Zero();
    }
  }

  // Ease offsets into neighbouring non-contact frames.
  const int ease = std::max(1, static_cast<int>(std::lround(opts.easeSeconds * perf.fps)));
  std::vector<std::array<Vec3, kContactCount>> eased = offset;
  std::vector<std::array<bool, kContactCount>> edited = active;
  for (int k = 0; k < kContactCount; ++k) {
    for (int i = 0; i < n; ++i) {
      if (active[i][k]) continue;
      int best = -1, bestD = ease + 1;
      for (int d = 1; d <= ease; ++d) {
        if (i - d >= 0 && active[i - d][k]) { best = i - d; bestD = d; break; }
        if (i + d < n && active[i + d][k]) { best = i + d; bestD = d; break; }
      }
      if (best < 0) continue;
      const double w = detail::cubicEase(1.0 - static_cast<double>(bestD) / (ease + 1));
      eased[i][k] = w * offset[best][k];
      edited[i][k] = eased[i][k].norm() > 0;
    }
  }

  res.targets.resize(n);
  const int shoulderL = skel.find("left_shoulder").value_or(-1);
  const int shoulderR = skel.find("right_shoulder").value_or(-1);
  const int hipL = skel.indexOf("left_hip"), hipR = skel.indexOf("right_hip");
  const std::array<int, kContactCount> bases{-1, shoulderL, shoulderR, hipL, hipR};
  for (int i = 0; i < n; ++i) {
    ClipFrame& f = res.performance.frames[i];
    const Pose orig = perf.frames[i].pose;
    const Vec3 shift = eased[i][kPelvis];
    if (shift.squaredNorm() > 0) {
      for (auto& p : f.pose.positions) p += shift;
      f.root.position += Vec2(shift.x(), shift.z());
    }
    for (int k = 1; k < kContactCount; ++k) {
      const int tip = key[k];
      std::optional<Vec3> target;
      if (edited[i][k]) {
        target = orig.positions[tip] + eased[i][k];
      } else if (k >= kLeftFoot && shift.squaredNorm() > 0) {
        const int a = std::max(0, i - 1), b = std::min(n - 1, i + 1);
        const double speed = (perf.frames[b].pose.positions[tip] - perf.frames[a].pose.positions[tip]).norm() *
                             perf.fps / std::max(1, b - a);
        if (orig.positions[tip].y() < opts.floorHeight && speed < opts.thresholds.speed) {
          target = orig.positions[tip];
        }
      }
      if (!target || bases[k] < 0) continue;
      const IKResult r = detail::solveLimb(skel, f.pose, bases[k], tip, *target, opts.ik);
      if (!r.converged && active[i][k]) ++res.unconverged;
    }
    for (int k = 0; k < kContactCount; ++k) {
      res.targets[i][k] = orig.positions[key[k]] + offset[i][k];
      if (active[i][k]) {
        res.maxViolation = std::max(res.maxViolation, (f.pose.positions[key[k]] - res.targets[i][k]).norm());
      }
    }
  }

  // The goal follows its labeled counterpart on the new object.
  const Vec3 oldGoalObj = oldObj->toObject(perf.goal.position);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& g : res.object.goals) {
    if (g.action != perf.goal.action) continue;
    const double d = (g.position - oldGoalObj).norm();
    if (d < best) {
      best = d;
      res.performance.goal = {res.object.toWorld(g.position), res.object.dirToWorld(g.direction).normalized(),
                              g.action};
    }
  }
  return res;
}

}  // namespace scenemotion

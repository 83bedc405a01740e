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

// Synthetic motion corpus: parametric furniture, a procedural animator that
// walks a character to an object and sits or lies on it, clip files and
// feature statistics.

#pragma once

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "scenemotion/contact.hpp"
#include "scenemotion/error.hpp"
#include "scenemotion/goal_net.hpp"
#include "scenemotion/kinematics.hpp"
#include "scenemotion/motion_net.hpp"
#include "scenemotion/nn.hpp"
#include "scenemotion/planner.hpp"
#include "scenemotion/state.hpp"
#include "scenemotion/voxel.hpp"

namespace scenemotion {

// ---------------------------------------------------------------------------
// Parametric furniture. Object frame: origin on the floor under the object,
// +z is the side a seated person faces.

namespace objects {

inline Box slab(Vec3 center, Vec3 half) { return {center, half, 0.0}; }

inline SceneObject chair(std::string id = "chair") {
  SceneObject o{std::move(id), "chair", {}, {}, {}};
  o.boxes = {slab({0, 0.21, 0}, {0.24, 0.21, 0.24}), slab({0, 0.68, -0.21}, {0.24, 0.26, 0.03})};
  o.goals = {{Vec3(0, 0.45, 0.02), Vec3::UnitZ(), Action::Sit}};
  return o;
}

inline SceneObject armchair(std::string id = "armchair") {
  SceneObject o{std::move(id), "armchair", {}, {}, {}};
  o.boxes = {slab({0, 0.21, 0.02}, {0.3, 0.21, 0.28}), slab({0, 0.62, -0.29}, {0.4, 0.32, 0.05}),
             slab({0.35, 0.31, 0.02}, {0.05, 0.31, 0.3}), slab({-0.35, 0.31, 0.02}, {0.05, 0.31, 0.3})};
  o.goals = {{Vec3(0, 0.45, 0.04), Vec3::UnitZ(), Action::Sit}};
  return o;
}

inline SceneObject sofa(std::string id = "sofa") {
  SceneObject o{std::move(id), "sofa", {}, {}, {}};
  o.boxes = {slab({0, 0.2, 0.05}, {0.9, 0.2, 0.4}), slab({0, 0.6, -0.4}, {1.0, 0.4, 0.06}),
             slab({0.95, 0.3, 0.05}, {0.05, 0.3, 0.4}), slab({-0.95, 0.3, 0.05}, {0.05, 0.3, 0.4})};
  o.goals = {{Vec3(-0.5, 0.43, 0.08), Vec3::UnitZ(), Action::Sit},
             {Vec3(0.0, 0.43, 0.08), Vec3::UnitZ(), Action::Sit},
             {Vec3(0.5, 0.43, 0.08), Vec3::UnitZ(), Action::Sit},
             {Vec3(0.05, 0.44, 0.05), Vec3::UnitX(), Action::LieDown}};
  return o;
}

/// Corner sofa with two seating sections facing perpendicular directions.
inline SceneObject lsofa(std::string id = "lsofa") {
  SceneObject o{std::move(id), "lsofa", {}, {}, {}};
  o.boxes = {slab({-0.2, 0.2, 0}, {0.8, 0.2, 0.4}), slab({-0.2, 0.6, -0.45}, {0.8, 0.4, 0.05}),
             slab({1.0, 0.2, 0.4}, {0.4, 0.2, 0.8}), slab({1.45, 0.6, 0.4}, {0.05, 0.4, 0.8}),
             slab({-1.05, 0.3, 0}, {0.05, 0.3, 0.4})};
  o.goals = {{Vec3(-0.4, 0.43, 0.05), Vec3::UnitZ(), Action::Sit},
             {Vec3(0.95, 0.43, 0.75), -Vec3::UnitX(), Action::Sit}};
  return o;
}

inline SceneObject table(std::string id = "table") {
  SceneObject o{std::move(id), "table", {}, {}, {}};
  o.boxes = {slab({0, 0.72, 0}, {0.6, 0.03, 0.4})};
  for (double sx : {-1.0, 1.0})
    for (double sz : {-1.0, 1.0}) o.boxes.push_back(slab({0.55 * sx, 0.35, 0.35 * sz}, {0.03, 0.35, 0.03}));
  o.goals = {{Vec3(0, 0.78, 0.3), Vec3::UnitZ(), Action::Sit},
             {Vec3(0, 0.78, -0.3), -Vec3::UnitZ(), Action::Sit}};
  return o;
}

inline SceneObject bed(std::string id = "bed") {
  SceneObject o{std::move(id), "bed", {}, {}, {}};
  o.boxes = {slab({0, 0.25, 0}, {1.0, 0.25, 0.7}), slab({-1.02, 0.5, 0}, {0.03, 0.5, 0.7})};
  o.goals = {{Vec3(0.1, 0.54, 0), Vec3::UnitX(), Action::LieDown},
             {Vec3(0.2, 0.53, 0.5), Vec3::UnitZ(), Action::Sit}};
  return o;
}

inline const std::vector<std::string>& categories() {
  static const std::vector<std::string> c{"chair", "armchair", "sofa", "lsofa", "table", "bed"};
  return c;
}

inline SceneObject make(const std::string& category, std::string id) {
  if (category == "chair") return chair(std::move(id));
  if (category == "armchair") return armchair(std::move(id));
  if (category == "sofa") return sofa(std::move(id));
  if (category == "lsofa") return lsofa(std::move(id));
  if (category == "table") return table(std::move(id));
  if (category == "bed") return bed(std::move(id));
  throw Error(Errc::InvalidConfig, "unknown object category '" + category + "'");
}

/// Category instance with independent per-axis scale factors in [lo, hi].
inline SceneObject randomized(const std::string& category, std::string id, Rng& rng,
                              double lo = 0.8, double hi = 1.2) {
  std::uniform_real_distribution<double> u(lo, hi);
  const double sx = u(rng), sy = u(rng), sz = u(rng);
  return scaledObject(make(category, std::move(id)), Vec3(sx, sy, sz));
}

}  // namespace objects

/// Goals of an object in grid-origin-relative coordinates, ready for GoalNet.
inline std::vector<GoalSample> goalSamples(const SceneObject& obj) {
  const VoxelGrid grid = voxelizeObject(obj);
  std::vector<GoalSample> out;
  for (const auto& g : obj.goals) out.push_back(makeGoalSample(grid, g.position - grid.origin, g.direction));
  return out;
}

// ---------------------------------------------------------------------------
// Procedural animation

struct Style {
  double hipAmp = 0.45, kneeAmp = 0.7, armAmp = 0.35, elbowBend = 0.25, lean = 0.04;
  double bob = 0.02, phase = 0.0, cadence = 0.9, sitHip = 0.0, sitKnee = 0.0, sitLean = 0.1;
  double legSpread = 0.1, armRest = 0.5, turnSign = 1.0, hold = 2.0, breath = 0.015;

  static Style fromSeed(std::uint64_t seed) {
    Rng r(seed * 0x9E3779B97F4A7C15ull + 17);
    auto u = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(r); };
    Style s;
    s.hipAmp = u(0.35, 0.55);
    s.kneeAmp = u(0.5, 0.9);
    s.armAmp = u(0.2, 0.5);
    s.elbowBend = u(0.1, 0.5);
    s.lean = u(0.0, 0.1);
    s.bob = u(0.01, 0.03);
    s.phase = u(0, 2 * std::numbers::pi);
    s.cadence = u(0.85, 1.0);
    s.sitHip = u(-0.15, 0.15);
    s.sitKnee = u(-0.3, 0.3);
    s.sitLean = u(-0.05, 0.25);
    s.legSpread = u(0.0, 0.25);
    s.armRest = u(0.2, 0.8);
    s.turnSign = u(0, 1) < 0.5 ? -1.0 : 1.0;
    s.hold = u(1.8, 2.6);
    s.breath = u(0.01, 0.025);
    return s;
  }
};

using Quat = Eigen::Quaterniond;
using LocalPose = std::vector<Quat>;  // parent-relative; entry 0 is relative to the root frame

inline Quat rx(double a) { return Quat(Eigen::AngleAxisd(a, Vec3::UnitX())); }
inline Quat ry(double a) { return Quat(Eigen::AngleAxisd(a, Vec3::UnitY())); }
inline Quat rz(double a) { return Quat(Eigen::AngleAxisd(a, Vec3::UnitZ())); }

namespace detail {

inline void setJoint(const Skeleton& skel, LocalPose& p, std::string_view name, const Quat& q) {
  if (auto i = skel.find(name)) p[*i] = q;
}

inline double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3 - 2 * u);
}

inline double wrapAngle(double a) {
  while (a > std::numbers::pi) a -= 2 * std::numbers::pi;
  while (a < -std::numbers::pi) a += 2 * std::numbers::pi;
  return a;
}

}  // namespace detail

inline LocalPose restPose(const Skeleton& skel) {
  return LocalPose(static_cast<std::size_t>(skel.jointCount()), Quat::Identity());
}

inline LocalPose idlePose(const Skeleton& skel, const Style& s, double t) {
  LocalPose p = restPose(skel);
  const double b = s.breath * std::sin(2 * std::numbers::pi * 0.3 * t + s.phase);
  detail::setJoint(skel, p, "spine3", rx(b));
  detail::setJoint(skel, p, "left_shoulder", rx(0.5 * b));
  detail::setJoint(skel, p, "right_shoulder", rx(0.5 * b));
  return p;
}

/// Walking or running cycle at `phase`; `amount` scales every swing.
inline LocalPose gaitPose(const Skeleton& skel, const Style& s, double phase, double amount,
                          double runFactor = 1.0) {
  LocalPose p = restPose(skel);
  const double sp = std::sin(phase), cp = std::cos(phase);
  const double hip = amount * s.hipAmp * runFactor, knee = amount * s.kneeAmp * runFactor;
  const double arm = amount * s.armAmp * runFactor;
  p[0] = rx(amount * s.lean * runFactor) * ry(0.08 * amount * sp);
  detail::setJoint(skel, p, "left_hip", rx(-hip * sp));
  detail::setJoint(skel, p, "right_hip", rx(hip * sp));
  detail::setJoint(skel, p, "left_knee", rx(knee * 0.5 * (1 - cp)));
  detail::setJoint(skel, p, "right_knee", rx(knee * 0.5 * (1 + cp)));
  detail::setJoint(skel, p, "left_shoulder", rx(arm * sp));
  detail::setJoint(skel, p, "right_shoulder", rx(-arm * sp));
  detail::setJoint(skel, p, "left_elbow", rx(-amount * s.elbowBend * runFactor));
  detail::setJoint(skel, p, "right_elbow", rx(-amount * s.elbowBend * runFactor));
  detail::setJoint(skel, p, "spine3", ry(-0.1 * amount * sp));
  return p;
}

inline LocalPose sitPose(const Skeleton& skel, const Style& s, double t) {
  LocalPose p = restPose(skel);
  const double b = s.breath * std::sin(2 * std::numbers::pi * 0.3 * t + s.phase);
  const double hip = -std::numbers::pi / 2 + s.sitHip, knee = std::numbers::pi / 2 + s.sitKnee;
  detail::setJoint(skel, p, "left_hip", ry(s.legSpread) * rx(hip));
  detail::setJoint(skel, p, "right_hip", ry(-s.legSpread) * rx(hip));
  detail::setJoint(skel, p, "left_knee", rx(knee));
  detail::setJoint(skel, p, "right_knee", rx(knee));
  detail::setJoint(skel, p, "spine3", rx(s.sitLean + b));
  detail::setJoint(skel, p, "left_shoulder", rx(-s.armRest));
  detail::setJoint(skel, p, "right_shoulder", rx(-s.armRest));
  detail::setJoint(skel, p, "left_elbow", rx(-0.4 - 0.5 * s.armRest));
  detail::setJoint(skel, p, "right_elbow", rx(-0.4 - 0.5 * s.armRest));
  return p;
}

/// Supine pose: the body lies along the root's backward axis, face up.
inline LocalPose liePose(const Skeleton& skel, const Style& s, double t) {
  LocalPose p = restPose(skel);
  const double b = s.breath * std::sin(2 * std::numbers::pi * 0.25 * t + s.phase);
  p[0] = rx(-std::numbers::pi / 2);
  detail::setJoint(skel, p, "left_hip", ry(0.5 * s.legSpread) * rx(0.1 * s.sitKnee));
  detail::setJoint(skel, p, "right_hip", ry(-0.5 * s.legSpread) * rx(0.1 * s.sitKnee));
  detail::setJoint(skel, p, "left_knee", rx(0.1 + 0.2 * std::abs(s.sitKnee)));
  detail::setJoint(skel, p, "right_knee", rx(0.1 + 0.2 * std::abs(s.sitKnee)));
  detail::setJoint(skel, p, "spine3", rx(b));
  detail::setJoint(skel, p, "left_shoulder", rz(-0.3 * s.armRest));
  detail::setJoint(skel, p, "right_shoulder", rz(0.3 * s.armRest));
  return p;
}

inline LocalPose blendPose(const LocalPose& a, const LocalPose& b, double w) {
  LocalPose out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i].slerp(w, b[i]);
  return out;
}

/// World-space pose for a root placement and pelvis height.
inline Pose posePerFrame(const Skeleton& skel, const RootTransform& root, double pelvisY,
                         const LocalPose& local) {
  std::vector<Mat3> m(local.size());
  for (std::size_t i = 0; i < local.size(); ++i) m[i] = local[i].toRotationMatrix();
  m[0] = root.rotation() * m[0];
  return forwardKinematics(skel, Vec3(root.position.x(), pelvisY, root.position.y()), m);
}

inline Skeleton skeletonFor(const StateConfig& c) {
  if (c.joints == 22) return skeletons::body22();
  if (c.joints == 14) return skeletons::body14();
  throw Error(Errc::InvalidConfig, "no built-in skeleton with " + std::to_string(c.joints) + " joints");
}

/// World-space recording of one synthetic take.
struct Performance {
  Skeleton skeleton;
  double fps = 30.0;
  std::vector<ClipFrame> frames;
  std::vector<Action> labels;  // dominant action per frame
  Goal goal;                   // world frame
  std::string objectRef;       // empty when no object is involved
};

struct GenerateOptions {
  std::optional<Vec2> start;
  std::optional<double> heading;    // yaw, radians
  std::optional<double> duration;   // locomotion seconds (walk/run) or total (idle)
  std::optional<double> curvature;  // rad/m (walk/run)
  std::optional<double> speed;      // m/s
  std::string objectId;             // sit/liedown target
  int goalIndex = -1;               // -1 picks a matching goal at random
  double leadIn = 1.0;              // idle seconds before moving
};

inline constexpr double kWalkSpeed = 1.0;
inline constexpr double kRunSpeed = 2.5;
inline constexpr double kLabelFade = 0.5;  // seconds of action cross-fade

namespace detail {

/// Continuous action weights for a piecewise-constant label schedule with
/// linear cross-fades centered on each boundary.
inline Eigen::VectorXd labelWeights(double t, std::span<const std::pair<double, Action>> schedule,
                                    int actions) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(actions);
  w[static_cast<int>(schedule.front().second)] = 1.0;
  for (std::size_t k = 1; k < schedule.size(); ++k) {
    const double f = std::clamp((t - (schedule[k].first - kLabelFade / 2)) / kLabelFade, 0.0, 1.0);
    if (f <= 0) break;
    w *= 1.0 - f;
    w[static_cast<int>(schedule[k].second)] += f;
  }
  return w;
}

inline Action dominant(const Eigen::VectorXd& w) {
  Eigen::Index i = 0;
  w.maxCoeff(&i);
  return static_cast<Action>(i);
}

/// Velocities by central differences and contacts against `obj`.
inline void fillContacts(Performance& p, const SceneObject* obj) {
  const int n = static_cast<int>(p.frames.size());
  const auto key = keyJointIndices(p.skeleton);
  for (int i = 0; i < n; ++i) {
    auto& f = p.frames[i];
    f.contacts.fill(0.0);
    if (!obj) continue;
    const int a = std::max(0, i - 1), b = std::min(n - 1, i + 1);
    std::array<Vec3, kContactCount> pos, vel;
    for (int k = 0; k < kContactCount; ++k) {
      pos[k] = f.pose.positions[key[k]];
      vel[k] = b > a ? Vec3((p.frames[b].pose.positions[key[k]] - p.frames[a].pose.positions[key[k]]) *
                            (p.fps / (b - a)))
                     : Vec3::Zero();
    }
    const ContactFrame c = detectContacts(pos, vel, *obj);
    for (int k = 0; k < kContactCount; ++k) f.contacts[k] = c.inContact[k] ? 1.0 : 0.0;
  }
}

}  // namespace detail

/// Idle, walk or run take without an object.
inline Performance generateLocomotion(Action kind, std::uint64_t styleSeed, const StateConfig& c,
                                      const GenerateOptions& opts = {}) {
  const Style s = Style::fromSeed(styleSeed);
  Rng rng(styleSeed ^ (0xA5A5ull + static_cast<std::uint64_t>(kind)));
  auto u = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  Performance p;
  p.skeleton = skeletonFor(c);
  p.fps = c.fps;
  const double h0 = p.skeleton.standingHeight();
  const Vec2 start = opts.start.value_or(Vec2(u(-1, 1), u(-1, 1)));
  const double yaw0 = opts.heading.value_or(u(-std::numbers::pi, std::numbers::pi));
  const bool moving = kind == Action::Walk || kind == Action::Run;
  const double speed = opts.speed.value_or(kind == Action::Run ? kRunSpeed : kWalkSpeed);
  const double curvature = opts.curvature.value_or(moving ? u(-0.25, 0.25) : 0.0);
  const double moveTime = moving ? opts.duration.value_or(u(3.0, 6.0)) : 0.0;
  const double lead = opts.leadIn;
  const double total = moving ? lead + moveTime + 0.5 : opts.duration.value_or(3.0 + s.hold);
  const double runFactor = kind == Action::Run ? 1.4 : 1.0;
  const double cadence = s.cadence * (kind == Action::Run ? 1.6 : 1.0) * speed / kWalkSpeed;

  auto rootAt = [&](double arc) {
    const double th = yaw0 + curvature * arc;
    Vec2 pos;
    if (std::abs(curvature) < 1e-9) {
      pos = start + arc * Vec2(std::sin(yaw0), std::cos(yaw0));
    } else {
      pos = start + Vec2(std::cos(yaw0) - std::cos(th), std::sin(th) - std::sin(yaw0)) / curvature;
    }
    return RootTransform::fromYaw(pos, th);
  };

  std::vector<std::pair<double, Action>> schedule{{0.0, Action::Idle}};
  if (moving) {
    schedule.push_back({lead, kind});
    schedule.push_back({lead + moveTime, Action::Idle});
  }
  const int n = static_cast<int>(std::lround(total * c.fps)) + 1;
  for (int i = 0; i < n; ++i) {
    const double t = i / c.fps;
    const double tm = std::clamp(t - lead, 0.0, moveTime);
    const RootTransform root = rootAt(moving ? speed * tm : 0.0);
    LocalPose local;
    double y = h0;
    if (moving && t > lead && t < lead + moveTime) {
      const double ramp = detail::smoothstep(std::min(t - lead, lead + moveTime - t) / 0.4);
      const double phase = s.phase + 2 * std::numbers::pi * cadence * tm;
      local = blendPose(idlePose(p.skeleton, s, t), gaitPose(p.skeleton, s, phase, 1.0, runFactor), ramp);
      y = h0 - ramp * s.bob * runFactor * 0.5 * (1 - std::cos(2 * phase));
    } else {
      local = idlePose(p.skeleton, s, t);
    }
    ClipFrame f;
    f.root = root;
    f.pose = posePerFrame(p.skeleton, root, y, local);
    f.actions = detail::labelWeights(t, schedule, c.actions);
    p.labels.push_back(detail::dominant(f.actions));
    p.frames.push_back(std::move(f));
  }
  detail::fillContacts(p, nullptr);
  const RootTransform end = p.frames.back().root;
  p.goal.position = Vec3(end.position.x(), 0.0, end.position.y());
  p.goal.direction = Vec3(end.forward.x(), 0.0, end.forward.y());
  p.goal.action = moving ? kind : Action::Idle;
  return p;
}

/// Walk up to an object and sit or lie on one of its labeled goals.
inline Performance generateInteraction(Action kind, std::uint64_t styleSeed, const Scene& scene,
                                       const StateConfig& c, const GenerateOptions& opts) {
  const SceneObject* obj = scene.find(opts.objectId);
  if (!obj) throw Error(Errc::UnknownObject, "no object '" + opts.objectId + "' in the scene");
  std::vector<int> candidates;
  for (int i = 0; i < static_cast<int>(obj->goals.size()); ++i)
    if (obj->goals[i].action == kind) candidates.push_back(i);
  if (candidates.empty()) throw Error(Errc::NoGoal, "object '" + obj->id + "' has no matching goal");
  const Style s = Style::fromSeed(styleSeed);
  Rng rng(styleSeed ^ (0x5A5Aull + static_cast<std::uint64_t>(kind)));
  auto u = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  int gi = opts.goalIndex;
  if (gi < 0) gi = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
  if (gi >= static_cast<int>(obj->goals.size()) || obj->goals[gi].action != kind) {
    throw Error(Errc::NoGoal, "goal index does not name a matching goal");
  }
  const LabeledGoal& lg = obj->goals[gi];

  Performance p;
  p.skeleton = skeletonFor(c);
  p.fps = c.fps;
  p.objectRef = obj->id;
  p.goal = {obj->toWorld(lg.position), obj->dirToWorld(lg.direction).normalized(), kind};
  const double h0 = p.skeleton.standingHeight();
  const Vec2 gG = ground(p.goal.position);
  const Vec2 gd = normalizedOr(ground(p.goal.direction), Vec2(0, 1));
  constexpr double kClear = 0.35;

  // Approach point: in front of the goal for sitting, beside it for lying.
  Vec2 a = gd;
  if (kind == Action::LieDown) {
    const Vec2 left(-gd.y(), gd.x());
    auto reach = [&](const Vec2& dir) {
      for (double d = 0.2; d < 3.0; d += 0.05)
        if (footprintClearance(scene, gG + dir * d) >= kClear) return d;
      return 3.0;
    };
    a = reach(left) <= reach(-left) ? left : Vec2(-left);
  }
  double dp = 0.2;
  while (dp < 3.0 && footprintClearance(scene, gG + a * dp) < kClear) dp += 0.05;
  const Vec2 P = gG + a * dp;

  Vec2 S = opts.start.value_or(Vec2::Zero());
  if (!opts.start) {
    double bestScore = -1;
    for (int tries = 0; tries < 64; ++tries) {
      const double ang = u(-1.0, 1.0);
      const double dist = u(2.5, 4.5);
      const Vec2 dir(std::cos(ang) * a.x() - std::sin(ang) * a.y(), std::sin(ang) * a.x() + std::cos(ang) * a.y());
      const Vec2 cand = P + dir * dist;
      double worst = std::numeric_limits<double>::infinity();
      for (double f = 0.0; f <= 1.0; f += 0.05) {
        const Vec2 q = cand + (P - cand) * f;
        if ((q - P).norm() < 0.3) continue;
        worst = std::min(worst, footprintClearance(scene, q));
      }
      if (worst > bestScore) {
        bestScore = worst;
        S = cand;
      }
      if (worst >= kClear) break;
    }
  }
  const double speed = opts.speed.value_or(kWalkSpeed);
  const Vec2 travel = P - S;
  const double walkLen = travel.norm();
  const double walkYaw = walkLen > 1e-9 ? std::atan2(travel.x(), travel.y()) : std::atan2(-a.x(), -a.y());
  const double goalYaw = std::atan2(gd.x(), gd.y());
  double turn = detail::wrapAngle(goalYaw - walkYaw);
  if (std::abs(std::abs(turn) - std::numbers::pi) < 0.3) turn = s.turnSign * std::abs(turn);

  const double lead = opts.leadIn;
  const double tWalk = walkLen / speed;
  const double t1 = lead + tWalk;
  const double tTr = 1.6;
  const double t2 = t1 + tTr;
  const double total = t2 + s.hold;
  const double cadence = s.cadence * speed / kWalkSpeed;
  const std::vector<std::pair<double, Action>> schedule{
      {0.0, Action::Idle}, {lead, Action::Walk}, {t1 + 0.5 * tTr, kind}};
  auto terminal = [&](double t) {
    return kind == Action::Sit ? sitPose(p.skeleton, s, t) : liePose(p.skeleton, s, t);
  };

  const int n = static_cast<int>(std::lround(total * c.fps)) + 1;
  for (int i = 0; i < n; ++i) {
    const double t = i / c.fps;
    RootTransform root;
    LocalPose local;
    double y = h0;
    if (t <= lead) {
      root = RootTransform::fromYaw(S, walkYaw);
      local = idlePose(p.skeleton, s, t);
    } else if (t <= t1) {
      const double tm = t - lead;
      const double phase = s.phase + 2 * std::numbers::pi * cadence * tm;
      const double ramp = detail::smoothstep(tm / 0.4);
      root = RootTransform::fromYaw(S + travel * (tWalk > 0 ? tm / tWalk : 1.0), walkYaw);
      local = blendPose(idlePose(p.skeleton, s, t), gaitPose(p.skeleton, s, phase, 1.0), ramp);
      y = h0 - ramp * s.bob * 0.5 * (1 - std::cos(2 * phase));
    } else if (t <= t2) {
      const double uu = (t - t1) / tTr;
      const double e = detail::smoothstep(uu);
      const double phase = s.phase + 2 * std::numbers::pi * cadence * tWalk;
      root = RootTransform::fromYaw(P + (gG - P) * e, walkYaw + turn * e);
      local = blendPose(gaitPose(p.skeleton, s, phase, 1.0 - uu), terminal(t), e);
      y = h0 + (p.goal.position.y() - h0) * e;
    } else {
      root = RootTransform::fromYaw(gG, goalYaw);
      local = terminal(t);
      y = p.goal.position.y();
    }
    ClipFrame f;
    f.root = root;
    f.pose = posePerFrame(p.skeleton, root, y, local);
    f.actions = detail::labelWeights(t, schedule, c.actions);
    p.labels.push_back(detail::dominant(f.actions));
    p.frames.push_back(std::move(f));
  }
  detail::fillContacts(p, obj);
  return p;
}

inline Performance generatePerformance(Action kind, std::uint64_t styleSeed, const Scene& scene,
                                       const StateConfig& c, const GenerateOptions& opts = {}) {
  c.validate();
  if (kind == Action::Sit || kind == Action::LieDown) {
    if (opts.objectId.empty()) throw Error(Errc::NoGoal, "interaction clips need a target object");
    return generateInteraction(kind, styleSeed, scene, c, opts);
  }
  return generateLocomotion(kind, styleSeed, c, opts);
}

// ---------------------------------------------------------------------------
// Clips

/// State sequence of one take. Frame k of `states` corresponds to
/// `roots[k]` and `labels[k]`; states are stored at float precision.
struct MotionClip {
  StateConfig config;
  std::string objectRef;
  Goal goal;
  std::vector<CharacterState> states;
  std::vector<Action> labels;
  std::vector<RootTransform> roots;

  double fps() const { return config.fps; }
  std::size_t size() const { return states.size(); }
};

/// Rounds every field to float precision so files round-trip exactly.
inline CharacterState quantize(const CharacterState& s, const StateConfig& c) {
  Eigen::VectorXd v = flatten(s, c);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<double>(static_cast<float>(v[i]));
  return unflatten(v, c);
}

inline MotionClip clipFromPerformance(const Performance& p, const StateConfig& c) {
  const int h = requiredHistory(c);
  const int n = static_cast<int>(p.frames.size());
  if (n <= h) throw Error(Errc::TooFewFrames, "take is shorter than the state history window");
  MotionClip clip;
  clip.config = c;
  clip.objectRef = p.objectRef;
  clip.goal = p.goal;
  for (int i = h; i < n; ++i) {
    clip.states.push_back(quantize(buildState(p.frames, i, p.goal, c), c));
    clip.labels.push_back(p.labels[i]);
    clip.roots.push_back(p.frames[i].root);
  }
  return clip;
}

inline MotionClip generateClip(Action kind, std::uint64_t styleSeed, const Scene& scene,
                               const StateConfig& c, const GenerateOptions& opts = {}) {
  return clipFromPerformance(generatePerformance(kind, styleSeed, scene, c, opts), c);
}

namespace detail {

inline nlohmann::json goalToJson(const Goal& g) {
  return {{"position", vec(g.position)}, {"direction", vec(g.direction)},
          {"action", std::string(actionName(g.action))}};
}

inline Action actionFromJson(const nlohmann::json& j) {
  const auto a = parseAction(j.get<std::string>());
  if (!a) throw Error(Errc::CorruptHeader, "unknown action label '" + j.get<std::string>() + "'");
  return *a;
}

inline Goal goalFromJson(const nlohmann::json& j) {
  return {vec3(j.at("position")), vec3(j.at("direction")), actionFromJson(j.at("action"))};
}

}  // namespace detail

inline constexpr const char* kClipFormat = "scenemotion-clip/1";

/// One header line of JSON, then frameCount * stateDim little-endian floats.
inline void writeClip(const MotionClip& clip, const std::string& path) {
  const int dim = stateDim(clip.config);
  nlohmann::json labels = nlohmann::json::array();
  for (Action a : clip.labels) labels.push_back(std::string(actionName(a)));
  nlohmann::json roots = nlohmann::json::array();
  for (const auto& r : clip.roots) roots.push_back({r.position.x(), r.position.y(), r.forward.x(), r.forward.y()});
  const nlohmann::json header = {{"format", kClipFormat},
                                 {"config", stateConfigToJson(clip.config)},
                                 {"fps", clip.config.fps},
                                 {"objectRef", clip.objectRef},
                                 {"goal", detail::goalToJson(clip.goal)},
                                 {"labels", labels},
                                 {"roots", roots},
                                 {"frameCount", clip.states.size()},
                                 {"stateDim", dim}};
  std::vector<char> bytes;
  const std::string h = header.dump() + "\n";
  bytes.assign(h.begin(), h.end());
  bytes.reserve(bytes.size() + clip.states.size() * static_cast<std::size_t>(dim) * 4);
  for (const auto& s : clip.states) {
    const Eigen::VectorXd v = flatten(s, clip.config);
    for (Eigen::Index i = 0; i < v.size(); ++i) detail::putFloatLE(bytes, static_cast<float>(v[i]));
  }
  detail::writeAll(path, bytes);
}

inline MotionClip readClip(const std::string& path) {
  const auto bytes = detail::readAll(path);
  const auto nl = std::find(bytes.begin(), bytes.end(), '\n');
  if (nl == bytes.end()) throw Error(Errc::CorruptHeader, path + ": missing header line");
  MotionClip clip;
  std::size_t frames = 0;
  try {
    const auto header = nlohmann::json::parse(bytes.begin(), nl);
    if (header.at("format").get<std::string>() != kClipFormat) {
      throw Error(Errc::CorruptHeader, path + ": not a clip file");
    }
    clip.config = stateConfigFromJson(header.at("config"));
    clip.objectRef = header.at("objectRef").get<std::string>();
    clip.goal = detail::goalFromJson(header.at("goal"));
    frames = header.at("frameCount").get<std::size_t>();
    if (header.at("stateDim").get<int>() != stateDim(clip.config)) {
      throw Error(Errc::CorruptHeader, path + ": stateDim disagrees with the config");
    }
    for (const auto& l : header.at("labels")) clip.labels.push_back(detail::actionFromJson(l));
    for (const auto& r : header.at("roots")) {
      clip.roots.push_back({Vec2(r.at(0).get<double>(), r.at(1).get<double>()),
                            Vec2(r.at(2).get<double>(), r.at(3).get<double>())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptHeader, path + ": " + e.what());
  }
  if (clip.labels.size() != frames || clip.roots.size() != frames) {
    throw Error(Errc::CorruptHeader, path + ": per-frame header arrays disagree with frameCount");
  }
  const auto dim = static_cast<std::size_t>(stateDim(clip.config));
  const std::size_t payload = static_cast<std::size_t>(bytes.end() - nl - 1);
  if (payload != frames * dim * 4) {
    throw Error(Errc::LengthMismatch, path + ": payload holds " + std::to_string(payload) +
                                          " bytes, header implies " + std::to_string(frames * dim * 4));
  }
  const char* p = &*nl + 1;
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t i = 0; i < dim; ++i, p += 4) v[static_cast<Eigen::Index>(i)] = detail::getFloatLE(p);
    clip.states.push_back(unflatten(v, clip.config));
  }
  return clip;
}

// ---------------------------------------------------------------------------
// Statistics and training windows

/// Population mean and std over every frame; constant features get std 1.
inline Normalizer computeStats(std::span<const MotionClip> clips) {
  std::size_t frames = 0;
  for (const auto& c : clips) frames += c.states.size();
  if (clips.empty() || frames == 0) throw Error(Errc::EmptyDataset, "no frames to compute statistics over");
  const StateConfig cfg = clips.front().config;
  const int dim = stateDim(cfg);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  for (const auto& c : clips) {
    if (!(c.config == cfg)) throw Error(Errc::DimMismatch, "clips use different state configs");
    for (const auto& s : c.states) sum += flatten(s, cfg);
  }
  const Eigen::VectorXd mean = sum / static_cast<double>(frames);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (const auto& c : clips)
    for (const auto& s : c.states) var += (flatten(s, cfg) - mean).array().square().matrix();
  Eigen::VectorXd sd = (var / static_cast<double>(frames)).cwiseSqrt();
  for (Eigen::Index i = 0; i < sd.size(); ++i)
    if (!(sd[i] > 1e-8)) sd[i] = 1.0;
  return {mean, sd};
}

/// Root-relative voxel input for every frame of a clip (zeros when the clip
/// has no object).
inline std::vector<Eigen::VectorXd> clipVoxels(const MotionClip& clip, const Scene& scene) {
  std::vector<Eigen::VectorXd> out;
  const SceneObject* obj = clip.objectRef.empty() ? nullptr : scene.find(clip.objectRef);
  if (!clip.objectRef.empty() && !obj) throw Error(Errc::UnknownObject, "clip refers to missing object " + clip.objectRef);
  if (!obj) {
    out.assign(clip.roots.size(), Eigen::VectorXd::Zero(kVoxelFeatures));
    return out;
  }
  const VoxelGrid grid = voxelizeObject(*obj);
  for (const auto& r : clip.roots) out.push_back(flattenGrid(encodeRelative(grid, r)));
  return out;
}

/// Standardized windows of `length` frames every `stride` frames.
inline std::vector<TrainingWindow> makeWindows(const MotionClip& clip, const Scene& scene,
                                               const Normalizer& norm, int length, int stride) {
  if (length < 2 || stride < 1) throw Error(Errc::InvalidConfig, "windows need length >= 2, stride >= 1");
  const auto voxels = clipVoxels(clip, scene);
  std::vector<TrainingWindow> out;
  const int n = static_cast<int>(clip.states.size());
  for (int s = 0; s + length <= n; s += stride) {
    TrainingWindow w;
    for (int k = s; k < s + length; ++k) {
      w.states.push_back(norm.normalize(flatten(clip.states[k], clip.config)));
      w.voxels.push_back(voxels[k]);
    }
    out.push_back(std::move(w));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus and manifest

struct CorpusSpec {
  int walk = 3, run = 1, idle = 1, sit = 3, liedown = 1;
  double objectSpacing = 15.0;

  static CorpusSpec tiny() { return {}; }
  static CorpusSpec full() { return {40, 10, 8, 30, 12, 15.0}; }
};

struct Corpus {
  Scene scene;
  std::vector<MotionClip> clips;
};

/// Interaction clips each get their own randomized object, spaced far apart
/// in one shared scene.
inline Corpus generateCorpus(const StateConfig& c, std::uint64_t seed, const CorpusSpec& mix = {}) {
  Corpus corpus;
  Rng rng(seed);
  std::uint64_t next = seed * 1000;
  auto add = [&](Action kind, int count) {
    for (int i = 0; i < count; ++i) corpus.clips.push_back(generateClip(kind, ++next, corpus.scene, c));
  };
  add(Action::Idle, mix.idle);
  add(Action::Walk, mix.walk);
  add(Action::Run, mix.run);
  const std::vector<std::string> sitCats{"chair", "armchair", "sofa", "lsofa", "table", "bed"};
  const std::vector<std::string> lieCats{"sofa", "bed"};
  int slot = 0;
  auto place = [&](Action kind, const std::vector<std::string>& cats, int count) {
    for (int i = 0; i < count; ++i, ++slot) {
      const std::string id = "obj" + std::to_string(slot);
      SceneObject obj = objects::randomized(cats[static_cast<std::size_t>(i) % cats.size()], id, rng);
      obj.pose = RootTransform::fromYaw(Vec2(mix.objectSpacing * (slot + 1), 0.0),
                                        std::uniform_real_distribution<double>(-3.2, 3.2)(rng));
      corpus.scene.objects.push_back(obj);
      GenerateOptions o;
      o.objectId = id;
      corpus.clips.push_back(generateClip(kind, ++next, corpus.scene, c, o));
    }
  };
  place(Action::Sit, sitCats, mix.sit);
  place(Action::LieDown, lieCats, mix.liedown);
  return corpus;
}

struct DatasetManifest {
  StateConfig config;
  std::string scene;               // scene file, relative to the manifest
  std::vector<std::string> clips;  // clip files, relative to the manifest
  Normalizer stats;

  nlohmann::json toJson() const {
    nlohmann::json actions = nlohmann::json::array();
    for (auto a : kActionNames) actions.push_back(std::string(a));
    return {{"format", "scenemotion-dataset/1"},
            {"config", stateConfigToJson(config)},
            {"scene", scene},
            {"clips", clips},
            {"actions", actions},
            {"mean", std::vector<double>(stats.mean.data(), stats.mean.data() + stats.mean.size())},
            {"std", std::vector<double>(stats.stdev.data(), stats.stdev.data() + stats.stdev.size())}};
  }

  static DatasetManifest fromJson(const nlohmann::json& j) {
    try {
      DatasetManifest m;
      m.config = stateConfigFromJson(j.at("config"));
      m.scene = j.at("scene").get<std::string>();
      m.clips = j.at("clips").get<std::vector<std::string>>();
      const auto mean = j.at("mean").get<std::vector<double>>();
      const auto sd = j.at("std").get<std::vector<double>>();
      const auto dim = static_cast<std::size_t>(stateDim(m.config));
      if (mean.size() != dim || sd.size() != dim) {
        throw Error(Errc::LengthMismatch, "manifest statistics do not match stateDim");
      }
      m.stats.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(dim));
      m.stats.stdev = Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(dim));
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::CorruptHeader, std::string("manifest: ") + e.what());
    }
  }
};

/// Writes scene.json, clips/clip_NNN.clip and manifest.json under `dir`.
inline DatasetManifest writeCorpus(const Corpus& corpus, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "clips");
  DatasetManifest m;
  if (corpus.clips.empty()) throw Error(Errc::EmptyDataset, "corpus has no clips");
  m.config = corpus.clips.front().config;
  m.scene = "scene.json";
  saveScene(corpus.scene, (fs::path(dir) / m.scene).string());
  for (std::size_t i = 0; i < corpus.clips.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "clips/clip_%03zu.clip", i);
    writeClip(corpus.clips[i], (fs::path(dir) / name).string());
    m.clips.push_back(name);
  }
  m.stats = computeStats(corpus.clips);
  detail::writeAll((fs::path(dir) / "manifest.json").string(), m.toJson().dump(2) + "\n");
  return m;
}

inline DatasetManifest readManifest(const std::string& path) {
  const auto bytes = detail::readAll(path);
  try {
    return DatasetManifest::fromJson(nlohmann::json::parse(bytes.begin(), bytes.end()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptHeader, path + ": " + e.what());
  }
}

/// Loads the scene and every clip a manifest lists.
inline Corpus readCorpus(const std::string& manifestPath, DatasetManifest* manifestOut = nullptr) {
  namespace fs = std::filesystem;
  const DatasetManifest m = readManifest(manifestPath);
  const fs::path dir = fs::path(manifestPath).parent_path();
  Corpus c;
  c.scene = loadScene((dir / m.scene).string());
  for (const auto& f : m.clips) c.clips.push_back(readClip((dir / f).string()));
  if (manifestOut) *manifestOut = m;
  return c;
}

}  // namespace scenemotion

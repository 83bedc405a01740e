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

// Interaction sessions: sample a goal, plan a path, then step the motion
// network frame by frame until the target action has been executed.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scenemotion/dataset.hpp"
#include "scenemotion/error.hpp"
#include "scenemotion/goal_net.hpp"
#include "scenemotion/metrics.hpp"
#include "scenemotion/motion_net.hpp"
#include "scenemotion/planner.hpp"
#include "scenemotion/state.hpp"
#include "scenemotion/voxel.hpp"

namespace scenemotion {

enum class SessionStatus { Navigating, Transitioning, Executing, Done, Failed };

inline const char* statusName(SessionStatus s) {
  switch (s) {
    case SessionStatus::Navigating: return "navigating";
    case SessionStatus::Transitioning: return "transitioning";
    case SessionStatus::Executing: return "executing";
    case SessionStatus::Done: return "done";
    case SessionStatus::Failed: return "failed";
  }
  return "?";
}

/// How frames are produced: the learned model, or a scripted walker that
/// follows the sub-goals at constant speed (used to test planning alone).
enum class Driver { Network, Kinematic };

struct SessionOptions {
  Vec2 start = Vec2::Zero();
  double startYaw = 0.0;
  NavGridOptions nav;
  bool usePlanner = true;
  LatentMode latent = LatentMode::Sample;
  Driver driver = Driver::Network;
  double rampDistance = 1.5;  // m from the final waypoint
  double rampSeconds = 1.0;
  double capSeconds = kExecutionCapSeconds;
};

/// Frozen models shared read-only between sessions. `goal` may be null, in
/// which case a labeled goal of the object is drawn instead.
struct Models {
  const MotionNet* motion = nullptr;
  const GoalNet* goal = nullptr;
};

struct FrameEvent {
  int frame = 0;
  std::vector<Vec3> joints;  // world
  RootTransform root;
  std::array<double, kContactCount> contacts{};
  Eigen::VectorXd actions;
  Goal subgoal;
  SessionStatus status = SessionStatus::Navigating;
};

struct Session {
  const Scene* scene = nullptr;
  Models models;
  SessionOptions options;
  StateConfig config;
  std::string objectId;
  Action action = Action::Sit;
  std::uint64_t seed = 0;
  Rng goalRng;
  Rng latentRng;

  VoxelGrid grid;
  NavGrid nav;
  NavPath path;
  std::size_t cursor = 1;
  Goal goal;    // target, world
  Goal active;  // current sub-goal
  CharacterState state;
  RootTransform root;
  SessionStatus status = SessionStatus::Navigating;
  int frame = 0;
  int rampStart = -1;
  int persist = 0;
  double walkPhase = 0.0;
  std::vector<Eigen::VectorXd> actionHistory;
};

namespace detail {

inline constexpr std::uint64_t kLatentStream = 0x6C617465ull;

inline Goal drawGoal(Session& s, const SceneObject& obj) {
  if (s.models.goal) {
    const Goal local = sampleGoals(*s.models.goal, s.grid, 1, s.goalRng, s.action).front();
    return goalToWorld(local, s.grid);
  }
  std::vector<const LabeledGoal*> c;
  for (const auto& g : obj.goals)
    if (g.action == s.action) c.push_back(&g);
  if (c.empty()) throw Error(Errc::NoGoal, "object '" + obj.id + "' has no goal for this action");
  const auto* g = c[std::uniform_int_distribution<std::size_t>(0, c.size() - 1)(s.goalRng)];
  return {obj.toWorld(g->position), obj.dirToWorld(g->direction).normalized(), s.action};
}

inline void plan(Session& s) {
  const Vec2 target = ground(s.goal.position);
  const std::array<Vec2, 2> pts{s.root.position, target};
  s.nav = buildNavGrid(*s.scene, s.options.nav, pts);
  if (s.options.usePlanner) {
    // A character standing inside an inflated footprint (e.g. still seated)
    // first steps out to the nearest free cell.
    const auto here = s.nav.cellAt(s.root.position);
    if (here && s.nav.isBlocked(*here)) {
      const auto free = nearestFreeCell(s.nav, s.root.position);
      if (!free) throw Error(Errc::BlockedStart, "no free cell near the character");
      s.path = planPath(s.nav, s.nav.center(*free), target);
      s.path.waypoints.insert(s.path.waypoints.begin(), s.root.position);
      s.path.length += (s.nav.center(*free) - s.root.position).norm();
    } else {
      s.path = planPath(s.nav, s.root.position, target);
    }
  } else {
    s.path.waypoints = {s.root.position, target};
    s.path.length = (target - s.root.position).norm();
  }
  s.cursor = 1;
}

}  // namespace detail

/// Idle standing state of the built-in skeleton, seen from its own root.
inline CharacterState idleStartState(const StateConfig& c) {
  GenerateOptions o;
  o.start = Vec2::Zero();
  o.heading = 0.0;
  o.duration = 2.0 * c.windowSeconds + 1.0;
  const Performance p = generateLocomotion(Action::Idle, 0, c, o);
  const Goal here{Vec3::Zero(), Vec3::UnitZ(), Action::Idle};
  return buildState(p.frames, requiredHistory(c), here, c);
}

inline Session startSession(const Scene& scene, const std::string& objectId, Action action,
                            std::uint64_t seed, Models models, SessionOptions opts = {}) {
  if (action != Action::Sit && action != Action::LieDown) {
    throw Error(Errc::UnsupportedAction, "sessions support sit and liedown only");
  }
  const SceneObject* obj = scene.find(objectId);
  if (!obj) throw Error(Errc::UnknownObject, "no object '" + objectId + "' in the scene");
  if (opts.driver == Driver::Network && !models.motion) {
    throw Error(Errc::InvalidConfig, "the network driver needs a motion model");
  }
  Session s;
  s.scene = &scene;
  s.models = models;
  s.options = opts;
  s.config = models.motion ? models.motion->config.state : StateConfig::tiny();
  s.objectId = objectId;
  s.action = action;
  s.seed = seed;
  s.goalRng = Rng(seed);
  s.latentRng = Rng(seed ^ detail::kLatentStream);
  s.grid = voxelizeObject(*obj);
  s.root = RootTransform::fromYaw(opts.start, opts.startYaw);
  s.goal = detail::drawGoal(s, *obj);
  detail::plan(s);
  s.state = idleStartState(s.config);
  s.active = nextSubgoal(s.path, s.root.position, s.cursor, s.goal).goal;
  if ((s.path.waypoints.back() - s.root.position).norm() < opts.rampDistance) {
    s.status = SessionStatus::Transitioning;
    s.rampStart = 0;
  }
  return s;
}

/// New latent stream; optionally also a new goal (and path from here).
inline void resampleStyle(Session& s, std::uint64_t seed, bool resampleGoal = false) {
  s.latentRng = Rng(seed ^ detail::kLatentStream);
  if (!resampleGoal) return;
  s.goalRng = Rng(seed);
  const SceneObject* obj = s.scene->find(s.objectId);
  s.goal = detail::drawGoal(s, *obj);
  detail::plan(s);
  s.status = SessionStatus::Navigating;
  s.rampStart = -1;
  s.persist = 0;
}

inline std::vector<Vec3> worldJoints(const CharacterState& s, const RootTransform& root) {
  std::vector<Vec3> out;
  for (const auto& p : s.jp) out.push_back(fromRootRelative(p, root));
  return out;
}

namespace detail {

/// Blends the future half of the trajectory action window toward `target`.
inline void rampActions(CharacterState& s, Action target, double w) {
  const Eigen::Index t = s.ta.rows();
  for (Eigen::Index k = t / 2 + 1; k < t; ++k) {
    s.ta.row(k).setZero();
    s.ta(k, static_cast<int>(Action::Walk)) = 1.0 - w;
    s.ta(k, static_cast<int>(target)) += w;
  }
}

inline constexpr double kTurnRate = std::numbers::pi;  // rad/s

inline void kinematicStep(Session& s) {
  const double dt = 1.0 / s.config.fps;
  const Vec2 to = ground(s.active.position) - s.root.position;
  const double dist = to.norm();
  RootTransform next = s.root;
  if (dist > 1e-6) {
    const double stepLen = std::min(dist, kWalkSpeed * dt);
    next.position += to / dist * stepLen;
    next.forward = to / dist;
    s.walkPhase += 2 * std::numbers::pi * 0.9 * dt;
  }
  // On the final goal, turn in place to face the goal direction.
  const bool onFinal = s.active.action == s.action;
  double facing = 0.0;
  if (onFinal && dist <= 1e-6) {
    const Vec2 want = normalizedOr(Vec2(s.active.direction.x(), s.active.direction.z()), next.forward);
    const double err = std::atan2(next.forward.x() * want.y() - next.forward.y() * want.x(), next.forward.dot(want));
    const double turn = std::clamp(err, -kTurnRate * dt, kTurnRate * dt);
    next.forward = Vec2(std::cos(turn) * next.forward.x() - std::sin(turn) * next.forward.y(),
                        std::sin(turn) * next.forward.x() + std::cos(turn) * next.forward.y());
    facing = std::abs(err - turn);
  } else if (onFinal) {
    facing = std::numbers::pi;
  }
  const Skeleton skel = skeletonFor(s.config);
  const Style style;
  const Pose pose = posePerFrame(skel, next, skel.standingHeight(),
                                 gaitPose(skel, style, s.walkPhase, dist > 1e-6 ? 1.0 : 0.0));
  for (int j = 0; j < s.config.joints; ++j) s.state.jp[j] = toRootRelative(pose.positions[j], next);
  const double arrived = dist < 0.05 && onFinal && facing < 0.05 ? 1.0 : 0.0;
  const Eigen::Index c = s.state.ta.rows() / 2;
  s.state.ta.row(c).setZero();
  s.state.ta(c, static_cast<int>(arrived > 0 ? s.action : Action::Walk)) = 1.0;
  s.root = next;
}

}  // namespace detail

/// Advances one frame. Network failures mark the session failed and return
/// the last good frame.
inline FrameEvent step(Session& s) {
  if (s.status == SessionStatus::Done || s.status == SessionStatus::Failed) {
    throw Error(Errc::InvalidConfig, "session has already finished");
  }
  const Subgoal sub = nextSubgoal(s.path, s.root.position, s.cursor, s.goal);
  s.cursor = sub.cursor;
  s.active = sub.goal;

  const double toFinal = (s.path.waypoints.back() - s.root.position).norm();
  if (s.status == SessionStatus::Navigating && toFinal < s.options.rampDistance) {
    s.status = SessionStatus::Transitioning;
    s.rampStart = s.frame;
  }
  const double ramp = s.rampStart < 0 ? 0.0
                                      : std::clamp((s.frame - s.rampStart) / (s.options.rampSeconds * s.config.fps),
                                                   0.0, 1.0);

  if (s.options.driver == Driver::Kinematic) {
    detail::kinematicStep(s);
  } else {
    CharacterState input = s.state;
    setGoalWindow(input, s.active, s.root);
    if (s.rampStart >= 0) detail::rampActions(input, s.action, ramp);
    const VectorXd voxels = flattenGrid(encodeRelative(s.grid, s.root));
    try {
      CharacterState next = predictNext(*s.models.motion, input, voxels, s.latentRng, s.options.latent);
      const int c = centerSample(s.config);
      s.root = applyDelta(s.root, {next.tp[c], next.td[c]});
      s.state = std::move(next);
    } catch (const Error& e) {
      if (e.code() != Errc::NonFiniteOutput) throw;
      s.status = SessionStatus::Failed;
    }
  }
  ++s.frame;

  const VectorXd actions = currentActions(s.state);
  s.actionHistory.push_back(actions);
  if (s.status != SessionStatus::Failed) {
    Eigen::Index arg = 0;
    actions.maxCoeff(&arg);
    const bool onTarget = arg == static_cast<Eigen::Index>(s.action);
    if (s.status == SessionStatus::Transitioning && onTarget) s.status = SessionStatus::Executing;
    if (s.status == SessionStatus::Executing) {
      s.persist = onTarget ? s.persist + 1 : 0;
      const int need = std::max(1, static_cast<int>(std::lround(kExecutionPersistSeconds * s.config.fps)));
      if (s.persist >= need) s.status = SessionStatus::Done;
    }
    if (s.status != SessionStatus::Done && s.frame >= static_cast<int>(std::lround(s.options.capSeconds * s.config.fps))) {
      s.status = SessionStatus::Failed;
    }
  }

  FrameEvent ev;
  ev.frame = s.frame;
  ev.joints = worldJoints(s.state, s.root);
  ev.root = s.root;
  ev.contacts = s.state.contacts;
  ev.actions = actions;
  ev.subgoal = s.active;
  ev.status = s.status;
  return ev;
}

/// Steps until done, failed or `maxFrames`.
inline std::vector<FrameEvent> runSession(Session& s, int maxFrames) {
  std::vector<FrameEvent> out;
  while (static_cast<int>(out.size()) < maxFrames && s.status != SessionStatus::Done &&
         s.status != SessionStatus::Failed) {
    out.push_back(step(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Wire encoding

inline nlohmann::json goalJson(const Goal& g) {
  return {{"position", detail::vec(g.position)}, {"direction", detail::vec(g.direction)},
          {"action", std::string(actionName(g.action))}};
}

inline nlohmann::json frameEventJson(const FrameEvent& e) {
  nlohmann::json joints = nlohmann::json::array();
  for (const auto& p : e.joints) joints.push_back(detail::vec(p));
  return {{"type", "frame"},
          {"frame", e.frame},
          {"joints", joints},
          {"root", {{"position", {e.root.position.x(), e.root.position.y()}},
                    {"forward", {e.root.forward.x(), e.root.forward.y()}}}},
          {"contacts", e.contacts},
          {"actions", std::vector<double>(e.actions.data(), e.actions.data() + e.actions.size())},
          {"subgoal", goalJson(e.subgoal)},
          {"status", statusName(e.status)}};
}

}  // namespace scenemotion

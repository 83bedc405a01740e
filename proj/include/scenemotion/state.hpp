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

// The per-frame character state: body, trajectory window, goal window and
// contact labels, plus its fixed-width flat encoding.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scenemotion/error.hpp"
#include "json.hpp"
#include "scenemotion/kinematics.hpp"

namespace scenemotion {

enum class Action : int { Idle = 0, Walk = 1, Run = 2, Sit = 3, LieDown = 4 };

inline constexpr std::array<std::string_view, 5> kActionNames{"idle", "walk", "run", "sit",
                                                              "liedown"};

inline std::string_view actionName(Action a) { return kActionNames[static_cast<int>(a)]; }

inline std::optional<Action> parseAction(std::string_view name) {
  for (std::size_t i = 0; i < kActionNames.size(); ++i) {
    if (kActionNames[i] == name) return static_cast<Action>(i);
  }
  return std::nullopt;
}

/// Number of contact labels: pelvis, left hand, right hand, left foot, right foot.
inline constexpr int kContactCount = 5;

struct Goal {
  Vec3 position = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  Action action = Action::Idle;
};

/// Ground-plane frame of a goal: its position projected down, its direction
/// flattened onto the ground.
inline RootTransform goalFrame(const Goal& g) {
  return {Vec2(g.position.x(), g.position.z()),
          normalizedOr(Vec2(g.direction.x(), g.direction.z()), Vec2(0, 1))};
}

struct StateConfig {
  int joints = 22;
  int trajectorySamples = 13;
  int actions = 5;
  double windowSeconds = 1.0;
  double fps = 30.0;

  static StateConfig full() { return {22, 13, 5, 1.0, 30.0}; }
  static StateConfig tiny() { return {14, 5, 5, 1.0, 30.0}; }

  void validate() const {
    if (joints < 1 || trajectorySamples < 1 || trajectorySamples % 2 == 0 || actions < 1 ||
        !(windowSeconds > 0) || !(fps > 0)) {
      throw Error(Errc::InvalidConfig, "state config needs j>=1, odd t>=1, n_a>=1");
    }
  }

  bool operator==(const StateConfig&) const = default;
};

inline int stateDim(const StateConfig& c) {
  return 15 * c.joints + (14 + 2 * c.actions) * c.trajectorySamples + kContactCount;
}

inline nlohmann::json stateConfigToJson(const StateConfig& c) {
  return {{"joints", c.joints}, {"trajectorySamples", c.trajectorySamples},
          {"actions", c.actions}, {"windowSeconds", c.windowSeconds}, {"fps", c.fps}};
}

inline StateConfig stateConfigFromJson(const nlohmann::json& j) {
  StateConfig c{j.at("joints").get<int>(), j.at("trajectorySamples").get<int>(),
                j.at("actions").get<int>(), j.at("windowSeconds").get<double>(),
                j.at("fps").get<double>()};
  c.validate();
  return c;
}

/// Offsets of every field inside the flat vector, in declaration order.
struct StateLayout {
  int jp, jr, jv, jpFuture, tp, td, tpGoal, tdGoal, ta, gp, gd, ga, contacts, total;

  explicit StateLayout(const StateConfig& c) {
    const int j = c.joints, t = c.trajectorySamples, na = c.actions;
    int o = 0;
    jp = o; o += 3 * j;
    jr = o; o += 6 * j;
    jv = o; o += 3 * j;
    jpFuture = o; o += 3 * j;
    tp = o; o += 2 * t;
    td = o; o += 2 * t;
    tpGoal = o; o += 2 * t;
    tdGoal = o; o += 2 * t;
    ta = o; o += na * t;
    gp = o; o += 3 * t;
    gd = o; o += 3 * t;
    ga = o; o += na * t;
    contacts = o; o += kContactCount;
    total = o;
  }
};

struct CharacterState {
  std::vector<Vec3> jp;
  std::vector<Rotation6D> jr;
  std::vector<Vec3> jv;
  std::vector<Vec3> jpFuture;
  std::vector<Vec2> tp, td;
  std::vector<Vec2> tpGoal, tdGoal;
  Eigen::MatrixXd ta;  // t x n_a
  std::vector<Vec3> gp, gd;
  Eigen::MatrixXd ga;  // t x n_a
  std::array<double, kContactCount> contacts{};

  /// All-zero record shaped for `c` (rotations and directions are zero too).
  static CharacterState zeros(const StateConfig& c) {
    CharacterState s;
    const auto j = static_cast<std::size_t>(c.joints);
    const auto t = static_cast<std::size_t>(c.trajectorySamples);
    s.jp.assign(j, Vec3::Zero());
    s.jr.assign(j, Rotation6D{{0, 0, 0, 0, 0, 0}});
    s.jv.assign(j, Vec3::Zero());
    s.jpFuture.assign(j, Vec3::Zero());
    s.tp.assign(t, Vec2::Zero());
    s.td.assign(t, Vec2::Zero());
    s.tpGoal.assign(t, Vec2::Zero());
    s.tdGoal.assign(t, Vec2::Zero());
    s.ta = Eigen::MatrixXd::Zero(c.trajectorySamples, c.actions);
    s.gp.assign(t, Vec3::Zero());
    s.gd.assign(t, Vec3::Zero());
    s.ga = Eigen::MatrixXd::Zero(c.trajectorySamples, c.actions);
    return s;
  }

  bool conforms(const StateConfig& c) const {
    const auto j = static_cast<std::size_t>(c.joints);
    const auto t = static_cast<std::size_t>(c.trajectorySamples);
    return jp.size() == j && jr.size() == j && jv.size() == j && jpFuture.size() == j &&
           tp.size() == t && td.size() == t && tpGoal.size() == t && tdGoal.size() == t &&
           ta.rows() == c.trajectorySamples && ta.cols() == c.actions && gp.size() == t &&
           gd.size() == t && ga.rows() == c.trajectorySamples && ga.cols() == c.actions;
  }
};

/// Checks the record invariants: unit goal directions, one-hot goal actions,
/// contacts in [0, 1]. Returns a description of the first violation.
inline std::optional<std::string> stateViolation(const CharacterState& s) {
  for (const auto& d : s.gd) {
    if (std::abs(d.norm() - 1.0) > 1e-4) return "goal direction is not unit length";
  }
  for (Eigen::Index r = 0; r < s.ga.rows(); ++r) {
    int ones = 0;
    for (Eigen::Index c = 0; c < s.ga.cols(); ++c) {
      const double v = s.ga(r, c);
      if (v == 1.0) ++ones;
      else if (v != 0.0) return "goal action row is not one-hot";
    }
    if (ones != 1) return "goal action row is not one-hot";
  }
  for (double c : s.contacts) {
    if (!(c >= 0.0 && c <= 1.0)) return "contact label outside [0, 1]";
  }
  return std::nullopt;
}

using FlatState = Eigen::VectorXd;

inline FlatState flatten(const CharacterState& s, const StateConfig& c) {
  if (!s.conforms(c)) throw Error(Errc::LengthMismatch, "state does not conform to config");
  FlatState v(stateDim(c));
  Eigen::Index o = 0;
  auto put3 = [&](const std::vector<Vec3>& xs) {
    for (const auto& x : xs) { v[o++] = x.x(); v[o++] = x.y(); v[o++] = x.z(); }
  };
  auto put2 = [&](const std::vector<Vec2>& xs) {
    for (const auto& x : xs) { v[o++] = x.x(); v[o++] = x.y(); }
  };
  auto putRows = [&](const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index k = 0; k < m.cols(); ++k) v[o++] = m(r, k);
  };
  put3(s.jp);
  for (const auto& r : s.jr)
    for (double x : r.v) v[o++] = x;
  put3(s.jv);
  put3(s.jpFuture);
  put2(s.tp);
  put2(s.td);
  put2(s.tpGoal);
  put2(s.tdGoal);
  putRows(s.ta);
  put3(s.gp);
  put3(s.gd);
  putRows(s.ga);
  for (double x : s.contacts) v[o++] = x;
  return v;
}

inline CharacterState unflatten(const Eigen::Ref<const Eigen::VectorXd>& v, const StateConfig& c) {
  if (v.size() != stateDim(c)) {
    throw Error(Errc::LengthMismatch, "flat state has " + std::to_string(v.size()) +
                                          " values, expected " + std::to_string(stateDim(c)));
  }
  CharacterState s = CharacterState::zeros(c);
  Eigen::Index o = 0;
  auto get3 = [&](std::vector<Vec3>& xs) {
    for (auto& x : xs) { x = Vec3(v[o], v[o + 1], v[o + 2]); o += 3; }
  };
  auto get2 = [&](std::vector<Vec2>& xs) {
    for (auto& x : xs) { x = Vec2(v[o], v[o + 1]); o += 2; }
  };
  auto getRows = [&](Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index k = 0; k < m.cols(); ++k) m(r, k) = v[o++];
  };
  get3(s.jp);
  for (auto& r : s.jr)
    for (double& x : r.v) x = v[o++];
  get3(s.jv);
  get3(s.jpFuture);
  get2(s.tp);
  get2(s.td);
  get2(s.tpGoal);
  get2(s.tdGoal);
  getRows(s.ta);
  get3(s.gp);
  get3(s.gd);
  getRows(s.ga);
  for (double& x : s.contacts) x = v[o++];
  return s;
}

/// Frame offsets of the trajectory window, e.g. t=13 at 30 fps gives -30..30 step 5.
inline std::vector<int> windowIndices(const StateConfig& c) {
  if (c.trajectorySamples < 1 || !(c.fps > 0) || !(c.windowSeconds > 0)) {
    throw Error(Errc::InvalidConfig, "window needs t>=1 and positive fps and duration");
  }
  const double span = 2.0 * c.windowSeconds * c.fps;
  const long spanFrames = std::lround(span);
  if (std::abs(span - static_cast<double>(spanFrames)) > 1e-9) {
    throw Error(Errc::NonIntegerStride, "window does not cover a whole number of frames");
  }
  if (c.trajectorySamples == 1) return {0};
  const long intervals = c.trajectorySamples - 1;
  if (spanFrames % intervals != 0) {
    throw Error(Errc::NonIntegerStride, std::to_string(spanFrames) + " frames do not split into " +
                                            std::to_string(intervals) + " equal strides");
  }
  if (c.trajectorySamples % 2 == 0) {
    throw Error(Errc::InvalidConfig, "an even sample count cannot include the current frame");
  }
  const int stride = static_cast<int>(spanFrames / intervals);
  const int half = static_cast<int>(spanFrames / 2);
  std::vector<int> out;
  for (int k = 0; k < c.trajectorySamples; ++k) out.push_back(-half + k * stride);
  return out;
}

inline int centerSample(const StateConfig& c) { return c.trajectorySamples / 2; }

/// One world-space frame of a motion clip.
struct ClipFrame {
  RootTransform root;
  Pose pose;
  Eigen::VectorXd actions;  // continuous action weights, length n_a
  std::array<double, kContactCount> contacts{};
};

/// Frames of history buildState needs before `frameIndex`.
inline int requiredHistory(const StateConfig& c) {
  return std::max(1, static_cast<int>(std::lround(c.windowSeconds * c.fps)));
}

/// Assembles the state at `frameIndex` from world-space frames. Samples past
/// the end of the clip repeat the last frame.
inline CharacterState buildState(std::span<const ClipFrame> frames, int frameIndex,
                                 const Goal& goal, const StateConfig& c) {
  c.validate();
  const int n = static_cast<int>(frames.size());
  if (frameIndex < requiredHistory(c) || frameIndex >= n) {
    throw Error(Errc::InsufficientHistory,
                "frame " + std::to_string(frameIndex) + " lacks a full past window");
  }
  const auto offsets = windowIndices(c);
  const auto clampIdx = [n](int i) { return std::clamp(i, 0, n - 1); };
  const ClipFrame& cur = frames[frameIndex];
  const ClipFrame& prev = frames[frameIndex - 1];
  if (static_cast<int>(cur.pose.positions.size()) != c.joints ||
      cur.actions.size() != c.actions) {
    throw Error(Errc::DimMismatch, "clip frame does not match the state config");
  }

  CharacterState s = CharacterState::zeros(c);
  const RootTransform& root = cur.root;
  const Mat3 rootRotT = root.rotation().transpose();
  const int future = clampIdx(frameIndex + static_cast<int>(std::lround(c.fps)));
  const ClipFrame& ahead = frames[future];
  const ClipFrame& before = frames[clampIdx(frameIndex - 1)];
  const ClipFrame& after = frames[clampIdx(frameIndex + 1)];
  const double dt = (clampIdx(frameIndex + 1) - clampIdx(frameIndex - 1)) / c.fps;

  for (int j = 0; j < c.joints; ++j) {
    s.jp[j] = toRootRelative(cur.pose.positions[j], root);
    s.jr[j] = matrixToRot6d(rootRotT * cur.pose.rotations[j]);
    const Vec3 vel = (after.pose.positions[j] - before.pose.positions[j]) / dt;
    s.jv[j] = directionToRoot(vel, root);
    s.jpFuture[j] = toRootRelative(cur.pose.positions[j], ahead.root);
  }

  const RootTransform goalRoot = goalFrame(goal);
  for (int k = 0; k < c.trajectorySamples; ++k) {
    const ClipFrame& f = frames[clampIdx(frameIndex + offsets[k])];
    const RootDelta d = rootDelta(prev.root, f.root);
    s.tp[k] = d.position;
    s.td[k] = d.forward;
    const RootDelta g = rootDelta(goalRoot, f.root);
    s.tpGoal[k] = g.position;
    s.tdGoal[k] = g.forward;
    s.ta.row(k) = f.actions.transpose();
    s.gp[k] = toRootRelative(goal.position, root);
    s.gd[k] = directionToRoot(goal.direction, root).normalized();
    s.ga(k, static_cast<int>(goal.action)) = 1.0;
  }
  s.contacts = cur.contacts;
  return s;
}

/// Overwrites the goal window of `s` so every sample points at `goal`, seen
/// from `root`.
inline void setGoalWindow(CharacterState& s, const Goal& goal, const RootTransform& root) {
  const Vec3 p = toRootRelative(goal.position, root);
  const Vec3 d = directionToRoot(goal.direction, root).normalized();
  s.ga.setZero();
  for (std::size_t k = 0; k < s.gp.size(); ++k) {
    s.gp[k] = p;
    s.gd[k] = d;
    s.ga(static_cast<Eigen::Index>(k), static_cast<int>(goal.action)) = 1.0;
  }
}

}  // namespace scenemotion

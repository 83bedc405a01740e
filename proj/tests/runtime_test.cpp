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

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace sm = scenemotion;
using Eigen::VectorXd;
using sm::Vec2;
using sm::Vec3;

namespace {

sm::Scene roomScene() {
  auto chair = sm::objects::chair();
  auto bed = sm::objects::bed("bed");
  bed.pose = sm::RootTransform::fromYaw(Vec2(4, 0), 0.0);
  return {{chair, bed}};
}

const sm::MotionNet& tinyNet() {
  static const sm::MotionNet net = [] {
    sm::Rng rng(11);
    return sm::MotionNet::create(sm::MotionNetConfig::tiny(), rng);
  }();
  return net;
}

sm::SessionOptions from(Vec2 start) {
  sm::SessionOptions o;
  o.start = start;
  return o;
}

}  // namespace

TEST(Session, RejectsBadRequests) {
  const auto scene = roomScene();
  const sm::Models m{&tinyNet(), nullptr};
  EXPECT_EQ(oracle::errcOf([&] { sm::startSession(scene, "chair", sm::Action::Walk, 1, m); }),
            sm::Errc::UnsupportedAction);
  EXPECT_EQ(oracle::errcOf([&] { sm::startSession(scene, "lamp", sm::Action::Sit, 1, m); }),
            sm::Errc::UnknownObject);
  EXPECT_EQ(oracle::errcOf([&] { sm::startSession(scene, "chair", sm::Action::Sit, 1, sm::Models{}); }),
            sm::Errc::InvalidConfig);
}

TEST(Session, SameSeedSameFrames) {
  const auto scene = roomScene();
  const sm::Models m{&tinyNet(), nullptr};
  auto a = sm::startSession(scene, "chair", sm::Action::Sit, 5, m, from(Vec2(0, 3)));
  auto b = sm::startSession(scene, "chair", sm::Action::Sit, 5, m, from(Vec2(0, 3)));
  const auto fa = sm::runSession(a, 20), fb = sm::runSession(b, 20);
  ASSERT_EQ(fa.size(), fb.size());
  for (std::size_t i = 0; i < fa.size(); ++i)
    for (std::size_t j = 0; j < fa[i].joints.size(); ++j) ASSERT_EQ(fa[i].joints[j], fb[i].joints[j]);
}

TEST(Session, DistinctSeedsDiverge) {
  const auto scene = roomScene();
  const sm::Models m{&tinyNet(), nullptr};
  std::vector<VectorXd> last;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    auto s = sm::startSession(scene, "chair", sm::Action::Sit, seed, m, from(Vec2(0, 3)));
    sm::runSession(s, 15);
    last.push_back(sm::poseFeature(s.state));
  }
  EXPECT_GT(sm::apd(last), 0.0);
}

TEST(Session, ZeroLatentIsSeedIndependent) {
  const auto scene = roomScene();
  const sm::Models m{&tinyNet(), nullptr};
  auto opts = from(Vec2(0, 3));
  opts.latent = sm::LatentMode::Zero;
  auto a = sm::startSession(scene, "chair", sm::Action::Sit, 1, m, opts);
  auto b = sm::startSession(scene, "chair", sm::Action::Sit, 2, m, opts);
  sm::runSession(a, 10);
  sm::runSession(b, 10);
  EXPECT_EQ(sm::flatten(a.state, a.config), sm::flatten(b.state, b.config));
}

TEST(Session, CapMarksFailure) {
  const auto scene = roomScene();
  auto opts = from(Vec2(0, 8));
  opts.capSeconds = 0.5;
  auto s = sm::startSession(scene, "chair", sm::Action::Sit, 1, {&tinyNet(), nullptr}, opts);
  const auto frames = sm::runSession(s, 1000);
  EXPECT_EQ(frames.back().status, sm::SessionStatus::Failed);
  EXPECT_EQ(frames.size(), static_cast<std::size_t>(std::lround(0.5 * s.config.fps)));
  EXPECT_EQ(oracle::errcOf([&] { sm::step(s); }), sm::Errc::InvalidConfig);
}

TEST(Session, KinematicWalkerReachesDoneInOrder) {
  const auto scene = roomScene();
  auto opts = from(Vec2(0.5, 4));
  opts.driver = sm::Driver::Kinematic;
  auto s = sm::startSession(scene, "chair", sm::Action::Sit, 3, {}, opts);
  const auto frames = sm::runSession(s, 1200);
  ASSERT_FALSE(frames.empty());
  EXPECT_EQ(frames.back().status, sm::SessionStatus::Done);
  for (std::size_t i = 1; i < frames.size(); ++i)
    EXPECT_GE(static_cast<int>(frames[i].status), static_cast<int>(frames[i - 1].status)) << i;
  EXPECT_EQ(frames.front().status, sm::SessionStatus::Navigating);
  EXPECT_LT((frames.back().root.position - sm::ground(s.goal.position)).norm(), 0.05);
  const sm::Vec2 facing = sm::Vec2(s.goal.direction.x(), s.goal.direction.z()).normalized();
  EXPECT_GT(frames.back().root.forward.dot(facing), std::cos(0.05));
  // Sitting on the target is allowed; nothing else is touched.
  std::vector<std::vector<Vec3>> joints;
  for (const auto& f : frames) joints.push_back(f.joints);
  EXPECT_EQ(sm::penetrationPct(joints, scene, "chair"), 0.0);

  // Re-planning from the seat steps out of the chair footprint first.
  sm::resampleStyle(s, 8, true);
  EXPECT_EQ(s.path.waypoints.front(), s.root.position);
  EXPECT_GE(s.path.waypoints.size(), 2u);
}

TEST(Session, LabeledGoalComesFromTheObject) {
  const auto scene = roomScene();
  auto s = sm::startSession(scene, "bed", sm::Action::LieDown, 2, {&tinyNet(), nullptr}, from(Vec2(0, 3)));
  const auto& g = scene.objects[1].goals.front();
  EXPECT_LT((s.goal.position - scene.objects[1].toWorld(g.position)).norm(), 1e-12);
  EXPECT_EQ(s.goal.action, sm::Action::LieDown);
}

TEST(Session, ResampleStyleIsDeterministic) {
  const auto scene = roomScene();
  const sm::Models m{&tinyNet(), nullptr};
  auto a = sm::startSession(scene, "chair", sm::Action::Sit, 1, m, from(Vec2(0, 3)));
  auto b = sm::startSession(scene, "chair", sm::Action::Sit, 1, m, from(Vec2(0, 3)));
  sm::runSession(a, 5);
  sm::runSession(b, 5);
  sm::resampleStyle(a, 99);
  sm::resampleStyle(b, 99);
  sm::runSession(a, 5);
  sm::runSession(b, 5);
  EXPECT_EQ(sm::flatten(a.state, a.config), sm::flatten(b.state, b.config));
  sm::resampleStyle(a, 7, true);
  EXPECT_EQ(a.status, sm::SessionStatus::Navigating);
  EXPECT_FALSE(a.path.waypoints.empty());
}

TEST(Session, GoalNetSuppliesTargets) {
  sm::Rng rng(3);
  const auto goalNet = sm::GoalNet::create(sm::GoalNetConfig::tiny(), rng);
  const auto scene = roomScene();
  auto a = sm::startSession(scene, "chair", sm::Action::Sit, 4, {&tinyNet(), &goalNet}, from(Vec2(0, 3)));
  auto b = sm::startSession(scene, "chair", sm::Action::Sit, 4, {&tinyNet(), &goalNet}, from(Vec2(0, 3)));
  EXPECT_EQ(a.goal.position, b.goal.position);
  EXPECT_NEAR(a.goal.direction.norm(), 1.0, 1e-12);
}

TEST(FrameEvent, JsonShape) {
  const auto scene = roomScene();
  auto s = sm::startSession(scene, "chair", sm::Action::Sit, 1, {&tinyNet(), nullptr}, from(Vec2(0, 3)));
  const auto j = sm::frameEventJson(sm::step(s));
  EXPECT_EQ(j.at("type"), "frame");
  EXPECT_EQ(j.at("frame"), 1);
  EXPECT_EQ(j.at("joints").size(), static_cast<std::size_t>(s.config.joints));
  EXPECT_EQ(j.at("contacts").size(), static_cast<std::size_t>(sm::kContactCount));
  // The straight approach has no intermediate waypoints.
  EXPECT_EQ(j.at("subgoal").at("action"), "sit");
  EXPECT_TRUE(j.at("status").is_string());
}

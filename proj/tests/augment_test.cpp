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

#include <random>

#include "oracles.hpp"

namespace sm = scenemotion;
using sm::Vec2;
using sm::Vec3;

namespace {

using Joints = std::array<Vec3, sm::kContactCount>;

Joints still() {
  Joints v;
  v.fill(Vec3::Zero());
  return v;
}

Joints farAway() {
  Joints p;
  p.fill(Vec3(10, 10, 10));
  return p;
}

sm::Scene chairScene() {
  auto chair = sm::objects::chair();
  chair.pose = sm::RootTransform::fromYaw(Vec2(1, 2), 0.4);
  return {{chair}};
}

sm::Performance sitTake(const sm::Scene& scene, std::uint64_t seed) {
  sm::GenerateOptions o;
  o.objectId = "chair";
  return sm::generatePerformance(sm::Action::Sit, seed, scene, sm::StateConfig::tiny(), o);
}

}  // namespace

TEST(DetectContacts, DistanceAndSpeedGates) {
  const auto chair = sm::objects::chair();
  auto pos = farAway();
  pos[sm::kPelvis] = Vec3(0.05, 1.42, 0.05);
  EXPECT_FALSE(sm::detectContacts(pos, still(), chair).inContact[sm::kPelvis]);

  pos[sm::kPelvis] = Vec3(0.05, 0.44, 0.05);
  auto c = sm::detectContacts(pos, still(), chair);
  EXPECT_TRUE(c.inContact[sm::kPelvis]);
  EXPECT_LT((c.point[sm::kPelvis] - Vec3(0.05, 0.42, 0.05)).norm(), 1e-12);
  EXPECT_FALSE(c.inContact[sm::kLeftHand]);

  auto vel = still();
  vel[sm::kPelvis] = Vec3(1, 0, 0);
  EXPECT_FALSE(sm::detectContacts(pos, vel, chair).inContact[sm::kPelvis]);

  const double inf = std::numeric_limits<double>::infinity();
  c = sm::detectContacts(farAway(), vel, chair, {inf, inf});
  for (bool b : c.inContact) EXPECT_TRUE(b);
  EXPECT_EQ(oracle::errcOf([&] { sm::detectContacts(std::span(pos).first(3), still(), chair); }),
            sm::Errc::DimMismatch);
}

TEST(DetectContacts, UsesObjectPose) {
  auto chair = sm::objects::chair();
  chair.pose = sm::RootTransform::fromYaw(Vec2(5, -3), 1.2);
  auto pos = farAway();
  pos[sm::kPelvis] = chair.toWorld(Vec3(0.0, 0.44, 0.0));
  const auto c = sm::detectContacts(pos, still(), chair);
  EXPECT_TRUE(c.inContact[sm::kPelvis]);
  EXPECT_LT((c.point[sm::kPelvis] - Vec3(0, 0.42, 0)).norm(), 1e-12);
}

TEST(ProjectContacts, SurfaceTallerAndScaled) {
  const auto chair = sm::objects::chair();
  sm::ContactFrame f;
  f.inContact[sm::kPelvis] = true;
  f.point[sm::kPelvis] = Vec3(0.05, 0.42, 0.05);
  EXPECT_LT((sm::projectContacts(f, chair).point[sm::kPelvis] - Vec3(0.05, 0.42, 0.05)).norm(), 1e-12);

  auto taller = chair;
  taller.boxes[0] = {Vec3(0, 0.26, 0), Vec3(0.24, 0.26, 0.24), 0.0};
  EXPECT_LT((sm::projectContacts(f, taller).point[sm::kPelvis] - Vec3(0.05, 0.52, 0.05)).norm(), 1e-12);

  const auto doubled = sm::scaledObject(chair, Vec3::Constant(2));
  const auto p = sm::projectContacts(f, doubled, Vec3::Constant(2)).point[sm::kPelvis];
  EXPECT_LT((p - Vec3(0.1, 0.84, 0.1)).norm(), 1e-12);
  // Joints out of contact are left alone.
  f.point[sm::kLeftFoot] = Vec3(7, 7, 7);
  EXPECT_EQ(sm::projectContacts(f, doubled).point[sm::kLeftFoot], Vec3(7, 7, 7));
}

TEST(Ccd, TargetAtEffectorNeedsNoIterations) {
  const std::vector<Vec3> pts{Vec3::Zero(), Vec3(1, 0, 0), Vec3(1, 1, 0)};
  auto chain = sm::chainFromPositions(pts);
  const auto r = sm::ccdIK(chain, Vec3(1, 1, 0));
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 0);
}

TEST(Ccd, TwoLinkMatchesLawOfCosines) {
  const std::vector<Vec3> pts{Vec3::Zero(), Vec3(1, 0, 0), Vec3(2, 0, 0)};
  auto chain = sm::chainFromPositions(pts);
  const auto r = sm::ccdIK(chain, Vec3(1.2, 0.5, 0));
  ASSERT_TRUE(r.converged);
  const auto p = chain.positions();
  const double shoulder = std::atan2(p[1].y(), p[1].x());
  const Vec3 b1 = p[1] - p[0], b2 = p[2] - p[1];
  const double elbow = std::atan2(b1.cross(b2).z(), b1.dot(b2));
  const auto expect = oracle::twoLinkAngles(1, 1, 1.2, 0.5);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [s, e] : expect)
    best = std::min(best, std::max(oracle::angleDiff(s, shoulder), oracle::angleDiff(e, elbow)));
  EXPECT_LT(best, 1e-2);
}

TEST(Ccd, UnreachableTargetStraightensChain) {
  const std::vector<Vec3> pts{Vec3::Zero(), Vec3(1, 0, 0), Vec3(1, 1, 0)};
  auto chain = sm::chainFromPositions(pts);
  const auto r = sm::ccdIK(chain, Vec3(0, 3, 0));
  EXPECT_FALSE(r.converged);
  EXPECT_NEAR(chain.effector().norm(), 2.0, 1e-6);
  EXPECT_NEAR(r.distance, 1.0, 1e-6);
}

TEST(CcdProperty, DistanceNeverIncreasesAndBonesKeepLength) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<Vec3> pts{Vec3::Zero(), Vec3(0.9, 0, 0), Vec3(0.9, 0.7, 0), Vec3(0.9, 0.7, 0.5)};
    auto chain = sm::chainFromPositions(pts);
    const Vec3 target(u(rng), u(rng), u(rng));
    const double start = (chain.effector() - target).norm();
    const auto r = sm::ccdIK(chain, target);
    double last = start;
    for (double d : r.history) {
      EXPECT_LE(d, last + 1e-12);
      last = d;
    }
    const auto p = chain.positions();
    for (std::size_t i = 1; i < p.size(); ++i)
      EXPECT_NEAR((p[i] - p[i - 1]).norm(), (pts[i] - pts[i - 1]).norm(), 1e-9);
  }
}

TEST(AugmentClip, IdentityEditKeepsTheTake) {
  const auto scene = chairScene();
  const auto perf = sitTake(scene, 1);
  const auto res = sm::augmentClip(perf, scene, sm::ObjectEdit::identity());
  ASSERT_EQ(res.performance.frames.size(), perf.frames.size());
  double worst = 0;
  for (std::size_t i = 0; i < perf.frames.size(); ++i)
    for (std::size_t j = 0; j < perf.frames[i].pose.positions.size(); ++j)
      worst = std::max(worst, (res.performance.frames[i].pose.positions[j] - perf.frames[i].pose.positions[j]).norm());
  EXPECT_LT(worst, 1e-6);
  EXPECT_LT((res.performance.goal.position - perf.goal.position).norm(), 1e-9);
}

TEST(AugmentClip, RaisedSeatLiftsPelvis) {
  const auto scene = chairScene();
  const auto perf = sitTake(scene, 2);
  const double seatTop = 0.42;
  const auto res = sm::augmentClip(perf, scene, sm::ObjectEdit::scaled(Vec3(1, (seatTop + 0.1) / seatTop, 1)));
  const int pelvis = perf.skeleton.indexOf("pelvis");
  int seated = 0;
  for (std::size_t i = 0; i < perf.frames.size(); ++i) {
    if (!res.original[i].inContact[sm::kPelvis]) continue;
    ++seated;
    const Vec3 d = res.performance.frames[i].pose.positions[pelvis] - perf.frames[i].pose.positions[pelvis];
    EXPECT_NEAR(d.y(), 0.10, 1e-6);
    EXPECT_NEAR(Vec2(d.x(), d.z()).norm(), 0.0, 1e-6);
  }
  EXPECT_GT(seated, 10);
  EXPECT_NEAR(res.performance.goal.position.y() - perf.goal.position.y(), 0.45 * 0.1 / seatTop, 1e-9);
}

TEST(AugmentClip, SwitchedObjectKeepsContacts) {
  const auto scene = chairScene();
  const auto perf = sitTake(scene, 3);
  const auto other = sm::scaledObject(sm::objects::chair("other"), Vec3(1.1, 0.95, 1.05));
  ASSERT_TRUE(sm::similarSize(scene.objects[0], other));
  const auto res = sm::augmentClip(perf, scene, sm::ObjectEdit::switched(other));
  const auto key = sm::keyJointIndices(perf.skeleton);
  int checked = 0;
  for (std::size_t i = 0; i < perf.frames.size(); ++i)
    for (int k = 0; k < sm::kContactCount; ++k) {
      if (!res.original[i].inContact[k]) continue;
      const Vec3 p = res.performance.frames[i].pose.positions[key[k]];
      EXPECT_LT(res.object.distanceWorld(p), 0.05 + 1e-3);
      ++checked;
    }
  EXPECT_GT(checked, 10);
  EXPECT_LT(res.maxViolation, 1e-2);
  EXPECT_EQ(res.object.id, "chair");
}

TEST(AugmentClip, RandomEditsAreSimilarSize) {
  sm::Rng rng(4);
  const auto chair = sm::objects::chair();
  const std::vector<sm::SceneObject> pool{sm::objects::bed("b"), sm::scaledObject(sm::objects::chair("c2"), Vec3::Constant(1.1))};
  for (int trial = 0; trial < 50; ++trial) {
    const auto e = sm::randomEdit(chair, pool, rng);
    const auto edited = sm::applyEdit(chair, e);
    EXPECT_TRUE(sm::similarSize(chair, edited)) << trial;
    EXPECT_EQ(edited.id, chair.id);
  }
}

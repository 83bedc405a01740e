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

#include <numbers>
#include <random>

#include "oracles.hpp"

namespace sm = scenemotion;
using sm::Vec2;
using sm::Vec3;

namespace {

sm::SceneObject boxObject(const Vec3& center, const Vec3& half) {
  sm::SceneObject o;
  o.id = "box";
  o.category = "box";
  o.boxes.push_back({center, half, 0.0});
  return o;
}

}  // namespace

TEST(Voxelize, EmptyObjectRaises) {
  sm::SceneObject o;
  o.id = "nothing";
  EXPECT_EQ(oracle::errcOf([&] { sm::voxelizeObject(o); }), sm::Errc::EmptyObject);
  o.boxes.push_back({Vec3::Zero(), Vec3(0.5, 0.0, 0.5), 0.0});
  EXPECT_EQ(oracle::errcOf([&] { sm::voxelizeObject(o); }), sm::Errc::EmptyObject);
}

TEST(Voxelize, FullBoxInteriorIsOccupied) {
  const auto g = sm::voxelizeObject(boxObject(Vec3(0, 0.5, 0), Vec3(0.6, 0.5, 0.3)));
  for (int z = 1; z < 7; ++z)
    for (int y = 1; y < 7; ++y)
      for (int x = 1; x < 7; ++x) EXPECT_EQ(g.occupancy[sm::voxelIndex(x, y, z)], 1.0);
  // The 5% margin leaves border cells partly empty.
  EXPECT_LT(g.occupancy[sm::voxelIndex(0, 0, 0)], 1.0);
  EXPECT_GT(g.occupancy[sm::voxelIndex(0, 0, 0)], 0.0);
}

TEST(Voxelize, HalfCellAgreesWithDenseSampling) {
  // An L-shape: the second box ends halfway across cell x = 3, leaving cell
  // (3, 5, 3) half filled. Bounds are [0,2] x [0,2] x [0,1] before the margin.
  const double cellX = 2.1 / 8;
  const double cut = -0.05 + 3.5 * cellX;
  sm::SceneObject o = boxObject(Vec3(1, 0.5, 0.5), Vec3(1, 0.5, 0.5));
  o.boxes.push_back({Vec3(cut / 2, 1.5, 0.5), Vec3(cut / 2, 0.5, 0.5), 0.0});
  const auto g = sm::voxelizeObject(o);
  const double dense = oracle::denseOccupancy(o, g, 3, 5, 3, 32);
  EXPECT_NEAR(dense, 0.5, 0.02);
  EXPECT_NEAR(g.occupancy[sm::voxelIndex(3, 5, 3)], 0.5, 0.13);
  for (int z = 0; z < 8; ++z)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        ASSERT_NEAR(g.occupancy[sm::voxelIndex(x, y, z)], oracle::denseOccupancy(o, g, x, y, z, 32), 0.13);
      }
}

TEST(Voxelize, CentersAreRegularAndCentered) {
  const auto g = sm::voxelizeObject(boxObject(Vec3(3, 0.4, -1), Vec3(0.4, 0.4, 0.8)));
  Vec3 sum = Vec3::Zero();
  for (const auto& c : g.centers) sum += c;
  EXPECT_LT(sum.norm() / sm::kVoxelCells, 1e-12);
  const Vec3 step = g.centers[sm::voxelIndex(1, 1, 1)] - g.centers[sm::voxelIndex(0, 0, 0)];
  EXPECT_TRUE(step.isApprox(g.bounds.sizes() / 8, 1e-12));
  EXPECT_TRUE(g.origin.isApprox(Vec3(3, 0.4, -1), 1e-12));
}

TEST(VoxelizeProperty, EnlargingABoxNeverLowersOccupancy) {
  // Two anchor boxes pin the bounds so the grid does not move.
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.05, 0.3);
  for (int trial = 0; trial < 20; ++trial) {
    sm::SceneObject o = boxObject(Vec3(0, 0.05, 0), Vec3(1, 0.05, 1));
    o.boxes.push_back({Vec3(0, 1.0, 0), Vec3(0.05, 0.05, 0.05), 0.0});
    const Vec3 half(u(rng), u(rng), u(rng));
    o.boxes.push_back({Vec3(0.1, 0.5, -0.2), half, 0.0});
    const auto small = sm::voxelizeObject(o);
    o.boxes.back().halfExtents = half * 1.5;
    const auto large = sm::voxelizeObject(o);
    ASSERT_TRUE(small.bounds.isApprox(large.bounds));
    for (int i = 0; i < sm::kVoxelCells; ++i) EXPECT_GE(large.occupancy[i], small.occupancy[i]);
  }
}

TEST(EncodeRelative, IdentityFrameKeepsCenters) {
  const auto g = sm::voxelizeObject(boxObject(Vec3::Zero(), Vec3(0.5, 0.5, 0.5)));
  const auto e = sm::encodeRelative(g, sm::RootTransform{});
  for (int i = 0; i < sm::kVoxelCells; ++i) {
    EXPECT_LT((e.centers[i] - g.centers[i]).norm(), 1e-15);
    EXPECT_EQ(e.occupancy[i], g.occupancy[i]);
  }
}

TEST(EncodeRelative, RootBehindShiftsForward) {
  const auto g = sm::voxelizeObject(boxObject(Vec3::Zero(), Vec3(0.5, 0.5, 0.5)));
  const auto e = sm::encodeRelative(g, {Vec2(0, -1), Vec2(0, 1)});
  for (int i = 0; i < sm::kVoxelCells; ++i) {
    EXPECT_LT((e.centers[i] - (g.centers[i] + Vec3(0, 0, 1))).norm(), 1e-12);
  }
}

TEST(EncodeRelative, QuarterTurnRotatesCenters) {
  const auto g = sm::voxelizeObject(boxObject(Vec3::Zero(), Vec3(0.3, 0.5, 0.7)));
  // A root facing +x sees world +x as its forward (+z) and world +z as -x.
  const auto e = sm::encodeRelative(g, {Vec2(0, 0), Vec2(1, 0)});
  for (int i = 0; i < sm::kVoxelCells; ++i) {
    const Vec3& c = g.centers[i];
    EXPECT_LT((e.centers[i] - Vec3(-c.z(), c.y(), c.x())).norm(), 1e-12);
  }
}

TEST(EncodeRelativeProperty, PreservesPairwiseDistances) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-4, 4);
  std::uniform_int_distribution<int> cell(0, sm::kVoxelCells - 1);
  auto obj = boxObject(Vec3(0.2, 0.4, 0.1), Vec3(0.4, 0.4, 0.6));
  obj.pose = sm::RootTransform::fromYaw(Vec2(1.5, -2), 0.8);
  const auto g = sm::voxelizeObject(obj);
  for (int trial = 0; trial < 50; ++trial) {
    const auto e = sm::encodeRelative(g, sm::RootTransform::fromYaw(Vec2(u(rng), u(rng)), u(rng)));
    for (int k = 0; k < 50; ++k) {
      const int a = cell(rng), b = cell(rng);
      EXPECT_NEAR((e.centers[a] - e.centers[b]).norm(), (g.centers[a] - g.centers[b]).norm(), 1e-9);
    }
  }
}

TEST(EncodeRelative, PlacedObjectLandsWhereItStands) {
  // An object 2 m in front of a root at the origin facing +z.
  auto obj = boxObject(Vec3(0, 0.5, 0), Vec3(0.5, 0.5, 0.5));
  obj.pose = sm::RootTransform::fromYaw(Vec2(0, 2), 1.0);
  const auto e = sm::encodeRelative(sm::voxelizeObject(obj), sm::RootTransform{});
  Vec3 mean = Vec3::Zero();
  for (const auto& c : e.centers) mean += c;
  mean /= sm::kVoxelCells;
  EXPECT_LT((mean - Vec3(0, 0.5, 2)).norm(), 1e-9);
}

TEST(FlattenGrid, LayoutAndEmptyOccupancy) {
  sm::VoxelGrid empty;
  for (int i = 0; i < sm::kVoxelCells; ++i) empty.centers[i] = Vec3(i, 2 * i, 3 * i);
  const auto v = sm::flattenGrid(empty);
  ASSERT_EQ(v.size(), 2048);
  for (int i = 0; i < sm::kVoxelCells; ++i) {
    EXPECT_EQ(v[4 * i + 3], 0.0);
    EXPECT_EQ(v[4 * i], i);
    EXPECT_EQ(v[4 * i + 2], 3 * i);
  }
  EXPECT_EQ(sm::voxelIndex(1, 0, 0), 1);
  EXPECT_EQ(sm::voxelIndex(0, 1, 0), 8);
  EXPECT_EQ(sm::voxelIndex(0, 0, 1), 64);
}

TEST(Scene, JsonRoundTrip) {
  sm::Scene s;
  auto a = boxObject(Vec3(0, 0.2, 0), Vec3(0.2, 0.2, 0.2));
  a.id = "a";
  a.pose = sm::RootTransform::fromYaw(Vec2(1, 2), 0.3);
  a.goals.push_back({Vec3(0, 0.43, 0.1), Vec3(0, 0, 1), sm::Action::Sit});
  s.objects.push_back(a);
  const auto back = sm::sceneFromJson(nlohmann::json::parse(sm::sceneToJson(s).dump()));
  ASSERT_EQ(back.objects.size(), 1u);
  ASSERT_NE(back.find("a"), nullptr);
  EXPECT_EQ(back.find("b"), nullptr);
  const auto& o = *back.find("a");
  EXPECT_TRUE(o.pose.position.isApprox(a.pose.position));
  EXPECT_TRUE(o.boxes[0].halfExtents.isApprox(a.boxes[0].halfExtents));
  ASSERT_EQ(o.goals.size(), 1u);
  EXPECT_EQ(o.goals[0].action, sm::Action::Sit);
}

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
using Eigen::VectorXd;

namespace {

sm::VoxelGrid chairGrid() {
  sm::SceneObject o;
  o.id = "c";
  o.category = "chair";
  o.boxes.push_back({Vec3(0, 0.22, 0), Vec3(0.25, 0.22, 0.25), 0.0});
  o.boxes.push_back({Vec3(0, 0.65, -0.22), Vec3(0.25, 0.25, 0.03), 0.0});
  return sm::voxelizeObject(o);
}

}  // namespace

TEST(GoalLoss, ClosedForms) {
  const sm::GaussianLatent zero{VectorXd::Zero(3), VectorXd::Zero(3)};
  const Vec3 p(0.1, 0.4, 0.2), d = Vec3::UnitZ();
  EXPECT_EQ(sm::goalLoss(p, d, p, d, zero, 0.5), 0.0);
  EXPECT_NEAR(sm::goalLoss(p + Vec3(1, 0, 0), d, p, d, zero, 0.5), 1.0, 1e-15);
  const sm::GaussianLatent ones{VectorXd::Ones(3), VectorXd::Zero(3)};
  EXPECT_NEAR(sm::goalLoss(p, d, p, d, ones, 0.5), 0.75, 1e-15);
}

TEST(GoalNet, SampleLossGradients) {
  sm::Rng rng(1);
  auto net = sm::GoalNet::create(sm::GoalNetConfig::tiny(), rng);
  const auto sample = sm::makeGoalSample(chairGrid(), Vec3(0, 0.47, 0.05), Vec3(0, 0, 1));
  const VectorXd eps = sm::standardNormal(3, rng);
  auto grads = net.params.zerosLike();
  sm::goalSampleLoss(net, sample, eps, &grads);
  auto loss = [&] { return sm::goalSampleLoss(net, sample, eps).loss; };
  const auto check = oracle::checkGradients(net.params.tensors(), grads.tensors(), loss, 8, 2);
  EXPECT_LT(check.worst, 1e-4) << check.where;
}

TEST(GoalNet, SampleLossTermsMatchGoalLoss) {
  sm::Rng rng(2);
  auto net = sm::GoalNet::create(sm::GoalNetConfig::tiny(), rng);
  const auto grid = chairGrid();
  const auto s = sm::makeGoalSample(grid, Vec3(0.1, 0.2, 0.3), Vec3(1, 0, 1));
  EXPECT_NEAR(s.direction.norm(), 1.0, 1e-15);
  const auto t = sm::goalSampleLoss(net, s, VectorXd::Zero(3));
  EXPECT_NEAR(t.loss, t.position + t.direction + 0.5 * t.kl, 1e-12);
  // With zero noise the decoder sees the posterior mean.
  const auto latent = sm::encodeGoal(net, {s.position, s.direction, sm::Action::Sit}, grid);
  const auto g = sm::decodeGoal(net, latent.mu, grid);
  const double k = net.config.positionGain / sm::halfDiagonal(grid);
  EXPECT_NEAR(t.position, ((g.position - s.position) * k).squaredNorm(), 1e-9);
}

TEST(GoalNet, SamplingIsSeedDeterministic) {
  sm::Rng init(3);
  const auto net = sm::GoalNet::create(sm::GoalNetConfig::tiny(), init);
  const auto grid = chairGrid();
  sm::Rng a(4), b(4), c(5);
  const auto ga = sm::sampleGoals(net, grid, 5, a), gb = sm::sampleGoals(net, grid, 5, b);
  const auto gc = sm::sampleGoals(net, grid, 5, c);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(ga[i].position, gb[i].position);
    EXPECT_EQ(ga[i].direction, gb[i].direction);
    EXPECT_NEAR(ga[i].direction.norm(), 1.0, 1e-12);
  }
  EXPECT_NE(ga[0].position, gc[0].position);
  EXPECT_EQ(oracle::errcOf([&] { sm::sampleGoals(net, grid, 0, a); }), sm::Errc::InvalidConfig);
}

TEST(GoalNet, TrainingFitsOneGoal) {
  sm::Rng rng(6);
  auto net = sm::GoalNet::create(sm::GoalNetConfig::tiny(), rng);
  const auto grid = chairGrid();
  const Vec3 pos(0, 0.47, 0.05), dir(0, 0, 1);
  const std::vector<sm::GoalSample> data{sm::makeGoalSample(grid, pos, dir)};
  const auto history = sm::trainGoalNet(net, data, 300, rng);
  EXPECT_LT(history.back(), 0.1 * history.front());
  sm::Rng s(7);
  const auto g = sm::sampleGoals(net, grid, 1, s).front();
  EXPECT_LT((g.position - pos).norm(), 0.1);
  EXPECT_GT(g.direction.dot(dir), std::cos(0.3));
  EXPECT_EQ(oracle::errcOf([&] { sm::trainGoalNet(net, {}, 1, s); }), sm::Errc::EmptyDataset);
}

TEST(GoalNet, GoalToWorldUsesObjectPose) {
  sm::SceneObject o;
  o.id = "c";
  o.boxes.push_back({Vec3(0, 0.25, 0), Vec3(0.25, 0.25, 0.25), 0.0});
  o.pose = {Vec2(3, 1), Vec2(1, 0)};
  const auto grid = sm::voxelizeObject(o);
  const auto w = sm::goalToWorld({Vec3(0, 0.2, 0.3), Vec3::UnitZ(), sm::Action::Sit}, grid);
  // Object-frame point (0, 0.45, 0.3) with the object facing +x.
  EXPECT_LT((w.position - Vec3(3.3, 0.45, 1)).norm(), 1e-12);
  EXPECT_LT((w.direction - Vec3::UnitX()).norm(), 1e-12);
}

TEST(GoalNet, CheckpointRoundTrip) {
  sm::Rng rng(8);
  auto net = sm::GoalNet::create(sm::GoalNetConfig::tiny(), rng);
  const auto dir = oracle::scratchDir("goal");
  const std::string path = (dir / "g").string();
  sm::saveGoalNet(net, path);
  auto back = sm::loadGoalNet(path);
  EXPECT_EQ(back.config.toJson(), net.config.toJson());
  const auto p = net.params.tensors(), q = back.params.tensors();
  for (std::size_t t = 0; t < p.size(); ++t)
    for (Eigen::Index i = 0; i < p[t].size(); ++i)
      ASSERT_EQ(q[t].data[i], static_cast<double>(static_cast<float>(p[t].data[i])));
  EXPECT_EQ(oracle::errcOf([&] { sm::loadMotionNet(path); }), sm::Errc::CorruptHeader);
  std::filesystem::remove_all(dir);
}

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
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

sm::TrainingWindow randomWindow(int dim, int length, sm::Rng& rng) {
  sm::TrainingWindow w;
  const VectorXd vox = 0.5 * sm::standardNormal(sm::kVoxelFeatures, rng);
  VectorXd x = sm::standardNormal(dim, rng);
  for (int k = 0; k < length; ++k) {
    w.states.push_back(x);
    w.voxels.push_back(vox);
    x = 0.9 * x + 0.1 * sm::standardNormal(dim, rng);
  }
  return w;
}

sm::DenseNet scalarNet(double v) {
  sm::DenseNet n;
  n.layers.push_back({MatrixXd::Constant(1, 1, v), VectorXd::Constant(1, v), sm::Activation::Linear});
  return n;
}

}  // namespace

TEST(BlendExperts, OneHotCopiesExpert) {
  sm::Rng rng(1);
  const std::vector<int> widths{4, 2};
  std::vector<sm::DenseNet> experts;
  for (int k = 0; k < 3; ++k)
    experts.push_back(sm::DenseNet::create(3, widths, sm::Activation::Elu, sm::Activation::Linear, rng));
  const auto b = sm::blendExperts(VectorXd::Unit(3, 1), experts);
  for (std::size_t l = 0; l < b.layers.size(); ++l) {
    EXPECT_EQ(b.layers[l].weight, experts[1].layers[l].weight);
    EXPECT_EQ(b.layers[l].bias, experts[1].layers[l].bias);
  }
  const auto u = sm::blendExperts(VectorXd::Constant(3, 1.0 / 3), experts);
  const MatrixXd mean =
      (experts[0].layers[0].weight + experts[1].layers[0].weight + experts[2].layers[0].weight) / 3;
  EXPECT_TRUE(u.layers[0].weight.isApprox(mean, 1e-14));
}

TEST(BlendExperts, ScalarWorkedExample) {
  const std::vector<sm::DenseNet> experts{scalarNet(0), scalarNet(4)};
  VectorXd w(2);
  w << 0.25, 0.75;
  const auto b = sm::blendExperts(w, experts);
  EXPECT_EQ(b.layers[0].weight(0, 0), 3.0);
  EXPECT_EQ(b.layers[0].bias[0], 3.0);
  w << 0.5, 0.6;
  EXPECT_EQ(oracle::errcOf([&] { sm::blendExperts(w, experts); }), sm::Errc::WeightsNotNormalized);
  w << -0.5, 1.5;
  EXPECT_EQ(oracle::errcOf([&] { sm::blendExperts(w, experts); }), sm::Errc::WeightsNotNormalized);
  EXPECT_EQ(oracle::errcOf([&] { sm::blendExperts(VectorXd::Ones(1), experts); }), sm::Errc::DimMismatch);
}

TEST(BlendExpertsProperty, LinearInWeights) {
  sm::Rng rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  const std::vector<int> widths{3};
  std::vector<sm::DenseNet> experts;
  for (int k = 0; k < 4; ++k)
    experts.push_back(sm::DenseNet::create(2, widths, sm::Activation::Elu, sm::Activation::Linear, rng));
  for (int trial = 0; trial < 100; ++trial) {
    VectorXd a(4), b(4);
    for (int k = 0; k < 4; ++k) {
      a[k] = u(rng);
      b[k] = u(rng);
    }
    a /= a.sum();
    b /= b.sum();
    const double t = u(rng);
    const auto mix = sm::blendExperts(t * a + (1 - t) * b, experts);
    const auto ba = sm::blendExperts(a, experts), bb = sm::blendExperts(b, experts);
    EXPECT_TRUE(mix.layers[0].weight.isApprox(t * ba.layers[0].weight + (1 - t) * bb.layers[0].weight, 1e-12));
  }
}

TEST(Mixture, ForwardEqualsBlendedNetwork) {
  sm::Rng rng(3);
  const std::vector<int> widths{6, 5, 3};
  std::vector<sm::DenseNet> experts;
  for (int k = 0; k < 3; ++k)
    experts.push_back(sm::DenseNet::create(4, widths, sm::Activation::Elu, sm::Activation::Linear, rng));
  VectorXd omega(3);
  omega << 0.2, 0.5, 0.3;
  const VectorXd x = sm::standardNormal(4, rng);
  const VectorXd direct = sm::forward(sm::blendExperts(omega, experts), x);
  sm::MixtureCache cache;
  EXPECT_TRUE(sm::mixtureForward(experts, omega, x, &cache).isApprox(direct, 1e-12));
  EXPECT_TRUE(sm::mixtureForward(experts, omega, x).isApprox(direct, 1e-12));
}

TEST(MotionLoss, ClosedForms) {
  const VectorXd x = VectorXd::LinSpaced(5, 0, 1);
  const sm::GaussianLatent zero{VectorXd::Zero(64), VectorXd::Zero(64)};
  EXPECT_EQ(sm::motionLoss(x, x, zero, 0.1), 0.0);
  VectorXd off = x;
  off[2] += 1.0;
  EXPECT_NEAR(sm::motionLoss(off, x, zero, 0.1), 1.0, 1e-15);
  const sm::GaussianLatent ones{VectorXd::Ones(64), VectorXd::Zero(64)};
  EXPECT_NEAR(sm::motionLoss(x, x, ones, 0.1), 3.2, 1e-12);
  EXPECT_EQ(oracle::errcOf([&] { sm::motionLoss(x, VectorXd::Zero(4), zero, 0.1); }), sm::Errc::DimMismatch);
}

TEST(ScheduleP, Values) {
  const std::vector<std::pair<int, double>> expect{{1, 1.0}, {30, 1.0}, {31, 29.0 / 30}, {45, 0.5},
                                                   {60, 0.0}, {61, 0.0}, {100, 0.0}};
  for (auto [epoch, p] : expect) EXPECT_EQ(sm::scheduleP(epoch, 30, 60), p) << epoch;
}

TEST(SchedulePProperty, MonotoneInUnitInterval) {
  for (int c1 = 1; c1 < 20; ++c1)
    for (int c2 = c1 + 1; c2 < 40; c2 += 3) {
      double last = 1.0;
      for (int e = 1; e < 60; ++e) {
        const double p = sm::scheduleP(e, c1, c2);
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, last);
        last = p;
      }
    }
}

TEST(TransitionLoss, GradientsMatchFiniteDifferences) {
  sm::Rng rng(4);
  auto m = sm::MotionNet::create(sm::MotionNetConfig::tiny(), rng);
  const auto w = randomWindow(m.stateDim(), 2, rng);
  const VectorXd eps = sm::standardNormal(m.config.latent, rng);
  auto grads = m.params.zerosLike();
  sm::transitionLoss(m, w.states[0], w.states[1], w.voxels[1], eps, 0.1, &grads);
  auto loss = [&] { return sm::transitionLoss(m, w.states[0], w.states[1], w.voxels[1], eps, 0.1).loss; };
  const auto check = oracle::checkGradients(m.params.tensors(), grads.tensors(), loss, 6, 5);
  EXPECT_LT(check.worst, 1e-4) << check.where;
  EXPECT_GT(check.checked, 100);
}

TEST(TransitionLoss, ComponentsAddUp) {
  sm::Rng rng(5);
  auto m = sm::MotionNet::create(sm::MotionNetConfig::tiny(), rng);
  const auto w = randomWindow(m.stateDim(), 2, rng);
  const VectorXd eps = sm::standardNormal(m.config.latent, rng);
  const auto r = sm::transitionLoss(m, w.states[0], w.states[1], w.voxels[1], eps, 0.1);
  EXPECT_NEAR(r.loss, r.reconstruction + 0.1 * r.kl, 1e-12);
  const auto latent = sm::encode(m, w.states[1], w.states[0], w.voxels[1]);
  EXPECT_NEAR(r.loss, sm::motionLoss(r.prediction, w.states[1], latent, 0.1), 1e-9);
  const VectorXd omega = sm::gatingWeights(m, sm::reparameterize(latent, eps), w.states[0]);
  EXPECT_NEAR(omega.sum(), 1.0, 1e-12);
  EXPECT_GE(omega.minCoeff(), 0.0);
}

TEST(Training, TeacherForcingBeforeC1) {
  sm::Rng rng(6);
  auto m = sm::MotionNet::create(sm::MotionNetConfig::tiny(), rng);
  const auto w = randomWindow(m.stateDim(), 6, rng);
  sm::ScheduleConfig s;
  s.learningRate = 1e-4;
  auto opt = sm::motionOptimizer(m, s);
  for (int epoch : {1, 15, 30}) {
    const auto t = sm::trainRollout(m, opt, w, epoch, s, rng);
    EXPECT_EQ(t.groundTruthInputs, 5);
    EXPECT_EQ(t.losses.size(), 5u);
  }
  for (int epoch : {61, 80, 100}) {
    const auto t = sm::trainRollout(m, opt, w, epoch, s, rng);
    EXPECT_EQ(t.groundTruthInputs, 1);
  }
}

TEST(Training, FixedSeedIsBitReproducible) {
  auto run = [] {
    sm::Rng rng(7);
    auto m = sm::MotionNet::create(sm::MotionNetConfig::tiny(), rng);
    const auto w = randomWindow(m.stateDim(), 5, rng);
    sm::ScheduleConfig s;
    s.learningRate = 1e-3;
    auto opt = sm::motionOptimizer(m, s);
    std::vector<double> trace;
    for (int epoch = 1; epoch <= 50; epoch += 7) {
      const auto t = sm::trainRollout(m, opt, w, epoch, s, rng);
      trace.insert(trace.end(), t.losses.begin(), t.losses.end());
    }
    return trace;
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], b[i]);
}

TEST(Training, FewStepsReduceLoss) {
  sm::Rng rng(8);
  auto m = sm::MotionNet::create(sm::MotionNetConfig::tiny(), rng);
  const std::vector<sm::TrainingWindow> windows{randomWindow(m.stateDim(), 4, rng)};
  sm::ScheduleConfig s;
  s.learningRate = 1e-3;
  s.epochs = 40;
  auto opt = sm::motionOptimizer(m, s);
  const double before = sm::evaluateWindows(m, windows, s.beta1, 1);
  for (int step = 1; step <= 40; ++step) sm::trainBatch(m, opt, windows, 1, s, rng);
  EXPECT_LT(sm::evaluateWindows(m, windows, s.beta1, 1), 0.7 * before);
}

TEST(Schedule, RejectsBadBounds) {
  sm::ScheduleConfig s;
  s.c1 = 60;
  s.c2 = 30;
  EXPECT_EQ(oracle::errcOf([&] { s.validate(); }), sm::Errc::InvalidConfig);
}

TEST(PredictNext, DeterministicFiniteAndSanitized) {
  sm::Rng init(9);
  const auto m = sm::MotionNet::create(sm::MotionNetConfig::tiny(), init);
  const auto c = m.config.state;
  const VectorXd vox = 0.3 * sm::standardNormal(sm::kVoxelFeatures, init);
  auto prev = sm::CharacterState::zeros(c);
  sm::setGoalWindow(prev, {sm::Vec3(0, 0, 2), sm::Vec3::UnitZ(), sm::Action::Sit}, sm::RootTransform{});
  sm::Rng a(10), b(10);
  const auto x = sm::predictNext(m, prev, vox, a);
  const auto y = sm::predictNext(m, prev, vox, b);
  const VectorXd fx = sm::flatten(x, c), fy = sm::flatten(y, c);
  EXPECT_EQ(fx.size(), sm::stateDim(c));
  EXPECT_TRUE(fx.allFinite());
  EXPECT_EQ(fx, fy);
  for (const auto& d : x.td) EXPECT_NEAR(d.norm(), 1.0, 1e-12);
  for (const auto& r : x.jr) EXPECT_NO_THROW(sm::rot6dToMatrix(r));
  for (Eigen::Index r = 0; r < x.ga.rows(); ++r) EXPECT_EQ(x.ga.row(r).sum(), 1.0);
  // The zero-latent mode ignores the generator.
  sm::Rng c1(1), c2(2);
  EXPECT_EQ(sm::flatten(sm::predictNext(m, prev, vox, c1, sm::LatentMode::Zero), c),
            sm::flatten(sm::predictNext(m, prev, vox, c2, sm::LatentMode::Zero), c));
  EXPECT_EQ(oracle::errcOf([&] { sm::predictNext(m, prev, VectorXd::Zero(10), a); }), sm::Errc::DimMismatch);
}

TEST(Checkpoint, MotionNetRoundTrip) {
  sm::Rng rng(11);
  auto m = sm::MotionNet::create(sm::MotionNetConfig::tiny(), rng);
  m.normalizer.mean = sm::standardNormal(m.stateDim(), rng);
  const auto dir = oracle::scratchDir("motion");
  const std::string path = (dir / "m").string();
  sm::saveMotionNet(m, path, {{"epoch", 3}});
  auto back = sm::loadMotionNet(path);
  EXPECT_EQ(back.config.toJson(), m.config.toJson());
  EXPECT_EQ(sm::readCheckpointManifest(path).at("epoch"), 3);
  const auto p = m.params.tensors(), q = back.params.tensors();
  ASSERT_EQ(p.size(), q.size());
  for (std::size_t t = 0; t < p.size(); ++t)
    for (Eigen::Index i = 0; i < p[t].size(); ++i)
      ASSERT_EQ(q[t].data[i], static_cast<double>(static_cast<float>(p[t].data[i])));
  for (Eigen::Index i = 0; i < m.stateDim(); ++i)
    ASSERT_EQ(back.normalizer.mean[i], static_cast<double>(static_cast<float>(m.normalizer.mean[i])));
  std::filesystem::remove_all(dir);
}

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

// Conditional VAE over goal placements on an object. Positions are handled
// relative to the object's bounds center and scaled by the bounds
// half-diagonal times `positionGain`; directions are raw unit vectors.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "scenemotion/error.hpp"
#include "scenemotion/nn.hpp"
#include "scenemotion/state.hpp"
#include "scenemotion/voxel.hpp"

namespace scenemotion {

struct GoalNetConfig {
  std::vector<int> interactionEncoder{512, 512, 64};
  std::vector<int> encoderHidden{64};
  int latent = 3;
  std::vector<int> decoderHidden{512, 512};
  double beta2 = 0.5;
  double learningRate = 1e-3;
  int epochs = 100;
  int batchSize = 32;
  double positionGain = 8.0;

  static GoalNetConfig full() { return {}; }

  static GoalNetConfig tiny() {
    GoalNetConfig c;
    c.interactionEncoder = {64, 64, 32};
    c.encoderHidden = {64};
    c.decoderHidden = {64, 64};
    return c;
  }

  void validate() const {
    if (interactionEncoder.empty() || decoderHidden.empty() || latent < 1 || !(positionGain > 0)) {
      throw Error(Errc::InvalidConfig, "goal network needs nonempty encoders and latent>=1");
    }
  }

  nlohmann::json toJson() const {
    return {{"interactionEncoder", interactionEncoder}, {"encoderHidden", encoderHidden},
            {"latent", latent}, {"decoderHidden", decoderHidden}, {"beta2", beta2},
            {"learningRate", learningRate}, {"epochs", epochs}, {"batchSize", batchSize},
            {"positionGain", positionGain}};
  }

  static GoalNetConfig fromJson(const nlohmann::json& j) {
    GoalNetConfig c;
    c.interactionEncoder = j.at("interactionEncoder").get<std::vector<int>>();
    c.encoderHidden = j.at("encoderHidden").get<std::vector<int>>();
    c.latent = j.at("latent").get<int>();
    c.decoderHidden = j.at("decoderHidden").get<std::vector<int>>();
    c.beta2 = j.at("beta2").get<double>();
    c.learningRate = j.at("learningRate").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.batchSize = j.at("batchSize").get<int>();
    c.positionGain = j.at("positionGain").get<double>();
    c.validate();
    return c;
  }
};

struct GoalNetParams {
  DenseNet interactionEncoder;
  DenseNet encoderTail;  // may have no layers
  DenseNet muHead;
  DenseNet sigmaHead;
  DenseNet decoder;

  static GoalNetParams create(const GoalNetConfig& c, Rng& rng) {
    c.validate();
    GoalNetParams p;
    p.interactionEncoder =
        DenseNet::create(kVoxelFeatures, c.interactionEncoder, Activation::Elu, Activation::Elu, rng);
    const int code = c.interactionEncoder.back();
    int tailOut = code + 6;
    if (!c.encoderHidden.empty()) {
      p.encoderTail = DenseNet::create(code + 6, c.encoderHidden, Activation::Elu, Activation::Elu, rng);
      tailOut = c.encoderHidden.back();
    }
    const std::vector<int> head{c.latent};
    p.muHead = DenseNet::create(tailOut, head, Activation::Linear, Activation::Linear, rng);
    p.sigmaHead = DenseNet::create(tailOut, head, Activation::Linear, Activation::Linear, rng);
    std::vector<int> dec = c.decoderHidden;
    dec.push_back(6);
    p.decoder = DenseNet::create(code + c.latent, dec, Activation::Elu, Activation::Linear, rng);
    return p;
  }

  GoalNetParams zerosLike() const {
    return {interactionEncoder.zerosLike(), encoderTail.zerosLike(), muHead.zerosLike(),
            sigmaHead.zerosLike(), decoder.zerosLike()};
  }

  std::vector<TensorRef> tensors() {
    std::vector<TensorRef> t;
    interactionEncoder.appendTensors("interactionEncoder", t);
    encoderTail.appendTensors("encoderTail", t);
    muHead.appendTensors("muHead", t);
    sigmaHead.appendTensors("sigmaHead", t);
    decoder.appendTensors("decoder", t);
    return t;
  }
};

struct GoalNet {
  GoalNetConfig config;
  GoalNetParams params;

  static GoalNet create(const GoalNetConfig& c, Rng& rng) { return {c, GoalNetParams::create(c, rng)}; }
};

inline double halfDiagonal(const VoxelGrid& grid) { return 0.5 * grid.bounds.diagonal().norm(); }

/// One labeled goal on an object, in object-center-relative coordinates.
struct GoalSample {
  VectorXd voxels;  // flattened object-centered grid
  Vec3 position;    // meters, relative to the grid origin
  Vec3 direction;   // unit
  double halfDiagonal = 1.0;
};

inline GoalSample makeGoalSample(const VoxelGrid& grid, const Vec3& positionFromCenter,
                                 const Vec3& direction) {
  return {flattenGrid(grid), positionFromCenter, direction.normalized(), halfDiagonal(grid)};
}

/// Squared position error + squared direction error + beta2 * KL.
inline double goalLoss(const Vec3& posHat, const Vec3& dirHat, const Vec3& pos, const Vec3& dir,
                       const GaussianLatent& latent, double beta2) {
  return (posHat - pos).squaredNorm() + (dirHat - dir).squaredNorm() +
         beta2 * klStandardNormal(latent);
}

namespace detail {

struct GoalEncodeCache {
  ForwardCache interaction, tail, mu, sigma;
  VectorXd code;
};

inline GaussianLatent goalEncode(const GoalNet& net, const VectorXd& voxels, const Vec3& posN,
                                 const Vec3& dir, GoalEncodeCache* cache) {
  if (voxels.size() != kVoxelFeatures) throw Error(Errc::DimMismatch, "voxel input must have 2048 values");
  VectorXd code = forward(net.params.interactionEncoder, voxels, cache ? &cache->interaction : nullptr);
  VectorXd in(code.size() + 6);
  in << code, posN, dir;
  const VectorXd h = net.params.encoderTail.layers.empty()
                         ? in
                         : forward(net.params.encoderTail, in, cache ? &cache->tail : nullptr);
  GaussianLatent z;
  z.mu = forward(net.params.muHead, h, cache ? &cache->mu : nullptr);
  z.logSigma = forward(net.params.sigmaHead, h, cache ? &cache->sigma : nullptr);
  if (cache) cache->code = std::move(code);
  return z;
}

inline VectorXd goalDecode(const GoalNet& net, const VectorXd& z, const VectorXd& code,
                           ForwardCache* cache) {
  if (z.size() != net.config.latent) throw Error(Errc::DimMismatch, "goal latent size mismatch");
  VectorXd in(code.size() + z.size());
  in << code, z;
  return forward(net.params.decoder, in, cache);
}

}  // namespace detail

/// Posterior over the goal latent; `g.position` is relative to the grid origin.
inline GaussianLatent encodeGoal(const GoalNet& net, const Goal& g, const VoxelGrid& grid) {
  const double scale = net.config.positionGain / halfDiagonal(grid);
  return detail::goalEncode(net, flattenGrid(grid), g.position * scale, g.direction, nullptr);
}

/// Decodes a latent into a goal relative to the grid origin (object axes).
inline Goal decodeGoal(const GoalNet& net, const VectorXd& z, const VoxelGrid& grid,
                       Action action = Action::Sit) {
  const VectorXd code = forward(net.params.interactionEncoder, flattenGrid(grid));
  const VectorXd out = detail::goalDecode(net, z, code, nullptr);
  if (!out.allFinite()) throw Error(Errc::NonFiniteOutput, "goal decoder produced non-finite values");
  const Vec3 dir = out.segment<3>(3);
  if (dir.norm() < 1e-8) throw Error(Errc::ZeroDirection, "decoded goal direction is zero");
  Goal g;
  g.position = out.head<3>() * (halfDiagonal(grid) / net.config.positionGain);
  g.direction = dir.normalized();
  g.action = action;
  return g;
}

inline std::vector<Goal> sampleGoals(const GoalNet& net, const VoxelGrid& grid, int n, Rng& rng,
                                     Action action = Action::Sit) {
  if (n < 1) throw Error(Errc::InvalidConfig, "need at least one goal sample");
  std::vector<Goal> out;
  for (int i = 0; i < n; ++i) out.push_back(decodeGoal(net, standardNormal(net.config.latent, rng), grid, action));
  return out;
}

/// Object-center-relative goal to world coordinates.
inline Goal goalToWorld(const Goal& g, const VoxelGrid& grid) {
  Goal w = g;
  w.position = fromRootRelative(grid.origin + g.position, grid.objectPose);
  w.direction = directionFromRoot(g.direction, grid.objectPose).normalized();
  return w;
}

struct GoalLossTerms {
  double loss = 0, position = 0, direction = 0, kl = 0;
};

/// Loss of one sample (normalized units); adds d(scale * loss)/dparams when `grads` is given.
inline GoalLossTerms goalSampleLoss(const GoalNet& net, const GoalSample& s, const VectorXd& eps,
                                    GoalNetParams* grads = nullptr, double scale = 1.0) {
  const double k = net.config.positionGain / s.halfDiagonal;
  const Vec3 posN = s.position * k;
  detail::GoalEncodeCache enc;
  const GaussianLatent latent = detail::goalEncode(net, s.voxels, posN, s.direction, &enc);
  const VectorXd z = reparameterize(latent, eps);
  ForwardCache dec;
  const VectorXd out = detail::goalDecode(net, z, enc.code, &dec);
  GoalLossTerms t;
  t.position = (out.head<3>() - posN).squaredNorm();
  t.direction = (out.segment<3>(3) - s.direction).squaredNorm();
  t.kl = klStandardNormal(latent);
  t.loss = t.position + t.direction + net.config.beta2 * t.kl;
  if (!grads) return t;

  auto& g = *grads;
  VectorXd dOut(6);
  dOut << 2.0 * (out.head<3>() - posN), 2.0 * (out.segment<3>(3) - s.direction);
  dOut *= scale;
  const VectorXd dDecIn = backward(net.params.decoder, dec, dOut, g.decoder);
  VectorXd dCode = dDecIn.head(enc.code.size());
  const VectorXd dz = dDecIn.tail(net.config.latent);
  VectorXd dMu = dz;
  VectorXd dLogSigma = dz.cwiseProduct((latent.logSigma.array().exp() * eps.array()).matrix());
  klGradient(latent, scale * net.config.beta2, dMu, dLogSigma);
  VectorXd dH = backward(net.params.muHead, enc.mu, dMu, g.muHead);
  dH += backward(net.params.sigmaHead, enc.sigma, dLogSigma, g.sigmaHead);
  const VectorXd dIn = net.params.encoderTail.layers.empty()
                           ? dH
                           : backward(net.params.encoderTail, enc.tail, dH, g.encoderTail);
  dCode += dIn.head(enc.code.size());
  backward(net.params.interactionEncoder, enc.interaction, dCode, g.interactionEncoder);
  return t;
}

/// Mini-batch Adam training; returns the mean loss of each epoch.
inline std::vector<double> trainGoalNet(GoalNet& net, std::span<const GoalSample> data, int epochs,
                                        Rng& rng) {
  if (data.empty()) throw Error(Errc::EmptyDataset, "no goal samples");
  auto params = net.params.tensors();
  OptimizerState opt = OptimizerState::create(params, {net.config.learningRate, epochs});
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> history;
  const std::size_t batch = static_cast<std::size_t>(std::max(1, net.config.batchSize));
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      GoalNetParams grads = net.params.zerosLike();
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const VectorXd eps = standardNormal(net.config.latent, rng);
        sum += goalSampleLoss(net, data[order[i]], eps, &grads, scale).loss;
      }
      auto g = grads.tensors();
      adamStep(opt, params, g, e);
    }
    history.push_back(sum / static_cast<double>(data.size()));
  }
  return history;
}

inline void saveGoalNet(GoalNet& net, const std::string& path, nlohmann::json extra = {}) {
  nlohmann::json manifest = {{"kind", "goal-net"}, {"config", net.config.toJson()}};
  for (auto it = extra.begin(); it != extra.end(); ++it) manifest[it.key()] = it.value();
  auto t = net.params.tensors();
  writeCheckpoint(path, manifest, t);
}

inline GoalNet loadGoalNet(const std::string& path) {
  const auto manifest = readCheckpointManifest(path);
  try {
    if (manifest.at("kind").get<std::string>() != "goal-net") {
      throw Error(Errc::CorruptHeader, path + " is not a goal-net checkpoint");
    }
    Rng rng(0);
    GoalNet net = GoalNet::create(GoalNetConfig::fromJson(manifest.at("config")), rng);
    auto t = net.params.tensors();
    readCheckpointPayload(path, manifest, t);
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptHeader, path + ": " + e.what());
  }
}

}  // namespace scenemotion

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

// Autoregressive conditional VAE for next-state prediction.
//
// Encoder: state encoder over (X_prev, X_cur) and an interaction encoder
// over the root-relative voxel grid, concatenated into mean / log-sigma
// heads. Decoder: a gating network over (Z, X_prev) produces softmax
// weights that blend K expert prediction networks; the blended network maps
// (X_prev, interaction code) to the next state. All state vectors handled
// here are standardized with the model's Normalizer.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "scenemotion/error.hpp"
#include "scenemotion/nn.hpp"
#include "scenemotion/state.hpp"
#include "scenemotion/voxel.hpp"

namespace scenemotion {

struct MotionNetConfig {
  StateConfig state = StateConfig::full();
  std::vector<int> stateEncoder{512, 256, 256};
  std::vector<int> interactionEncoder{256, 256, 256};
  int latent = 64;
  std::vector<int> gatingHidden{512, 256};
  int experts = 12;
  std::vector<int> predictionHidden{512, 512};

  static MotionNetConfig full() { return {}; }

  static MotionNetConfig tiny() {
    MotionNetConfig c;
    c.state = StateConfig::tiny();
    c.stateEncoder = {64, 32, 32};
    c.interactionEncoder = {32, 32, 32};
    c.latent = 16;
    c.gatingHidden = {32, 16};
    c.experts = 4;
    c.predictionHidden = {96, 96};
    return c;
  }

  void validate() const {
    state.validate();
    if (stateEncoder.empty() || interactionEncoder.empty() || latent < 1 || experts < 1 ||
        gatingHidden.empty() || predictionHidden.empty()) {
      throw Error(Errc::InvalidConfig, "motion network needs nonempty layers, latent>=1, K>=1");
    }
  }

  nlohmann::json toJson() const {
    return {{"state", stateConfigToJson(state)},
            {"stateEncoder", stateEncoder}, {"interactionEncoder", interactionEncoder},
            {"latent", latent}, {"gatingHidden", gatingHidden}, {"experts", experts},
            {"predictionHidden", predictionHidden}};
  }

  static MotionNetConfig fromJson(const nlohmann::json& j) {
    MotionNetConfig c;
    c.state = stateConfigFromJson(j.at("state"));
    c.stateEncoder = j.at("stateEncoder").get<std::vector<int>>();
    c.interactionEncoder = j.at("interactionEncoder").get<std::vector<int>>();
    c.latent = j.at("latent").get<int>();
    c.gatingHidden = j.at("gatingHidden").get<std::vector<int>>();
    c.experts = j.at("experts").get<int>();
    c.predictionHidden = j.at("predictionHidden").get<std::vector<int>>();
    c.validate();
    return c;
  }
};

/// Per-feature standardization; features with zero spread keep std = 1.
struct Normalizer {
  VectorXd mean;
  VectorXd stdev;

  static Normalizer identity(Eigen::Index n) { return {VectorXd::Zero(n), VectorXd::Ones(n)}; }

  VectorXd normalize(const VectorXd& x) const {
    return ((x - mean).array() / stdev.array()).matrix();
  }
  VectorXd denormalize(const VectorXd& x) const {
    return (x.array() * stdev.array()).matrix() + mean;
  }
};

struct MotionNetParams {
  DenseNet stateEncoder;
  DenseNet interactionEncoder;
  DenseNet muHead;
  DenseNet sigmaHead;
  DenseNet gating;
  std::vector<DenseNet> experts;

  static MotionNetParams create(const MotionNetConfig& c, Rng& rng) {
    c.validate();
    const int dim = stateDim(c.state);
    MotionNetParams p;
    p.stateEncoder = DenseNet::create(2 * dim, c.stateEncoder, Activation::Elu, Activation::Elu, rng);
    p.interactionEncoder = DenseNet::create(kVoxelFeatures, c.interactionEncoder, Activation::Elu,
                                            Activation::Elu, rng);
    const int code = c.stateEncoder.back() + c.interactionEncoder.back();
    const std::vector<int> head{c.latent};
    p.muHead = DenseNet::create(code, head, Activation::Linear, Activation::Linear, rng);
    p.sigmaHead = DenseNet::create(code, head, Activation::Linear, Activation::Linear, rng);
    std::vector<int> gate = c.gatingHidden;
    gate.push_back(c.experts);
    p.gating = DenseNet::create(c.latent + dim, gate, Activation::Elu, Activation::Softmax, rng);
    std::vector<int> pred = c.predictionHidden;
    pred.push_back(dim);
    for (int k = 0; k < c.experts; ++k) {
      p.experts.push_back(DenseNet::create(dim + c.interactionEncoder.back(), pred, Activation::Elu,
                                           Activation::Linear, rng));
    }
    return p;
  }

  MotionNetParams zerosLike() const {
    MotionNetParams z;
    z.stateEncoder = stateEncoder.zerosLike();
    z.interactionEncoder = interactionEncoder.zerosLike();
    z.muHead = muHead.zerosLike();
    z.sigmaHead = sigmaHead.zerosLike();
    z.gating = gating.zerosLike();
    for (const auto& e : experts) z.experts.push_back(e.zerosLike());
    return z;
  }

  std::vector<TensorRef> tensors() {
    std::vector<TensorRef> t;
    stateEncoder.appendTensors("stateEncoder", t);
    interactionEncoder.appendTensors("interactionEncoder", t);
    muHead.appendTensors("muHead", t);
    sigmaHead.appendTensors("sigmaHead", t);
    gating.appendTensors("gating", t);
    for (std::size_t k = 0; k < experts.size(); ++k) {
      experts[k].appendTensors("expert" + std::to_string(k), t);
    }
    return t;
  }
};

struct MotionNet {
  MotionNetConfig config;
  MotionNetParams params;
  Normalizer normalizer;

  static MotionNet create(const MotionNetConfig& c, Rng& rng) {
    MotionNet m{c, MotionNetParams::create(c, rng), Normalizer::identity(scenemotion::stateDim(c.state))};
    return m;
  }

  int stateDim() const { return scenemotion::stateDim(config.state); }
};

// ---------------------------------------------------------------------------
// Mixture of experts

/// Convex blend of expert parameter sets: alpha = sum_k omega_k alpha_k.
inline DenseNet blendExperts(const VectorXd& omega, std::span<const DenseNet> experts) {
  if (omega.size() != static_cast<Eigen::Index>(experts.size()) || experts.empty()) {
    throw Error(Errc::DimMismatch, "one blend weight per expert is required");
  }
  if (omega.minCoeff() < 0.0 || std::abs(omega.sum() - 1.0) > 1e-6) {
    throw Error(Errc::WeightsNotNormalized, "blend weights must be nonnegative and sum to 1");
  }
  DenseNet out = experts.front().zerosLike();
  for (std::size_t k = 0; k < experts.size(); ++k) {
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
      out.layers[l].weight += omega[static_cast<Eigen::Index>(k)] * experts[k].layers[l].weight;
      out.layers[l].bias += omega[static_cast<Eigen::Index>(k)] * experts[k].layers[l].bias;
    }
  }
  return out;
}

struct MixtureCache {
  std::vector<VectorXd> inputs;
  std::vector<VectorXd> preacts;
  std::vector<VectorXd> outputs;
  std::vector<std::vector<VectorXd>> expertPreacts;  // [layer][expert]
};

/// Runs the blended prediction network without materializing the blend:
/// each layer's pre-activation is sum_k omega_k (W_k h + b_k).
inline VectorXd mixtureForward(std::span<const DenseNet> experts, const VectorXd& omega,
                               const VectorXd& x, MixtureCache* cache = nullptr) {
  const auto& shape = experts.front();
  if (x.size() != shape.inputSize()) {
    throw Error(Errc::DimMismatch, "prediction network input size mismatch");
  }
  if (cache) *cache = {};
  VectorXd h = x;
  const std::size_t K = experts.size();
  for (std::size_t l = 0; l < shape.layers.size(); ++l) {
    VectorXd pre = VectorXd::Zero(shape.layers[l].weight.rows());
    std::vector<VectorXd> per;
    for (std::size_t k = 0; k < K; ++k) {
      const auto& layer = experts[k].layers[l];
      const double w = omega[static_cast<Eigen::Index>(k)];
      if (cache) {
        per.push_back(layer.weight * h + layer.bias);
        pre += w * per.back();
      } else {
        pre.noalias() += w * (layer.weight * h);
        pre += w * layer.bias;
      }
    }
    VectorXd out = pre;
    applyActivation(shape.layers[l].activation, out);
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->preacts.push_back(std::move(pre));
      cache->outputs.push_back(out);
      cache->expertPreacts.push_back(std::move(per));
    }
    h = std::move(out);
  }
  return h;
}

/// Accumulates expert gradients, adds dLoss/domega into `dOmega`, returns dLoss/dx.
inline VectorXd mixtureBackward(std::span<const DenseNet> experts, const VectorXd& omega,
                                const MixtureCache& cache, const VectorXd& dy,
                                std::span<DenseNet> grads, VectorXd& dOmega) {
  const auto& shape = experts.front();
  VectorXd d = dy;
  for (std::size_t l = shape.layers.size(); l-- > 0;) {
    const VectorXd dPre = activationBackward(shape.layers[l].activation, cache.preacts[l],
                                             cache.outputs[l], d);
    VectorXd dIn = VectorXd::Zero(cache.inputs[l].size());
    for (std::size_t k = 0; k < experts.size(); ++k) {
      const auto ki = static_cast<Eigen::Index>(k);
      const double w = omega[ki];
      dOmega[ki] += dPre.dot(cache.expertPreacts[l][k]);
      grads[k].layers[l].weight.noalias() += (w * dPre) * cache.inputs[l].transpose();
      grads[k].layers[l].bias += w * dPre;
      dIn.noalias() += w * (experts[k].layers[l].weight.transpose() * dPre);
    }
    d = std::move(dIn);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Encoder / decoder on standardized vectors

struct EncodeCache {
  ForwardCache state, interaction, mu, sigma;
  VectorXd interactionCode;
};

inline GaussianLatent encode(const MotionNet& m, const VectorXd& xCur, const VectorXd& xPrev,
                             const VectorXd& voxels, EncodeCache* cache = nullptr) {
  const auto dim = m.stateDim();
  if (xCur.size() != dim || xPrev.size() != dim || voxels.size() != kVoxelFeatures) {
    throw Error(Errc::DimMismatch, "encoder inputs do not match the state config");
  }
  VectorXd pair(2 * dim);
  pair << xPrev, xCur;
  const VectorXd s = forward(m.params.stateEncoder, pair, cache ? &cache->state : nullptr);
  VectorXd i = forward(m.params.interactionEncoder, voxels, cache ? &cache->interaction : nullptr);
  VectorXd code(s.size() + i.size());
  code << s, i;
  GaussianLatent z;
  z.mu = forward(m.params.muHead, code, cache ? &cache->mu : nullptr);
  z.logSigma = forward(m.params.sigmaHead, code, cache ? &cache->sigma : nullptr);
  if (cache) cache->interactionCode = std::move(i);
  return z;
}

struct DecodeCache {
  ForwardCache gating;
  MixtureCache mixture;
  VectorXd omega;
};

/// Decoder given a precomputed interaction code (output of the interaction encoder).
inline VectorXd decodeWithCode(const MotionNet& m, const VectorXd& z, const VectorXd& xPrev,
                               const VectorXd& interactionCode, DecodeCache* cache = nullptr) {
  if (z.size() != m.config.latent || xPrev.size() != m.stateDim()) {
    throw Error(Errc::DimMismatch, "decoder inputs do not match the config");
  }
  VectorXd gateIn(z.size() + xPrev.size());
  gateIn << z, xPrev;
  VectorXd omega = forward(m.params.gating, gateIn, cache ? &cache->gating : nullptr);
  VectorXd predIn(xPrev.size() + interactionCode.size());
  predIn << xPrev, interactionCode;
  VectorXd y = mixtureForward(m.params.experts, omega, predIn, cache ? &cache->mixture : nullptr);
  if (cache) cache->omega = std::move(omega);
  return y;
}

inline VectorXd decode(const MotionNet& m, const VectorXd& z, const VectorXd& xPrev,
                       const VectorXd& voxels) {
  if (voxels.size() != kVoxelFeatures) throw Error(Errc::DimMismatch, "voxel input must have 2048 values");
  return decodeWithCode(m, z, xPrev, forward(m.params.interactionEncoder, voxels));
}

inline VectorXd gatingWeights(const MotionNet& m, const VectorXd& z, const VectorXd& xPrev) {
  VectorXd gateIn(z.size() + xPrev.size());
  gateIn << z, xPrev;
  return forward(m.params.gating, gateIn);
}

/// ||xhat - x||^2 + beta * KL(latent || N(0, I)).
inline double motionLoss(const VectorXd& xhat, const VectorXd& xtrue, const GaussianLatent& latent,
                         double beta) {
  if (xhat.size() != xtrue.size()) throw Error(Errc::DimMismatch, "loss operands differ in length");
  return (xhat - xtrue).squaredNorm() + beta * klStandardNormal(latent);
}

struct TransitionResult {
  double loss = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;
  VectorXd prediction;
};

/// Loss of one transition; when `grads` is given, adds d(scale * loss)/dparams.
/// `eps` is the reparameterization noise.
inline TransitionResult transitionLoss(const MotionNet& m, const VectorXd& xPrev,
                                       const VectorXd& xCur, const VectorXd& voxels,
                                       const VectorXd& eps, double beta,
                                       MotionNetParams* grads = nullptr, double scale = 1.0) {
  EncodeCache enc;
  DecodeCache dec;
  const GaussianLatent latent = encode(m, xCur, xPrev, voxels, &enc);
  const VectorXd z = reparameterize(latent, eps);
  VectorXd y = decodeWithCode(m, z, xPrev, enc.interactionCode, &dec);

  TransitionResult r;
  r.reconstruction = (y - xCur).squaredNorm();
  r.kl = klStandardNormal(latent);
  r.loss = r.reconstruction + beta * r.kl;
  r.prediction = y;
  if (!grads) return r;

  auto& g = *grads;
  const VectorXd dy = scale * 2.0 * (y - xCur);
  VectorXd dOmega = VectorXd::Zero(dec.omega.size());
  const VectorXd dPredIn =
      mixtureBackward(m.params.experts, dec.omega, dec.mixture, dy, g.experts, dOmega);
  VectorXd dCode = dPredIn.tail(enc.interactionCode.size());
  const VectorXd dGateIn = backward(m.params.gating, dec.gating, dOmega, g.gating);
  const VectorXd dz = dGateIn.head(m.config.latent);

  VectorXd dMu = dz;
  VectorXd dLogSigma = dz.cwiseProduct((latent.logSigma.array().exp() * eps.array()).matrix());
  klGradient(latent, scale * beta, dMu, dLogSigma);
  VectorXd dHead = backward(m.params.muHead, enc.mu, dMu, g.muHead);
  dHead += backward(m.params.sigmaHead, enc.sigma, dLogSigma, g.sigmaHead);
  const auto stateWidth = m.params.stateEncoder.outputSize();
  backward(m.params.stateEncoder, enc.state, dHead.head(stateWidth), g.stateEncoder);
  dCode += dHead.tail(dHead.size() - stateWidth);
  backward(m.params.interactionEncoder, enc.interaction, dCode, g.interactionEncoder);
  return r;
}

// ---------------------------------------------------------------------------
// Scheduled sampling

/// Probability of feeding the ground truth back; epochs are 1-based.
inline double scheduleP(int epoch, int c1, int c2) {
  if (epoch <= c1) return 1.0;
  if (epoch <= c2) return static_cast<double>(c2 - epoch) / static_cast<double>(c2 - c1);
  return 0.0;
}

struct ScheduleConfig {
  int c1 = 30;
  int c2 = 60;
  int rolloutLength = 60;
  int epochs = 100;
  double beta1 = 0.1;
  double learningRate = 5e-5;
  int batchClips = 32;

  void validate() const {
    if (!(c1 < c2 && c2 <= epochs) || rolloutLength < 2 || batchClips < 1) {
      throw Error(Errc::InvalidConfig, "schedule needs C1 < C2 <= epochs and L >= 2");
    }
  }
};

/// L consecutive standardized states with their root-relative voxel inputs.
struct TrainingWindow {
  std::vector<VectorXd> states;
  std::vector<VectorXd> voxels;
};

struct RolloutTrace {
  std::vector<double> losses;  // one per transition
  int groundTruthInputs = 0;   // transitions whose input was ground truth
  double mean() const {
    double s = 0;
    for (double l : losses) s += l;
    return losses.empty() ? 0.0 : s / static_cast<double>(losses.size());
  }
};

/// Copies the exogenous goal slots (gp, gd, ga) from `from` into `to`.
inline void refreshGoalSlots(VectorXd& to, const VectorXd& from, const StateConfig& c) {
  const StateLayout lay(c);
  to.segment(lay.gp, lay.contacts - lay.gp) = from.segment(lay.gp, lay.contacts - lay.gp);
}

/// Runs one window with scheduled sampling, accumulating (1/steps) * d loss
/// into `grads`. Recycled predictions are treated as constants.
inline RolloutTrace rolloutGradients(const MotionNet& m, const TrainingWindow& w, double p,
                                     double beta, Rng& rng, MotionNetParams& grads,
                                     double weight = 1.0) {
  const std::size_t L = w.states.size();
  if (L < 2 || w.voxels.size() != L) throw Error(Errc::DimMismatch, "window needs >=2 aligned frames");
  RolloutTrace trace;
  std::bernoulli_distribution useTruth(std::clamp(p, 0.0, 1.0));
  const double scale = weight / static_cast<double>(L - 1);
  VectorXd previousPrediction;
  for (std::size_t k = 1; k < L; ++k) {
    VectorXd input;
    if (k == 1 || useTruth(rng)) {
      input = w.states[k - 1];
      ++trace.groundTruthInputs;
    } else {
      input = previousPrediction;
      refreshGoalSlots(input, w.states[k - 1], m.config.state);
    }
    const VectorXd eps = standardNormal(m.config.latent, rng);
    auto r = transitionLoss(m, input, w.states[k], w.voxels[k], eps, beta, &grads, scale);
    trace.losses.push_back(r.loss);
    previousPrediction = std::move(r.prediction);
  }
  return trace;
}

/// One optimizer step over a batch of windows; returns one trace per window.
inline std::vector<RolloutTrace> trainBatch(MotionNet& m, OptimizerState& opt,
                                            std::span<const TrainingWindow> batch, int epoch,
                                            const ScheduleConfig& s, Rng& rng) {
  const double p = scheduleP(epoch, s.c1, s.c2);
  MotionNetParams grads = m.params.zerosLike();
  std::vector<RolloutTrace> traces;
  for (const auto& w : batch) {
    traces.push_back(rolloutGradients(m, w, p, s.beta1, rng, grads,
                                      1.0 / static_cast<double>(batch.size())));
  }
  auto params = m.params.tensors();
  auto g = grads.tensors();
  adamStep(opt, params, g, epoch - 1);
  return traces;
}

inline RolloutTrace trainRollout(MotionNet& m, OptimizerState& opt, const TrainingWindow& w,
                                 int epoch, const ScheduleConfig& s, Rng& rng) {
  return trainBatch(m, opt, std::span<const TrainingWindow>(&w, 1), epoch, s, rng).front();
}

inline OptimizerState motionOptimizer(MotionNet& m, const ScheduleConfig& s) {
  auto t = m.params.tensors();
  return OptimizerState::create(t, {s.learningRate, s.epochs});
}

/// Teacher-forced mean loss over windows with a fixed noise seed.
inline double evaluateWindows(const MotionNet& m, std::span<const TrainingWindow> windows,
                              double beta, std::uint64_t seed) {
  Rng rng(seed);
  double sum = 0;
  std::size_t n = 0;
  for (const auto& w : windows) {
    for (std::size_t k = 1; k < w.states.size(); ++k) {
      const VectorXd eps = standardNormal(m.config.latent, rng);
      sum += transitionLoss(m, w.states[k - 1], w.states[k], w.voxels[k], eps, beta).loss;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

// ---------------------------------------------------------------------------
// Inference

enum class LatentMode { Sample, Zero };

/// Post-processing of a raw decoded state: unit directions, orthonormal
/// rotations, one-hot goal actions, contacts in [0, 1].
inline void sanitizeState(CharacterState& s) {
  for (auto* dirs : {&s.td, &s.tdGoal})
    for (auto& d : *dirs) d = normalizedOr(d, Vec2(0, 1));
  for (auto& d : s.gd) {
    const double n = d.norm();
    d = n > 1e-12 ? Vec3(d / n) : Vec3::UnitZ();
  }
  for (auto& r : s.jr) {
    try {
      r = matrixToRot6d(rot6dToMatrix(r));
    } catch (const Error&) {
      r = Rotation6D{};
    }
  }
  for (Eigen::Index row = 0; row < s.ga.rows(); ++row) {
    Eigen::Index best;
    s.ga.row(row).maxCoeff(&best);
    s.ga.row(row).setZero();
    s.ga(row, best) = 1.0;
  }
  for (double& c : s.contacts) c = std::clamp(c, 0.0, 1.0);
}

/// Samples the next state from the decoder; `voxels` is the root-relative grid.
inline CharacterState predictNext(const MotionNet& m, const CharacterState& prev,
                                  const VectorXd& voxels, Rng& rng,
                                  LatentMode mode = LatentMode::Sample) {
  const VectorXd x = m.normalizer.normalize(flatten(prev, m.config.state));
  const VectorXd z = mode == LatentMode::Sample ? standardNormal(m.config.latent, rng)
                                                : VectorXd::Zero(m.config.latent);
  const VectorXd y = m.normalizer.denormalize(decode(m, z, x, voxels));
  if (!y.allFinite()) throw Error(Errc::NonFiniteOutput, "decoder produced non-finite values");
  CharacterState next = unflatten(y, m.config.state);
  sanitizeState(next);
  return next;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline void saveMotionNet(MotionNet& m, const std::string& path, nlohmann::json extra = {}) {
  nlohmann::json manifest = {{"kind", "motion-net"}, {"config", m.config.toJson()}};
  for (auto it = extra.begin(); it != extra.end(); ++it) manifest[it.key()] = it.value();
  auto t = m.params.tensors();
  t.push_back({"normalizer.mean", m.normalizer.mean.data(), m.normalizer.mean.size(), 1});
  t.push_back({"normalizer.std", m.normalizer.stdev.data(), m.normalizer.stdev.size(), 1});
  writeCheckpoint(path, manifest, t);
}

inline MotionNet loadMotionNet(const std::string& path) {
  const auto manifest = readCheckpointManifest(path);
  try {
    if (manifest.at("kind").get<std::string>() != "motion-net") {
      throw Error(Errc::CorruptHeader, path + " is not a motion-net checkpoint");
    }
    const auto cfg = MotionNetConfig::fromJson(manifest.at("config"));
    Rng rng(0);
    MotionNet m = MotionNet::create(cfg, rng);
    auto t = m.params.tensors();
    t.push_back({"normalizer.mean", m.normalizer.mean.data(), m.normalizer.mean.size(), 1});
    t.push_back({"normalizer.std", m.normalizer.stdev.data(), m.normalizer.stdev.size(), 1});
    readCheckpointPayload(path, manifest, t);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptHeader, path + ": " + e.what());
  }
}

}  // namespace scenemotion

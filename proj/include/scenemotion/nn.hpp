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

// Dense networks with hand-written reverse-mode gradients, Gaussian latent
// helpers, Adam with linear rate decay, and the checkpoint file format.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "scenemotion/error.hpp"

namespace scenemotion {

using Rng = std::mt19937_64;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation { Elu, Linear, Softmax };

inline const char* activationName(Activation a) {
  switch (a) {
    case Activation::Elu: return "elu";
    case Activation::Linear: return "linear";
    case Activation::Softmax: return "softmax";
  }
  return "linear";
}

inline Activation parseActivation(const std::string& s) {
  if (s == "elu") return Activation::Elu;
  if (s == "softmax") return Activation::Softmax;
  if (s == "linear") return Activation::Linear;
  throw Error(Errc::CorruptHeader, "unknown activation '" + s + "'");
}

inline double elu(double v) { return v > 0.0 ? v : std::expm1(v); }

inline VectorXd softmax(const VectorXd& v) {
  const VectorXd e = (v.array() - v.maxCoeff()).exp();
  return e / e.sum();
}

inline void applyActivation(Activation a, VectorXd& v) {
  switch (a) {
    case Activation::Elu: v = v.unaryExpr([](double x) { return elu(x); }); break;
    case Activation::Softmax: v = softmax(v); break;
    case Activation::Linear: break;
  }
}

/// Gradient through an activation given its pre-activation and output.
inline VectorXd activationBackward(Activation a, const VectorXd& pre, const VectorXd& out,
                                   const VectorXd& dOut) {
  switch (a) {
    case Activation::Elu:
      return dOut.binaryExpr(pre, [](double g, double x) { return x > 0.0 ? g : g * std::exp(x); });
    case Activation::Softmax:
      return out.cwiseProduct((dOut.array() - out.dot(dOut)).matrix());
    case Activation::Linear:
      return dOut;
  }
  return dOut;
}

struct DenseLayer {
  MatrixXd weight;  // out x in
  VectorXd bias;
  Activation activation = Activation::Linear;
};

/// Flat view of one parameter tensor (column-major storage).
struct TensorRef {
  std::string name;
  double* data = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
  Eigen::Map<VectorXd> vec() const { return {data, size()}; }
};

struct DenseNet {
  std::vector<DenseLayer> layers;

  Eigen::Index inputSize() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
  Eigen::Index outputSize() const { return layers.empty() ? 0 : layers.back().weight.rows(); }

  /// `widths` lists each layer's output size; hidden layers use `hidden`,
  /// the last layer `output`. Weights are Glorot-uniform, biases zero.
  static DenseNet create(Eigen::Index input, std::span<const int> widths, Activation hidden,
                         Activation output, Rng& rng) {
    DenseNet net;
    Eigen::Index in = input;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      const Eigen::Index out = widths[i];
      const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
      std::uniform_real_distribution<double> u(-limit, limit);
      DenseLayer l;
      l.weight = MatrixXd(out, in);
      for (Eigen::Index c = 0; c < in; ++c)
        for (Eigen::Index r = 0; r < out; ++r) l.weight(r, c) = u(rng);
      l.bias = VectorXd::Zero(out);
      l.activation = i + 1 == widths.size() ? output : hidden;
      net.layers.push_back(std::move(l));
      in = out;
    }
    return net;
  }

  DenseNet zerosLike() const {
    DenseNet z = *this;
    for (auto& l : z.layers) {
      l.weight.setZero();
      l.bias.setZero();
    }
    return z;
  }

  void appendTensors(const std::string& prefix, std::vector<TensorRef>& out) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto& l = layers[i];
      const std::string p = prefix + "." + std::to_string(i);
      out.push_back({p + ".weight", l.weight.data(), l.weight.rows(), l.weight.cols()});
      out.push_back({p + ".bias", l.bias.data(), l.bias.rows(), 1});
    }
  }

  nlohmann::json shapeJson() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& l : layers) {
      j.push_back({{"in", l.weight.cols()}, {"out", l.weight.rows()},
                   {"activation", activationName(l.activation)}});
    }
    return j;
  }

  /// Zero-initialized network with the shape described by shapeJson().
  static DenseNet fromShape(const nlohmann::json& j) {
    DenseNet net;
    for (const auto& l : j) {
      DenseLayer layer;
      layer.weight = MatrixXd::Zero(l.at("out").get<Eigen::Index>(), l.at("in").get<Eigen::Index>());
      layer.bias = VectorXd::Zero(l.at("out").get<Eigen::Index>());
      layer.activation = parseActivation(l.at("activation").get<std::string>());
      net.layers.push_back(std::move(layer));
    }
    return net;
  }
};

/// Per-layer intermediates kept by forward() for backward().
struct ForwardCache {
  std::vector<VectorXd> inputs;
  std::vector<VectorXd> preacts;
  std::vector<VectorXd> outputs;
};

inline VectorXd forward(const DenseNet& net, const VectorXd& x, ForwardCache* cache = nullptr) {
  if (x.size() != net.inputSize()) {
    throw Error(Errc::DimMismatch, "network expects " + std::to_string(net.inputSize()) +
                                       " inputs, got " + std::to_string(x.size()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->preacts.clear();
    cache->outputs.clear();
  }
  VectorXd h = x;
  for (const auto& l : net.layers) {
    VectorXd pre = l.weight * h + l.bias;
    VectorXd out = pre;
    applyActivation(l.activation, out);
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->preacts.push_back(std::move(pre));
      cache->outputs.push_back(out);
    }
    h = std::move(out);
  }
  return h;
}

/// Accumulates parameter gradients into `grad` (shaped like `net`) and
/// returns dLoss/dx.
inline VectorXd backward(const DenseNet& net, const ForwardCache& cache, const VectorXd& dy,
                         DenseNet& grad) {
  VectorXd d = dy;
  for (std::size_t i = net.layers.size(); i-- > 0;) {
    const auto& l = net.layers[i];
    const VectorXd dPre = activationBackward(l.activation, cache.preacts[i], cache.outputs[i], d);
    grad.layers[i].weight.noalias() += dPre * cache.inputs[i].transpose();
    grad.layers[i].bias += dPre;
    d = l.weight.transpose() * dPre;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Gaussian latent

struct GaussianLatent {
  VectorXd mu;
  VectorXd logSigma;
};

/// KL(N(mu, sigma^2) || N(0, I)).
inline double klStandardNormal(const GaussianLatent& z) {
  const auto ls = z.logSigma.array();
  return 0.5 * (z.mu.array().square() + (2.0 * ls).exp() - 1.0 - 2.0 * ls).sum();
}

/// Adds scale * dKL/d(mu, logSigma).
inline void klGradient(const GaussianLatent& z, double scale, VectorXd& dMu, VectorXd& dLogSigma) {
  dMu += scale * z.mu;
  dLogSigma += scale * ((2.0 * z.logSigma.array()).exp() - 1.0).matrix();
}

inline VectorXd reparameterize(const GaussianLatent& z, const VectorXd& eps) {
  if (eps.size() != z.mu.size()) throw Error(Errc::DimMismatch, "noise length differs from latent");
  return z.mu + (z.logSigma.array().exp() * eps.array()).matrix();
}

inline VectorXd standardNormal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamOptions {
  double learningRate = 1e-3;
  int totalEpochs = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  AdamOptions options;
  std::vector<VectorXd> m;
  std::vector<VectorXd> v;
  long step = 0;

  static OptimizerState create(std::span<const TensorRef> params, AdamOptions opts) {
    OptimizerState s;
    s.options = opts;
    for (const auto& p : params) {
      s.m.push_back(VectorXd::Zero(p.size()));
      s.v.push_back(VectorXd::Zero(p.size()));
    }
    return s;
  }

  /// Learning rate for a 0-based epoch: decays linearly to zero at totalEpochs.
  double rateAt(int epoch) const {
    const double frac = static_cast<double>(epoch) / std::max(1, options.totalEpochs);
    return options.learningRate * std::max(0.0, 1.0 - frac);
  }
};

inline void adamStep(OptimizerState& opt, std::span<const TensorRef> params,
                     std::span<const TensorRef> grads, int epoch) {
  if (params.size() != grads.size() || params.size() != opt.m.size()) {
    throw Error(Errc::DimMismatch, "optimizer, parameter and gradient lists differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].size() != params[i].size() || opt.m[i].size() != params[i].size()) {
      throw Error(Errc::DimMismatch, "gradient shape differs for " + params[i].name);
    }
    if (!grads[i].vec().allFinite()) {
      throw Error(Errc::NonFiniteGradient, "non-finite gradient in " + params[i].name);
    }
  }
  const auto& o = opt.options;
  ++opt.step;
  const double lr = opt.rateAt(epoch);
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(opt.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = grads[i].vec();
    auto p = params[i].vec();
    opt.m[i] = o.beta1 * opt.m[i] + (1.0 - o.beta1) * g;
    opt.v[i] = o.beta2 * opt.v[i] + (1.0 - o.beta2) * g.cwiseAbs2();
    if (lr == 0.0) continue;
    p.array() -= lr * (opt.m[i].array() / c1) / ((opt.v[i].array() / c2).sqrt() + o.epsilon);
  }
}

// ---------------------------------------------------------------------------
// Checkpoints: <path>.json manifest + <path>.bin little-endian float32 payload.

namespace detail {

inline void putFloatLE(std::vector<char>& buf, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
  char b[4];
  std::memcpy(b, &u, 4);
  buf.insert(buf.end(), b, b + 4);
}

inline float getFloatLE(const char* p) {
  std::uint32_t u;
  std::memcpy(&u, p, 4);
  if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

inline std::vector<char> readAll(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void writeAll(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  out << text;
}

inline void writeAll(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace detail

/// Writes `manifest` (plus a "tensors" table) and the float32 payload.
inline void writeCheckpoint(const std::string& path, nlohmann::json manifest,
                            std::span<const TensorRef> tensors) {
  std::vector<char> payload;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& t : tensors) {
    table.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}},
                     {"offset", payload.size()}});
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      detail::putFloatLE(payload, static_cast<float>(t.data[i]));
    }
  }
  manifest["tensors"] = table;
  manifest["payloadBytes"] = payload.size();
  manifest["format"] = "f32le";
  detail::writeAll(path + ".json", manifest.dump(2) + "\n");
  detail::writeAll(path + ".bin", payload);
}

inline nlohmann::json readCheckpointManifest(const std::string& path) {
  const auto bytes = detail::readAll(path + ".json");
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptHeader, path + ".json: " + e.what());
  }
}

/// Fills `tensors` from the payload; names and shapes must match the manifest.
inline void readCheckpointPayload(const std::string& path, const nlohmann::json& manifest,
                                  std::span<const TensorRef> tensors) {
  const auto payload = detail::readAll(path + ".bin");
  try {
    const auto& table = manifest.at("tensors");
    if (table.size() != tensors.size()) {
      throw Error(Errc::CorruptHeader, "checkpoint tensor count differs from the model");
    }
    if (manifest.at("payloadBytes").get<std::size_t>() != payload.size()) {
      throw Error(Errc::LengthMismatch, "checkpoint payload size differs from the manifest");
    }
    for (std::size_t k = 0; k < tensors.size(); ++k) {
      const auto& e = table[k];
      const auto& t = tensors[k];
      if (e.at("name").get<std::string>() != t.name ||
          e.at("shape").at(0).get<Eigen::Index>() != t.rows ||
          e.at("shape").at(1).get<Eigen::Index>() != t.cols) {
        throw Error(Errc::CorruptHeader, "checkpoint tensor mismatch at " + t.name);
      }
      const auto offset = e.at("offset").get<std::size_t>();
      if (offset + 4 * static_cast<std::size_t>(t.size()) > payload.size()) {
        throw Error(Errc::LengthMismatch, "checkpoint payload truncated at " + t.name);
      }
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        t.data[i] = detail::getFloatLE(payload.data() + offset + 4 * i);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptHeader, path + ".json: " + e.what());
  }
}

}  // namespace scenemotion

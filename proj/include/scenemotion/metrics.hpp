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

// Evaluation metrics: pairwise diversity, Frechet distance, execution time,
// goal precision and penetration rate.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "scenemotion/error.hpp"
#include "scenemotion/kinematics.hpp"
#include "scenemotion/state.hpp"
#include "scenemotion/voxel.hpp"

namespace scenemotion {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// jp, jr, jv of one state (width 12j).
inline VectorXd poseFeature(const CharacterState& s) {
  const auto j = static_cast<Eigen::Index>(s.jp.size());
  VectorXd v(12 * j);
  Eigen::Index o = 0;
  for (const auto& p : s.jp) v.segment<3>(o) = p, o += 3;
  for (const auto& r : s.jr)
    for (double x : r.v) v[o++] = x;
  for (const auto& p : s.jv) v.segment<3>(o) = p, o += 3;
  return v;
}

/// Pose feature followed by the goal-relative trajectory (width 12j + 4t).
inline VectorXd featureSubset(const CharacterState& s) {
  const VectorXd pose = poseFeature(s);
  const auto t = static_cast<Eigen::Index>(s.tpGoal.size());
  VectorXd v(pose.size() + 4 * t);
  v.head(pose.size()) = pose;
  Eigen::Index o = pose.size();
  for (const auto& p : s.tpGoal) v.segment<2>(o) = p, o += 2;
  for (const auto& d : s.tdGoal) v.segment<2>(o) = d, o += 2;
  return v;
}

/// Mean squared distance over ordered pairs of distinct frames.
inline double apd(std::span<const VectorXd> frames) {
  const std::size_t n = frames.size();
  if (n < 2) throw Error(Errc::TooFewFrames, "diversity needs at least two frames");
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 1; k < n; ++k) {
      if (frames[i].size() != frames[k].size()) throw Error(Errc::DimMismatch, "feature widths differ");
      sum += 2.0 * (frames[i] - frames[k]).squaredNorm();
    }
  }
  return sum / (static_cast<double>(n) * static_cast<double>(n - 1));
}

struct GoalDiversity {
  double position = 0;  // m
  double rotation = 0;  // rad
};

/// Goal diversity over L objects with N goals each.
inline GoalDiversity apdGoals(const std::vector<std::vector<Goal>>& perObject) {
  if (perObject.empty()) throw Error(Errc::TooFewGoals, "no objects");
  const std::size_t n = perObject.front().size();
  if (n < 2) throw Error(Errc::TooFewGoals, "goal diversity needs at least two goals per object");
  GoalDiversity d;
  for (const auto& goals : perObject) {
    if (goals.size() != n) throw Error(Errc::TooFewGoals, "every object needs the same goal count");
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        if (i == k) continue;
        d.position += (goals[i].position - goals[k].position).norm();
        const double c = goals[i].direction.normalized().dot(goals[k].direction.normalized());
        d.rotation += std::acos(std::clamp(c, -1.0, 1.0));
      }
    }
  }
  const double norm = static_cast<double>(perObject.size() * n * (n - 1));
  d.position /= norm;
  d.rotation /= norm;
  return d;
}

// ---------------------------------------------------------------------------
// Frechet distance

struct GaussianMoments {
  VectorXd mean;
  MatrixXd cov;
};

inline constexpr double kCovarianceShrinkage = 1e-6;

/// Sample mean and unbiased covariance; adds kCovarianceShrinkage * I when
/// there are no more samples than dimensions.
inline GaussianMoments fitGaussian(std::span<const VectorXd> xs) {
  if (xs.size() < 2) throw Error(Errc::DegenerateCovariance, "need at least two samples");
  const Eigen::Index d = xs.front().size();
  GaussianMoments m{VectorXd::Zero(d), MatrixXd::Zero(d, d)};
  for (const auto& x : xs) {
    if (x.size() != d) throw Error(Errc::DimMismatch, "feature widths differ");
    m.mean += x;
  }
  m.mean /= static_cast<double>(xs.size());
  for (const auto& x : xs) {
    const VectorXd c = x - m.mean;
    m.cov.noalias() += c * c.transpose();
  }
  m.cov /= static_cast<double>(xs.size() - 1);
  if (static_cast<Eigen::Index>(xs.size()) <= d) m.cov.diagonal().array() += kCovarianceShrinkage;
  if (!m.cov.allFinite()) throw Error(Errc::DegenerateCovariance, "non-finite covariance");
  return m;
}

namespace detail {

inline MatrixXd symmetricSqrt(const MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (a + a.transpose()));
  if (es.info() != Eigen::Success) throw Error(Errc::DegenerateCovariance, "eigensolver failed");
  const VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

inline double frechetFromMoments(const GaussianMoments& a, const GaussianMoments& b) {
  if (a.mean.size() != b.mean.size()) throw Error(Errc::DimMismatch, "moment widths differ");
  const MatrixXd s1 = detail::symmetricSqrt(a.cov);
  const MatrixXd m = s1 * b.cov * s1;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error(Errc::DegenerateCovariance, "eigensolver failed");
  const double cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * cross;
  return std::max(0.0, d);
}

inline double frechetDistance(std::span<const VectorXd> a, std::span<const VectorXd> b) {
  return frechetFromMoments(fitGaussian(a), fitGaussian(b));
}

// ---------------------------------------------------------------------------
// Execution, precision, penetration

inline constexpr double kExecutionPersistSeconds = 1.0;
inline constexpr double kExecutionCapSeconds = 180.0;

/// Action weights at the current frame of a state.
inline VectorXd currentActions(const CharacterState& s) {
  return s.ta.row(s.ta.rows() / 2).transpose();
}

/// Seconds until `target` becomes the argmax action and stays so for a full
/// persistence window; +infinity if that never happens within the cap.
inline double executionTime(std::span<const VectorXd> actions, Action target, double fps,
                            double persistSeconds = kExecutionPersistSeconds,
                            double capSeconds = kExecutionCapSeconds) {
  const auto persist = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(persistSeconds * fps)));
  const auto cap = std::min(actions.size(), static_cast<std::size_t>(std::lround(capSeconds * fps)));
  const auto ti = static_cast<Eigen::Index>(target);
  std::size_t run = 0;
  for (std::size_t i = 0; i < cap; ++i) {
    Eigen::Index arg = 0;
    actions[i].maxCoeff(&arg);
    run = arg == ti ? run + 1 : 0;
    if (run == persist) return static_cast<double>(i + 1 - persist) / fps;
  }
  return std::numeric_limits<double>::infinity();
}

struct Precision {
  double position = 0;  // m, planar
  double rotation = 0;  // degrees
};

inline Precision precision(const RootTransform& root, const Goal& goal, double executionSeconds) {
  if (!std::isfinite(executionSeconds)) throw Error(Errc::NotExecuted, "action was never executed");
  Precision p;
  p.position = (root.position - Vec2(goal.position.x(), goal.position.z())).norm();
  const Vec2 gd = normalizedOr(Vec2(goal.direction.x(), goal.direction.z()), Vec2(0, 1));
  const double c = std::clamp(root.forward.normalized().dot(gd), -1.0, 1.0);
  p.rotation = std::acos(c) * 180.0 / std::numbers::pi;
  return p;
}

inline constexpr double kJointProxyRadius = 0.05;

/// Percentage of frames where a joint sphere overlaps an object other than
/// `targetId`.
inline double penetrationPct(const std::vector<std::vector<Vec3>>& jointFrames, const Scene& scene,
                             std::string_view targetId = {}, double radius = kJointProxyRadius) {
  if (jointFrames.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& joints : jointFrames) {
    bool hit = false;
    for (const auto& obj : scene.objects) {
      if (!targetId.empty() && obj.id == targetId) continue;
      for (const auto& p : joints) {
        if (obj.distanceWorld(p) < radius) {
          hit = true;
          break;
        }
      }
      if (hit) break;
    }
    hits += hit ? 1 : 0;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(jointFrames.size());
}

// ---------------------------------------------------------------------------
// Reports

/// Experiment name -> metric name -> value. Infinite values are written as
/// null in JSON and "inf" in CSV.
using Report = std::map<std::string, std::map<std::string, double>>;

inline nlohmann::json reportToJson(const Report& r) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [exp, metrics] : r) {
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [k, v] : metrics) m[k] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json();
    j[exp] = m;
  }
  return j;
}

inline std::string reportToCsv(const Report& r) {
  std::vector<std::string> cols;
  for (const auto& [exp, metrics] : r)
    for (const auto& [k, v] : metrics)
      if (std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);
  std::sort(cols.begin(), cols.end());
  std::ostringstream os;
  os.precision(10);
  os << "experiment";
  for (const auto& c : cols) os << ',' << c;
  os << '\n';
  for (const auto& [exp, metrics] : r) {
    os << exp;
    for (const auto& c : cols) {
      os << ',';
      const auto it = metrics.find(c);
      if (it == metrics.end()) continue;
      if (std::isfinite(it->second)) {
        os << it->second;
      } else {
        os << "inf";
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace scenemotion

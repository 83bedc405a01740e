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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scenemotion {

enum class Errc {
  DegenerateRotation,
  NotARotation,
  LengthMismatch,
  NonIntegerStride,
  InsufficientHistory,
  InvalidConfig,
  EmptyObject,
  DimMismatch,
  NonFiniteGradient,
  WeightsNotNormalized,
  NonFiniteOutput,
  ZeroDirection,
  DegenerateScene,
  Unreachable,
  BlockedStart,
  NoGoal,
  CorruptHeader,
  EmptyDataset,
  TooFewFrames,
  TooFewGoals,
  DegenerateCovariance,
  NotExecuted,
  UnknownObject,
  UnsupportedAction,
  Io,
};

constexpr std::string_view errcName(Errc code) {
  switch (code) {
    case Errc::DegenerateRotation: return "DegenerateRotation";
    case Errc::NotARotation: return "NotARotation";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::NonIntegerStride: return "NonIntegerStride";
    case Errc::InsufficientHistory: return "InsufficientHistory";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::EmptyObject: return "EmptyObject";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::NonFiniteGradient: return "NonFiniteGradient";
    case Errc::WeightsNotNormalized: return "WeightsNotNormalized";
    case Errc::NonFiniteOutput: return "NonFiniteOutput";
    case Errc::ZeroDirection: return "ZeroDirection";
    case Errc::DegenerateScene: return "DegenerateScene";
    case Errc::Unreachable: return "Unreachable";
    case Errc::BlockedStart: return "BlockedStart";
    case Errc::NoGoal: return "NoGoal";
    case Errc::CorruptHeader: return "CorruptHeader";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::TooFewFrames: return "TooFewFrames";
    case Errc::TooFewGoals: return "TooFewGoals";
    case Errc::DegenerateCovariance: return "DegenerateCovariance";
    case Errc::NotExecuted: return "NotExecuted";
    case Errc::UnknownObject: return "UnknownObject";
    case Errc::UnsupportedAction: return "UnsupportedAction";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI, the session service) can map it without parsing text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errcName(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace scenemotion

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

#include "scenemotion/augment.hpp"
#include "scenemotion/contact.hpp"
#include "scenemotion/dataset.hpp"
#include "scenemotion/error.hpp"
#include "scenemotion/goal_net.hpp"
#include "scenemotion/kinematics.hpp"
#include "scenemotion/metrics.hpp"
#include "scenemotion/motion_net.hpp"
#include "scenemotion/nn.hpp"
#include "scenemotion/planner.hpp"
#include "scenemotion/runtime.hpp"
#include "scenemotion/server.hpp"
#include "scenemotion/state.hpp"
#include "scenemotion/voxel.hpp"

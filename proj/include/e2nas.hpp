// Copyright 2026 The e2nas Authors
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

#include "e2nas/binary_io.hpp"
#include "e2nas/config.hpp"
#include "e2nas/errors.hpp"
#include "e2nas/evaluator.hpp"
#include "e2nas/external_evaluator.hpp"
#include "e2nas/genotype.hpp"
#include "e2nas/mdp_env.hpp"
#include "e2nas/nn.hpp"
#include "e2nas/orchestrator.hpp"
#include "e2nas/protocol.hpp"
#include "e2nas/random.hpp"
#include "e2nas/replay_buffer.hpp"
#include "e2nas/sac_agent.hpp"
#include "e2nas/surrogate.hpp"

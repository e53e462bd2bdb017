/*
 Copyright 2026 The fsn-lq Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include "fsn/common.hpp"
#include "fsn/game_model.hpp"
#include "fsn/lcp.hpp"
#include "fsn/stage_game.hpp"
#include "fsn/pfs_recursion.hpp"
#include "fsn/lcp_assembly.hpp"
#include "fsn/fsn_solver.hpp"
#include "fsn/duopoly.hpp"
#include "fsn/game_io.hpp"
#include "fsn/oracle.hpp"

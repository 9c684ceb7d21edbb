// Copyright 2026 The tgbs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string_view>

#include "tgbs/errors.hpp"
#include "tgbs/estimator.hpp"
#include "tgbs/exact.hpp"
#include "tgbs/fit.hpp"
#include "tgbs/instance_io.hpp"
#include "tgbs/linalg.hpp"
#include "tgbs/model.hpp"
#include "tgbs/moments.hpp"
#include "tgbs/parallel.hpp"
#include "tgbs/partition.hpp"
#include "tgbs/rng.hpp"

#ifndef TGBS_VERSION
#define TGBS_VERSION "0.1.0"
#endif

namespace tgbs {

inline constexpr std::string_view kVersion = TGBS_VERSION;

}  // namespace tgbs

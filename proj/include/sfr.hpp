// Copyright 2026 The SFR Authors
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

/// \file
/// Umbrella header.

#ifndef SFR_HPP
#define SFR_HPP

#include "sfr/cl.hpp"
#include "sfr/data.hpp"
#include "sfr/error.hpp"
#include "sfr/io.hpp"
#include "sfr/kernel.hpp"
#include "sfr/likelihood.hpp"
#include "sfr/linalg.hpp"
#include "sfr/metrics.hpp"
#include "sfr/nn.hpp"
#include "sfr/random.hpp"
#include "sfr/sfr.hpp"

#endif  // SFR_HPP

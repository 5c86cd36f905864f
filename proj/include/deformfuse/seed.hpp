// Copyright 2026 The deformfuse Authors
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

#include <cstdint>

namespace deformfuse {

/// Independent sub-streams of one master seed.
enum class SeedStream : std::uint64_t {
  kScene = 1,
  kDatabase = 2,
  kAugment = 3,
  kParams = 4,
  kDropout = 5,
  kBench = 6,
  kSelftest = 7,
};

/// Counter-based derivation: splitmix64(master + stream * 0x9E3779B97F4A7C15).
std::uint64_t derive_seed(std::uint64_t master, SeedStream stream);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter);

}  // namespace deformfuse

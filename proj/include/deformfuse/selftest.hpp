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
#include <string>
#include <vector>

namespace deformfuse {

struct SelftestOptions {
  std::uint64_t seed = 0;
  /// "" for none; "offset-grad" corrupts the analytic offset_net gradient.
  std::string inject_fault;
};

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SelftestReport {
  std::vector<SelftestCheck> checks;

  bool all_passed() const;
  /// One line per check; deterministic for a fixed seed.
  std::string table() const;
};

SelftestReport run_selftest(const SelftestOptions& options);

}  // namespace deformfuse

// Copyright 2026 The duotrack Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "duotrack/core/log.hpp"

#include <atomic>
#include <iostream>

namespace duotrack {

namespace {
std::atomic<bool> g_quiet{false};
}

void set_quiet(bool quiet) { g_quiet = quiet; }

void log_info(std::string_view msg) {
  if (!g_quiet) std::cerr << "[info] " << msg << '\n';
}

void log_warning(std::string_view msg) { std::cerr << "[warn] " << msg << '\n'; }

}  // namespace duotrack

// Copyright 2026 The cmprof Authors.
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

#include <vector>

#include "trace_model.hpp"

namespace cmprof::testing {

// Two threads on two cpus: tid 1 runs [0,300); tid 2 runs [0,100), blocks,
// is woken at 150 and runs again [200,300). Same content as
// tests/data/trace_a.jsonl.
inline std::vector<TraceEvent> trace_a() {
  return {
      TaskNew{0, 1, "a"},
      TaskNew{0, 2, "b"},
      SchedSwitch{0, 0, 0, PrevState::kRunnable, 1, {}},
      SchedSwitch{0, 1, 0, PrevState::kRunnable, 2, {}},
      SchedSwitch{100, 1, 2, PrevState::kBlocked, 0, {}},
      SchedWakeup{150, 2},
      SchedSwitch{200, 1, 0, PrevState::kRunnable, 2, {}},
      SchedSwitch{300, 0, 1, PrevState::kBlocked, 0, {}},
      SchedSwitch{300, 1, 2, PrevState::kBlocked, 0, {}},
      TaskExit{300, 1},
      TaskExit{300, 2},
  };
}

}  // namespace cmprof::testing

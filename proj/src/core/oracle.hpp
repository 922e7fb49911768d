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

// Reference CMetric computed straight from the definition: every instant at
// which an event occurs is an interval boundary, and each interval of length
// T with n active application threads adds T/n to every thread on-CPU during
// it. Deliberately shares no state or code with the incremental engine.

#include <map>
#include <span>
#include <vector>

#include "trace_model.hpp"

namespace cmprof {

// Throws Error(kConsistency) on the same impossible transitions as the engine.
std::map<Tid, double> oracle_cmetric(std::span<const TraceEvent> events);

struct CmetricMismatch {
  Tid tid = 0;
  double expected = 0.0;
  double actual = 0.0;
};

// Per-thread comparison; a tid missing on one side counts as 0.
std::vector<CmetricMismatch> compare_cmetrics(
    const std::map<Tid, double>& expected, const std::map<Tid, double>& actual,
    double relative_tolerance);

}  // namespace cmprof

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

// Deterministic scheduler-trace generator with known bottleneck ground truth.
//
// Scenarios (tids are 1..threads, tid 1 is the serial thread where one exists):
//
//   SERIAL_PHASE  per round, every thread runs parallel_work for `parallel_ns`,
//                 then tid 1 runs serial_work for `serial_ns` while the others
//                 wait BLOCKED. Requires threads <= cpus.
//   BALANCED      per round, every thread runs parallel_work for
//                 `parallel_ns`. Requires threads <= cpus.
//   LOCK_CONVOY   per round, every thread runs parallel_work for `parallel_ns`
//                 (in waves of `cpus`) up to a barrier, then the threads pass
//                 one by one through critical_section (`critical_ns`) while
//                 the rest wait BLOCKED. parallel_ns may be 0.
//   PIPELINE      `items` work items flow through stages with
//                 `stage_threads[s]` threads each taking `stage_service_ns[s]`
//                 per item; a thread whose input queue is empty blocks.
//
// Context switches are zero-width. Samples are emitted every sample_period
// for each on-CPU thread with an ip inside the function it is executing; the
// seed only drives the choice of ip within that function.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "replay.hpp"
#include "trace_model.hpp"

namespace cmprof {

enum class ScenarioKind { kSerialPhase, kLockConvoy, kPipeline, kBalanced };

std::string_view scenario_name(ScenarioKind kind);
// Accepts "serial", "convoy", "pipeline", "balanced" (and the long
// serial-phase / lock-convoy spellings). Throws Error(kInvalidArgument).
ScenarioKind parse_scenario_kind(std::string_view name);

struct Scenario {
  ScenarioKind kind = ScenarioKind::kSerialPhase;
  std::uint32_t threads = 4;
  std::uint32_t cpus = 0;  // 0: one per thread
  std::uint64_t seed = 1;
  Nanos sample_period = 3'000'000;
  Nanos parallel_ns = 100'000;
  Nanos serial_ns = 400'000;
  Nanos critical_ns = 10'000;
  std::uint32_t rounds = 1;
  std::vector<std::uint32_t> stage_threads;
  std::vector<Nanos> stage_service_ns;
  std::uint32_t items = 100;
  // Threshold the ground truth's trigger decisions are evaluated with.
  NminPolicy truth_nmin = NminPolicy::half_total();
  std::uint32_t stack_depth = 16;

  // Per-kind defaults (LOCK_CONVOY: parallel_ns 0, 3 rounds; PIPELINE:
  // stages 1,4,1 at 50 us).
  static Scenario defaults(ScenarioKind kind);

  std::uint32_t thread_count() const;
  std::uint32_t cpu_count() const { return cpus == 0 ? thread_count() : cpus; }

  // Throws Error(kInvalidArgument).
  void validate() const;
};

struct GroundTruth {
  std::map<Tid, double> cmetric;  // per thread, ns
  std::uint64_t total_slices = 0;
  std::uint64_t critical_slices = 0;
  double cr = 0.0;
  std::vector<Address> top_path;  // empty when nothing triggers
  std::string top_function;
};

struct SynthOutput {
  std::vector<TraceEvent> trace;
  SymbolMap symbols;
  GroundTruth truth;
};

SynthOutput generate(const Scenario& scenario);

// Per-thread CMetric from the scenario's closed form. Defined for
// SERIAL_PHASE, BALANCED and LOCK_CONVOY; throws Error(kInvalidArgument) for
// PIPELINE, whose truth comes from integrating the generated schedule.
std::map<Tid, double> closed_form_cmetric(const Scenario& scenario);

std::string truth_to_json(const Scenario& scenario, const GroundTruth& truth);

// Writes <prefix>.jsonl, <prefix>.sym and <prefix>.truth.json.
void write_synth_files(const Scenario& scenario, const SynthOutput& out,
                       const std::filesystem::path& prefix);

}  // namespace cmprof

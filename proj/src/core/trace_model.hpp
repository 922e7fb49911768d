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

// Event vocabulary shared by every stage of the analyzer, plus the JSON Lines
// trace and symbol-map file formats.
//
// Trace file: an optional "#cmprof-trace v1" header line followed by one JSON
// object per line. Keys are emitted as ev, ts, then the per-kind fields:
//
//   new     tid, comm
//   exit    tid
//   switch  cpu, prev, prev_state ("R" | "B"), next, [stack]
//   wakeup  tid
//   sample  tid, ip
//
// All timestamps are integer nanoseconds on one monotonic clock. tid 0 is
// reserved for idle/foreign work. Addresses are unsigned 64-bit integers.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cmprof {

using Tid = std::uint32_t;
using Nanos = std::int64_t;
using Address = std::uint64_t;

inline constexpr Tid kIdleTid = 0;
inline constexpr std::string_view kTraceHeader = "#cmprof-trace v1";

enum class PrevState : std::uint8_t {
  kRunnable,  // preempted, still TASK_RUNNING
  kBlocked,   // any inactive state
};

struct TaskNew {
  Nanos ts = 0;
  Tid tid = 0;
  std::string comm;
  bool operator==(const TaskNew&) const = default;
};

struct TaskExit {
  Nanos ts = 0;
  Tid tid = 0;
  bool operator==(const TaskExit&) const = default;
};

struct SchedSwitch {
  Nanos ts = 0;
  std::uint32_t cpu = 0;
  Tid prev_tid = 0;
  PrevState prev_state = PrevState::kRunnable;
  Tid next_tid = 0;
  // Top of stack first, as captured when prev was switched out.
  std::optional<std::vector<Address>> prev_stack;
  bool operator==(const SchedSwitch&) const = default;
};

struct SchedWakeup {
  Nanos ts = 0;
  Tid tid = 0;
  bool operator==(const SchedWakeup&) const = default;
};

struct Sample {
  Nanos ts = 0;
  Tid tid = 0;
  Address ip = 0;
  bool operator==(const Sample&) const = default;
};

using TraceEvent =
    std::variant<TaskNew, TaskExit, SchedSwitch, SchedWakeup, Sample>;

Nanos event_time(const TraceEvent& ev);
std::string_view event_tag(const TraceEvent& ev);

// Parses one JSONL record. `line_number` is only used in error messages.
// Throws Error(kParse).
TraceEvent parse_event(std::string_view line, std::size_t line_number = 1);

// Byte-stable single-line encoding; parse_event(serialize_event(e)) == e.
std::string serialize_event(const TraceEvent& ev);

// Reads a whole trace. Blank lines and '#' comment lines are skipped; a
// header naming a version other than v1 is rejected.
std::vector<TraceEvent> parse_trace(std::istream& in);
std::vector<TraceEvent> read_trace_file(const std::filesystem::path& path);

void write_trace(std::ostream& out, std::span<const TraceEvent> events);
void write_trace_file(const std::filesystem::path& path,
                      std::span<const TraceEvent> events);

struct TraceStats {
  std::uint64_t new_count = 0;
  std::uint64_t exit_count = 0;
  std::uint64_t switch_count = 0;
  std::uint64_t wakeup_count = 0;
  std::uint64_t sample_count = 0;
  std::set<Tid> app_tids;
  Nanos first_ts = 0;
  Nanos last_ts = 0;
  // Non-fatal observations, e.g. a wakeup for a thread that is already active.
  std::vector<std::string> notes;

  Nanos span() const { return last_ts - first_ts; }
  std::uint64_t event_count() const {
    return new_count + exit_count + switch_count + wakeup_count + sample_count;
  }
};

// Checks timestamp monotonicity and application-thread lifecycles. Throws
// Error(kValidation) naming the first offending event index.
TraceStats validate_trace(std::span<const TraceEvent> events);

struct SymbolEntry {
  Address start = 0;
  Address end = 0;  // exclusive
  std::string function;
  std::string file;
  std::uint32_t line = 1;
  bool operator==(const SymbolEntry&) const = default;
};

// Immutable address-range table, sorted by start and non-overlapping.
class SymbolMap {
 public:
  SymbolMap() = default;
  // Sorts the entries; throws Error(kValidation) on empty or overlapping
  // ranges and on line 0.
  explicit SymbolMap(std::vector<SymbolEntry> entries);

  std::span<const SymbolEntry> entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<SymbolEntry> entries_;
};

SymbolEntry parse_symbol_entry(std::string_view line,
                               std::size_t line_number = 1);
std::string serialize_symbol_entry(const SymbolEntry& entry);
SymbolMap parse_symbol_map(std::istream& in);
SymbolMap read_symbol_file(const std::filesystem::path& path);
void write_symbol_map(std::ostream& out, const SymbolMap& map);
void write_symbol_file(const std::filesystem::path& path, const SymbolMap& map);

}  // namespace cmprof

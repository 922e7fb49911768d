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

// Offline replay of a scheduler trace. EngineState mirrors the per-probe maps
// of a live context-switch profiler (thread list, active/total counts, the
// cumulative criticality sum and per-thread snapshots); apply_event() is the
// probe logic driven by trace events instead of tracepoints.
//
// CMetric accrues only while a thread is on-CPU: a timeslice's CMetric is the
// difference of the cumulative sum Σ T_i/n_i between switch-out and switch-in,
// where n_i counts every active (runnable or running) application thread.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "trace_model.hpp"

namespace cmprof {

enum class ThreadState : std::uint8_t { kInactive, kRunnable, kRunning };

enum class Provenance : std::uint8_t {
  kSample,    // instruction pointer from the periodic sampler
  kStackTop,  // top stack address substituted for a slice with no samples
};

// Parallelism threshold N_min. Held doubled so that n/2 compares exactly.
class NminPolicy {
 public:
  enum class Mode : std::uint8_t { kFixed, kHalfTotal };

  static NminPolicy fixed(std::uint32_t value) {
    return NminPolicy(Mode::kFixed, value);
  }
  static NminPolicy half_total() { return NminPolicy(Mode::kHalfTotal, 0); }

  Mode mode() const { return mode_; }
  std::uint32_t fixed_value() const { return value_; }

  // 2 * N_min given the current number of live application threads.
  std::int64_t doubled(std::int64_t total_count) const {
    return mode_ == Mode::kFixed ? 2 * static_cast<std::int64_t>(value_)
                                 : total_count;
  }
  double value(std::int64_t total_count) const {
    return static_cast<double>(doubled(total_count)) / 2.0;
  }

  bool operator==(const NminPolicy&) const = default;

 private:
  NminPolicy(Mode mode, std::uint32_t value) : mode_(mode), value_(value) {}
  Mode mode_;
  std::uint32_t value_;
};

struct Config {
  NminPolicy nmin = NminPolicy::half_total();
  std::uint32_t stack_depth = 16;
  Nanos sample_period = 3'000'000;

  // Throws Error(kInvalidArgument).
  void validate() const;
};

struct SampleRef {
  Address ip = 0;
  Provenance provenance = Provenance::kSample;
  Nanos ts = 0;
  bool operator==(const SampleRef&) const = default;
};

struct TimesliceRecord {
  std::uint64_t ts_id = 0;
  Tid tid = 0;
  Nanos t_in = 0;
  Nanos t_out = 0;
  double cmetric = 0.0;
  double threads_av = 0.0;
  bool triggered = false;
  std::vector<Address> stack;
  std::vector<SampleRef> samples;
  std::int64_t thread_count_at_switchout = 0;
  bool operator==(const TimesliceRecord&) const = default;
};

// Running sum kept as an unevaluated pair (hi + lo) so that the difference of
// two nearby prefixes keeps full precision even when the sum itself is large.
class CompensatedSum {
 public:
  void add(double x) {
    double s = hi_ + x;
    double bp = s - hi_;
    lo_ += (hi_ - (s - bp)) + (x - bp);
    hi_ = s;
  }
  double value() const { return hi_ + lo_; }
  friend double operator-(const CompensatedSum& a, const CompensatedSum& b) {
    return (a.hi_ - b.hi_) + (a.lo_ - b.lo_);
  }

 private:
  double hi_ = 0.0;
  double lo_ = 0.0;
};

struct ThreadSnapshot {
  ThreadState state = ThreadState::kInactive;
  CompensatedSum local_cm;
  std::int64_t local_nt = 0;
  Nanos t_in = 0;
  std::vector<SampleRef> pending_samples;
};

struct EngineState {
  std::unordered_map<Tid, ThreadSnapshot> threads;  // live app threads
  std::int64_t thread_count = 0;  // runnable + running
  std::int64_t total_count = 0;   // live
  Nanos t_switch = 0;
  CompensatedSum global_cm;  // Σ T_i / n_i over intervals with n_i >= 1
  std::int64_t global_nt = 0;  // Σ T_i * n_i, exact
  std::map<Tid, double> cm_hash;
  std::uint64_t ts_counter = 0;

  const ThreadSnapshot* find(Tid tid) const {
    auto it = threads.find(tid);
    return it == threads.end() ? nullptr : &it->second;
  }
};

// Closes the interval [t_switch, t).
void advance_interval(EngineState& state, Nanos t);

// Applies one event. Returns the timeslice closed by it, if any. Throws
// Error(kConsistency) for a switch-out of an application thread that is not
// running and for other impossible transitions; `event_index` is quoted in
// the message.
std::optional<TimesliceRecord> apply_event(EngineState& state,
                                           const TraceEvent& ev,
                                           const Config& cfg,
                                           std::size_t event_index = 0);

// Ends the running slice of `tid` at t_out. Accumulators must already be
// advanced to t_out. Leaves the thread's scheduling state untouched.
TimesliceRecord close_timeslice(
    EngineState& state, Tid tid, Nanos t_out,
    const std::optional<std::vector<Address>>& prev_stack, const Config& cfg);

struct ReplayStats {
  std::uint64_t total_slices = 0;
  std::uint64_t critical_slices = 0;
  double cr = 0.0;
  std::map<Tid, double> cm_hash;
  Nanos first_ts = 0;
  Nanos last_ts = 0;

  Nanos span() const { return last_ts - first_ts; }
};

struct ReplayResult {
  std::vector<TimesliceRecord> slices;
  ReplayStats stats;
};

// Single pass over a validated trace. Threads still running at the end are
// closed at the final timestamp in ascending tid order.
ReplayResult run_replay(std::span<const TraceEvent> events, const Config& cfg);

}  // namespace cmprof

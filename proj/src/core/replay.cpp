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

#include "replay.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "error.hpp"

namespace cmprof {

namespace {

[[noreturn]] void inconsistent(std::size_t index, std::string_view what) {
  throw Error(ErrorKind::kConsistency,
              fmt::format("event {}: {}", index, what));
}

bool is_active(ThreadState s) { return s != ThreadState::kInactive; }

}  // namespace

void Config::validate() const {
  if (nmin.mode() == NminPolicy::Mode::kFixed && nmin.fixed_value() < 1) {
    throw Error(ErrorKind::kInvalidArgument, "fixed N_min must be >= 1");
  }
  if (stack_depth < 1) {
    throw Error(ErrorKind::kInvalidArgument, "stack depth must be >= 1");
  }
  if (sample_period <= 0) {
    throw Error(ErrorKind::kInvalidArgument, "sample period must be positive");
  }
}

void advance_interval(EngineState& state, Nanos t) {
  Nanos dt = t - state.t_switch;
  if (dt > 0 && state.thread_count >= 1) {
    state.global_cm.add(static_cast<double>(dt) /
                        static_cast<double>(state.thread_count));
    state.global_nt += dt * state.thread_count;
  }
  state.t_switch = t;
}

TimesliceRecord close_timeslice(
    EngineState& state, Tid tid, Nanos t_out,
    const std::optional<std::vector<Address>>& prev_stack, const Config& cfg) {
  ThreadSnapshot& snap = state.threads.at(tid);

  TimesliceRecord rec;
  rec.ts_id = ++state.ts_counter;
  rec.tid = tid;
  rec.t_in = snap.t_in;
  rec.t_out = t_out;
  rec.thread_count_at_switchout = state.thread_count;

  const std::int64_t doubled_nmin = cfg.nmin.doubled(state.total_count);
  const Nanos duration = t_out - snap.t_in;
  if (duration <= 0) {
    rec.cmetric = 0.0;
    rec.threads_av = static_cast<double>(state.thread_count);
    rec.triggered = false;
  } else {
    rec.cmetric = std::max(0.0, state.global_cm - snap.local_cm);
    const std::int64_t nt = state.global_nt - snap.local_nt;
    rec.threads_av = static_cast<double>(nt) / static_cast<double>(duration);
    // threads_av < N_min, compared exactly as 2*nt < 2*N_min*duration.
    rec.triggered = 2 * nt < doubled_nmin * duration;
  }
  state.cm_hash[tid] += rec.cmetric;

  if (rec.triggered) {
    if (prev_stack) {
      const auto depth =
          std::min<std::size_t>(prev_stack->size(), cfg.stack_depth);
      rec.stack.assign(prev_stack->begin(), prev_stack->begin() + depth);
    }
    rec.samples = std::move(snap.pending_samples);
    if (rec.samples.empty() && 2 * state.thread_count <= doubled_nmin &&
        !rec.stack.empty()) {
      rec.samples.push_back({rec.stack.front(), Provenance::kStackTop, t_out});
    }
  }
  snap.pending_samples.clear();
  return rec;
}

std::optional<TimesliceRecord> apply_event(EngineState& state,
                                           const TraceEvent& ev,
                                           const Config& cfg,
                                           std::size_t event_index) {
  const Nanos ts = event_time(ev);
  if (ts < state.t_switch) {
    inconsistent(event_index, fmt::format("timestamp {} precedes {}", ts,
                                          state.t_switch));
  }
  advance_interval(state, ts);

  std::optional<TimesliceRecord> closed;

  if (const auto* sw = std::get_if<SchedSwitch>(&ev)) {
    if (sw->prev_tid != kIdleTid) {
      auto it = state.threads.find(sw->prev_tid);
      if (it != state.threads.end()) {
        if (it->second.state != ThreadState::kRunning) {
          inconsistent(event_index,
                       fmt::format("tid {} switched out but is not running",
                                   sw->prev_tid));
        }
        closed = close_timeslice(state, sw->prev_tid, ts, sw->prev_stack, cfg);
        if (sw->prev_state == PrevState::kRunnable) {
          it->second.state = ThreadState::kRunnable;
        } else {
          it->second.state = ThreadState::kInactive;
          --state.thread_count;
        }
      }
    }
    if (sw->next_tid != kIdleTid) {
      auto it = state.threads.find(sw->next_tid);
      if (it != state.threads.end()) {
        ThreadSnapshot& snap = it->second;
        if (snap.state == ThreadState::kRunning) {
          inconsistent(event_index,
                       fmt::format("tid {} switched in while already running",
                                   sw->next_tid));
        }
        if (snap.state == ThreadState::kInactive) ++state.thread_count;
        snap.state = ThreadState::kRunning;
        snap.local_cm = state.global_cm;
        snap.local_nt = state.global_nt;
        snap.t_in = ts;
        snap.pending_samples.clear();
      }
    }
  } else if (const auto* sample = std::get_if<Sample>(&ev)) {
    auto it = state.threads.find(sample->tid);
    if (it != state.threads.end() &&
        it->second.state == ThreadState::kRunning &&
        2 * state.thread_count < cfg.nmin.doubled(state.total_count)) {
      it->second.pending_samples.push_back(
          {sample->ip, Provenance::kSample, ts});
    }
  } else if (const auto* wake = std::get_if<SchedWakeup>(&ev)) {
    auto it = state.threads.find(wake->tid);
    if (it != state.threads.end() &&
        it->second.state == ThreadState::kInactive) {
      it->second.state = ThreadState::kRunnable;
      ++state.thread_count;
    }
  } else if (const auto* tn = std::get_if<TaskNew>(&ev)) {
    if (tn->tid == kIdleTid) {
      inconsistent(event_index, "TaskNew with reserved tid 0");
    }
    if (!state.threads.try_emplace(tn->tid).second) {
      inconsistent(event_index,
                   fmt::format("duplicate TaskNew for live tid {}", tn->tid));
    }
    ++state.total_count;
  } else if (const auto* te = std::get_if<TaskExit>(&ev)) {
    auto it = state.threads.find(te->tid);
    if (it == state.threads.end()) {
      inconsistent(event_index,
                   fmt::format("TaskExit for unknown tid {}", te->tid));
    }
    // A thread exiting on-CPU ends its slice here; the switch-out that
    // follows in a real trace then refers to a foreign tid.
    if (it->second.state == ThreadState::kRunning) {
      closed = close_timeslice(state, te->tid, ts, std::nullopt, cfg);
    }
    if (is_active(it->second.state)) --state.thread_count;
    state.threads.erase(it);
    --state.total_count;
  }
  return closed;
}

ReplayResult run_replay(std::span<const TraceEvent> events,
                        const Config& cfg) {
  cfg.validate();
  ReplayResult result;
  EngineState state;
  if (!events.empty()) {
    state.t_switch = event_time(events.front());
    result.stats.first_ts = state.t_switch;
  }
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (auto rec = apply_event(state, events[i], cfg, i)) {
      result.slices.push_back(std::move(*rec));
    }
  }

  const Nanos end = state.t_switch;
  result.stats.last_ts = end;
  std::vector<Tid> still_running;
  for (const auto& [tid, snap] : state.threads) {
    if (snap.state == ThreadState::kRunning) still_running.push_back(tid);
  }
  std::sort(still_running.begin(), still_running.end());
  for (Tid tid : still_running) {
    result.slices.push_back(close_timeslice(state, tid, end, std::nullopt, cfg));
  }

  ReplayStats& stats = result.stats;
  stats.total_slices = result.slices.size();
  stats.critical_slices = static_cast<std::uint64_t>(
      std::count_if(result.slices.begin(), result.slices.end(),
                    [](const TimesliceRecord& r) { return r.triggered; }));
  stats.cr = stats.total_slices == 0
                 ? 0.0
                 : static_cast<double>(stats.critical_slices) /
                       static_cast<double>(stats.total_slices);
  stats.cm_hash = std::move(state.cm_hash);
  return result;
}

}  // namespace cmprof

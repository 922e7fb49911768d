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

#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <fmt/format.h>

#include "error.hpp"

namespace cmprof {

namespace {

struct OracleThread {
  bool active = false;
  bool running = false;
};

}  // namespace

std::map<Tid, double> oracle_cmetric(std::span<const TraceEvent> events) {
  std::map<Tid, double> cmetric;
  std::unordered_map<Tid, OracleThread> live;
  std::vector<Tid> running;

  auto count_active = [&] {
    std::int64_t n = 0;
    for (const auto& [tid, t] : live) n += t.active ? 1 : 0;
    return n;
  };
  auto stop_running = [&](Tid tid) {
    running.erase(std::find(running.begin(), running.end(), tid));
    live[tid].running = false;
  };
  auto fail = [](std::size_t i, std::string_view what) {
    throw Error(ErrorKind::kConsistency, fmt::format("event {}: {}", i, what));
  };

  Nanos boundary = events.empty() ? 0 : event_time(events.front());
  for (std::size_t i = 0; i < events.size(); ++i) {
    const TraceEvent& ev = events[i];
    const Nanos ts = event_time(ev);
    if (ts < boundary) fail(i, "timestamp regression");
    if (ts > boundary && !running.empty()) {
      const std::int64_t n = count_active();
      const double share =
          static_cast<double>(ts - boundary) / static_cast<double>(n);
      for (Tid tid : running) cmetric[tid] += share;
    }
    boundary = ts;

    if (const auto* sw = std::get_if<SchedSwitch>(&ev)) {
      auto prev = live.find(sw->prev_tid);
      if (sw->prev_tid != kIdleTid && prev != live.end()) {
        if (!prev->second.running) {
          fail(i, fmt::format("tid {} switched out but is not running",
                              sw->prev_tid));
        }
        stop_running(sw->prev_tid);
        prev->second.active = sw->prev_state == PrevState::kRunnable;
      }
      auto next = live.find(sw->next_tid);
      if (sw->next_tid != kIdleTid && next != live.end()) {
        if (next->second.running) {
          fail(i, fmt::format("tid {} switched in while already running",
                              sw->next_tid));
        }
        next->second.active = true;
        next->second.running = true;
        running.push_back(sw->next_tid);
        cmetric.try_emplace(sw->next_tid, 0.0);
      }
    } else if (const auto* wake = std::get_if<SchedWakeup>(&ev)) {
      auto it = live.find(wake->tid);
      if (it != live.end()) it->second.active = true;
    } else if (const auto* tn = std::get_if<TaskNew>(&ev)) {
      if (tn->tid == kIdleTid || !live.try_emplace(tn->tid).second) {
        fail(i, fmt::format("invalid TaskNew for tid {}", tn->tid));
      }
    } else if (const auto* te = std::get_if<TaskExit>(&ev)) {
      auto it = live.find(te->tid);
      if (it == live.end()) {
        fail(i, fmt::format("TaskExit for unknown tid {}", te->tid));
      }
      if (it->second.running) stop_running(te->tid);
      live.erase(te->tid);
    }
  }
  return cmetric;
}

std::vector<CmetricMismatch> compare_cmetrics(
    const std::map<Tid, double>& expected, const std::map<Tid, double>& actual,
    double relative_tolerance) {
  std::map<Tid, std::pair<double, double>> joined;
  for (const auto& [tid, v] : expected) joined[tid].first = v;
  for (const auto& [tid, v] : actual) joined[tid].second = v;

  std::vector<CmetricMismatch> out;
  for (const auto& [tid, pair] : joined) {
    const auto [e, a] = pair;
    const double scale = std::max(std::abs(e), std::abs(a));
    if (std::abs(e - a) > relative_tolerance * scale) {
      out.push_back({tid, e, a});
    }
  }
  return out;
}

}  // namespace cmprof

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

#include "synth.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <optional>
#include <queue>
#include <random>

#include <fmt/format.h>

#include "error.hpp"
#include "json.hpp"
#include "symbolize.hpp"

namespace cmprof {

namespace {

[[noreturn]] void invalid(std::string message) {
  throw Error(ErrorKind::kInvalidArgument, std::move(message));
}

// Synthetic code layout: every function owns kFunctionSize bytes split into
// kLinesPerFunction equally sized line ranges.
constexpr Address kCodeBase = 0x401000;
constexpr Address kFunctionSize = 0x100;
constexpr Address kLineSpan = 0x40;
constexpr std::uint32_t kLineStride = 3;

// Offsets of the blocking call inside a function, and of the return address
// in the thread entry point.
constexpr Address kWaitOffset = 0xc8;
constexpr Address kSerialExitOffset = 0x88;
constexpr Address kThreadStartReturn = 0x18;

using FunctionId = std::size_t;

struct FunctionInfo {
  std::string name;
  std::string file;
  std::uint32_t first_line = 1;
  Address start = 0;
};

class CodeLayout {
 public:
  FunctionId add(std::string name, std::string file, std::uint32_t line) {
    Address start = kCodeBase + functions_.size() * kFunctionSize;
    functions_.push_back({std::move(name), std::move(file), line, start});
    return functions_.size() - 1;
  }

  Address at(FunctionId fn, Address offset) const {
    return functions_[fn].start + offset;
  }

  Address random_ip(FunctionId fn, std::mt19937_64& rng) const {
    return functions_[fn].start + 4 * (rng() % (kFunctionSize / 4));
  }

  SymbolMap symbols() const {
    std::vector<SymbolEntry> entries;
    for (const FunctionInfo& f : functions_) {
      for (Address off = 0, i = 0; off < kFunctionSize; off += kLineSpan, ++i) {
        entries.push_back({f.start + off, f.start + off + kLineSpan, f.name,
                           f.file,
                           f.first_line + static_cast<std::uint32_t>(i) *
                                              kLineStride});
      }
    }
    return SymbolMap(std::move(entries));
  }

 private:
  std::vector<FunctionInfo> functions_;
};

struct CommonFunctions {
  FunctionId thread_start;
  FunctionId worker_main;
};

CommonFunctions add_common(CodeLayout& layout) {
  return {layout.add("thread_start", "runtime.c", 12),
          layout.add("worker_main", "worker.c", 30)};
}

class StackFactory {
 public:
  StackFactory(const CodeLayout& layout, CommonFunctions common)
      : layout_(layout), common_(common) {}

  // Stack of a thread blocked at `offset` inside `fn`, called from
  // worker_main.
  std::vector<Address> at(FunctionId fn, Address offset) const {
    const Address call_site = 0x10 + (8 * fn) % 0xe0;
    return {layout_.at(fn, offset), layout_.at(common_.worker_main, call_site),
            layout_.at(common_.thread_start, kThreadStartReturn)};
  }

 private:
  const CodeLayout& layout_;
  CommonFunctions common_;
};

// Emits a consistent event stream for an idealized non-preemptive scheduler
// (FIFO run queue, lowest free cpu first) and integrates the resulting
// schedule for ground truth: every interval of length T with n active
// threads adds T/n to the open slice of each on-CPU thread.
class ScheduleBuilder {
 public:
  struct Slice {
    Tid tid = 0;
    Nanos t_in = 0;
    Nanos t_out = 0;
    double cmetric = 0.0;
    std::int64_t nt = 0;
    std::vector<Address> stack;
    std::int64_t live_at_close = 0;
  };

  explicit ScheduleBuilder(std::uint32_t cpus) : cpu_busy_(cpus, false) {}

  void spawn(Nanos t, Tid tid, std::string comm, FunctionId fn) {
    advance(t);
    events_.push_back(TaskNew{t, tid, std::move(comm)});
    Thread& th = threads_[tid];
    th.fn = fn;
    ++live_;
  }

  void set_function(Nanos t, Tid tid, FunctionId fn) {
    Thread& th = threads_.at(tid);
    if (th.state == ThreadState::kRunning && t > th.segment_start) {
      segments_.push_back({th.segment_start, t, tid, th.fn});
      th.segment_start = t;
    }
    th.fn = fn;
  }

  // Wakes an inactive thread. Returns the threads that got a cpu at t.
  std::vector<Tid> ready(Nanos t, Tid tid) {
    advance(t);
    Thread& th = threads_.at(tid);
    if (th.state != ThreadState::kInactive) {
      invalid(fmt::format("internal: ready() on active tid {}", tid));
    }
    events_.push_back(SchedWakeup{t, tid});
    th.state = ThreadState::kRunnable;
    ++active_;
    run_queue_.push_back(tid);
    std::vector<Tid> started;
    while (!run_queue_.empty()) {
      auto cpu = free_cpu();
      if (!cpu) break;
      Tid next = run_queue_.front();
      run_queue_.pop_front();
      events_.push_back(
          SchedSwitch{t, *cpu, kIdleTid, PrevState::kRunnable, next, {}});
      cpu_busy_[*cpu] = true;
      start(t, next, *cpu);
      started.push_back(next);
    }
    return started;
  }

  // Blocks a running thread; its cpu goes to the head of the run queue.
  // Returns the thread dispatched in its place.
  std::optional<Tid> block(Nanos t, Tid tid, std::vector<Address> stack) {
    advance(t);
    Thread& th = threads_.at(tid);
    if (th.state != ThreadState::kRunning) {
      invalid(fmt::format("internal: block() on idle tid {}", tid));
    }
    const std::uint32_t cpu = th.cpu;
    std::optional<Tid> next;
    if (!run_queue_.empty()) {
      next = run_queue_.front();
      run_queue_.pop_front();
    }
    events_.push_back(SchedSwitch{t, cpu, tid, PrevState::kBlocked,
                                  next.value_or(kIdleTid), stack});
    if (t > th.segment_start) {
      segments_.push_back({th.segment_start, t, tid, th.fn});
    }
    slices_.push_back({tid, th.t_in, t, th.slice_cm, th.slice_nt,
                       std::move(stack), live_});
    th.state = ThreadState::kInactive;
    --active_;
    running_.erase(std::find(running_.begin(), running_.end(), tid));
    if (next) {
      start(t, *next, cpu);
    } else {
      cpu_busy_[cpu] = false;
    }
    return next;
  }

  void exit(Nanos t, Tid tid) {
    advance(t);
    Thread& th = threads_.at(tid);
    if (th.state != ThreadState::kInactive) {
      invalid(fmt::format("internal: exit() on active tid {}", tid));
    }
    events_.push_back(TaskExit{t, tid});
    --live_;
  }

  bool is_running(Tid tid) const {
    return threads_.at(tid).state == ThreadState::kRunning;
  }

  std::vector<Tid> running() const {
    std::vector<Tid> out = running_;
    std::sort(out.begin(), out.end());
    return out;
  }

  const std::vector<Slice>& slices() const { return slices_; }

  // Appends samples on the sample_period grid and returns the full trace.
  std::vector<TraceEvent> finish(const CodeLayout& layout, Nanos period,
                                 std::uint64_t seed) {
    struct Pending {
      Nanos ts;
      Tid tid;
      FunctionId fn;
    };
    std::vector<Pending> pending;
    for (const Segment& s : segments_) {
      for (Nanos ts = (s.start + period - 1) / period * period; ts < s.end;
           ts += period) {
        pending.push_back({ts, s.tid, s.fn});
      }
    }
    std::sort(pending.begin(), pending.end(),
              [](const Pending& a, const Pending& b) {
                return std::tie(a.ts, a.tid) < std::tie(b.ts, b.tid);
              });

    std::mt19937_64 rng(seed);
    std::vector<TraceEvent> out;
    out.reserve(events_.size() + pending.size());
    std::size_t e = 0;
    for (const Pending& p : pending) {
      // Scheduler events at the same instant come first, so a sample sees
      // the post-switch state.
      while (e < events_.size() && event_time(events_[e]) <= p.ts) {
        out.push_back(std::move(events_[e++]));
      }
      out.push_back(Sample{p.ts, p.tid, layout.random_ip(p.fn, rng)});
    }
    while (e < events_.size()) out.push_back(std::move(events_[e++]));
    events_.clear();
    return out;
  }

 private:
  struct Thread {
    ThreadState state = ThreadState::kInactive;
    std::uint32_t cpu = 0;
    FunctionId fn = 0;
    Nanos segment_start = 0;
    Nanos t_in = 0;
    double slice_cm = 0.0;
    std::int64_t slice_nt = 0;
  };

  struct Segment {
    Nanos start;
    Nanos end;
    Tid tid;
    FunctionId fn;
  };

  std::optional<std::uint32_t> free_cpu() const {
    for (std::uint32_t c = 0; c < cpu_busy_.size(); ++c) {
      if (!cpu_busy_[c]) return c;
    }
    return std::nullopt;
  }

  void start(Nanos t, Tid tid, std::uint32_t cpu) {
    Thread& th = threads_.at(tid);
    th.state = ThreadState::kRunning;
    th.cpu = cpu;
    th.segment_start = t;
    th.t_in = t;
    th.slice_cm = 0.0;
    th.slice_nt = 0;
    running_.push_back(tid);
  }

  void advance(Nanos t) {
    if (t < now_) invalid("internal: schedule went back in time");
    const Nanos dt = t - now_;
    if (dt > 0 && active_ >= 1) {
      const double share = static_cast<double>(dt) / static_cast<double>(active_);
      for (Tid tid : running_) {
        Thread& th = threads_.at(tid);
        th.slice_cm += share;
        th.slice_nt += dt * active_;
      }
    }
    now_ = t;
  }

  std::vector<bool> cpu_busy_;
  std::map<Tid, Thread> threads_;
  std::deque<Tid> run_queue_;
  std::vector<Tid> running_;
  std::int64_t active_ = 0;
  std::int64_t live_ = 0;
  Nanos now_ = 0;
  std::vector<TraceEvent> events_;
  std::vector<Segment> segments_;
  std::vector<Slice> slices_;
};

std::string worker_name(Tid tid) { return fmt::format("worker-{}", tid); }

void build_serial_phase(const Scenario& sc, CodeLayout& layout,
                        ScheduleBuilder& b, const StackFactory& stacks,
                        FunctionId parallel, FunctionId serial) {
  const Tid k = sc.threads;
  const Nanos round = sc.parallel_ns + sc.serial_ns;
  (void)layout;
  for (Tid tid = 1; tid <= k; ++tid) {
    b.spawn(0, tid, tid == 1 ? "main" : worker_name(tid), parallel);
  }
  for (std::uint32_t r = 0; r < sc.rounds; ++r) {
    const Nanos t0 = r * round;
    for (Tid tid = 1; tid <= k; ++tid) {
      b.set_function(t0, tid, parallel);
      if (!b.is_running(tid)) b.ready(t0, tid);
    }
    const Nanos t1 = t0 + sc.parallel_ns;
    for (Tid tid = 2; tid <= k; ++tid) {
      b.block(t1, tid, stacks.at(parallel, kWaitOffset));
    }
    b.set_function(t1, 1, serial);
  }
  const Nanos end = sc.rounds * round;
  b.block(end, 1, stacks.at(serial, kSerialExitOffset));
  for (Tid tid = 1; tid <= k; ++tid) b.exit(end, tid);
}

void build_balanced(const Scenario& sc, ScheduleBuilder& b,
                    const StackFactory& stacks, FunctionId work) {
  const Tid k = sc.threads;
  for (Tid tid = 1; tid <= k; ++tid) b.spawn(0, tid, worker_name(tid), work);
  for (std::uint32_t r = 0; r < sc.rounds; ++r) {
    const Nanos t0 = r * sc.parallel_ns;
    for (Tid tid = 1; tid <= k; ++tid) b.ready(t0, tid);
    for (Tid tid = 1; tid <= k; ++tid) {
      b.block(t0 + sc.parallel_ns, tid, stacks.at(work, kWaitOffset));
    }
  }
  const Nanos end = sc.rounds * sc.parallel_ns;
  for (Tid tid = 1; tid <= k; ++tid) b.exit(end, tid);
}

// Order in which threads enter the parallel phase of a round: the thread
// still on-CPU from the previous round first, then the rest by tid.
std::vector<Tid> round_queue(Tid k, std::optional<Tid> holder) {
  std::vector<Tid> queue;
  if (holder) queue.push_back(*holder);
  for (Tid tid = 1; tid <= k; ++tid) {
    if (!holder || tid != *holder) queue.push_back(tid);
  }
  return queue;
}

// Critical-section order: the last thread to reach the barrier goes first,
// then the others in arrival order.
std::vector<Tid> convoy_order(const std::vector<Tid>& queue, bool has_parallel) {
  if (!has_parallel) return queue;
  std::vector<Tid> order{queue.back()};
  order.insert(order.end(), queue.begin(), queue.end() - 1);
  return order;
}

void build_lock_convoy(const Scenario& sc, ScheduleBuilder& b,
                       const StackFactory& stacks, FunctionId parallel,
                       FunctionId critical) {
  const Tid k = sc.threads;
  const std::uint32_t p = sc.cpu_count();
  const bool has_parallel = sc.parallel_ns > 0;
  for (Tid tid = 1; tid <= k; ++tid) {
    b.spawn(0, tid, worker_name(tid), has_parallel ? parallel : critical);
  }

  Nanos t = 0;
  std::optional<Tid> holder;
  for (std::uint32_t r = 0; r < sc.rounds; ++r) {
    const std::vector<Tid> queue = round_queue(k, holder);
    if (has_parallel) {
      for (Tid tid : queue) {
        b.set_function(t, tid, parallel);
        if (!b.is_running(tid)) b.ready(t, tid);
      }
      const std::uint32_t waves = (k + p - 1) / p;
      for (std::uint32_t w = 0; w < waves; ++w) {
        const Nanos tw = t + (w + 1) * sc.parallel_ns;
        const std::size_t last = std::min<std::size_t>((w + 1) * p, k);
        for (std::size_t j = w * p; j < last && j + 1 < k; ++j) {
          b.block(tw, queue[j], stacks.at(parallel, kWaitOffset));
        }
      }
      t += waves * sc.parallel_ns;
    }

    const std::vector<Tid> order = convoy_order(queue, has_parallel);
    b.set_function(t, order.front(), critical);
    if (!b.is_running(order.front())) b.ready(t, order.front());
    for (std::size_t i = 0; i < order.size(); ++i) {
      const Nanos end = t + sc.critical_ns;
      if (i + 1 < order.size()) {
        b.set_function(end, order[i + 1], critical);
        b.ready(end, order[i + 1]);
        b.block(end, order[i], stacks.at(critical, kWaitOffset));
      }
      t = end;
    }
    holder = order.back();
  }
  b.block(t, *holder, stacks.at(critical, kWaitOffset));
  for (Tid tid = 1; tid <= k; ++tid) b.exit(t, tid);
}

void build_pipeline(const Scenario& sc, ScheduleBuilder& b,
                    const StackFactory& stacks,
                    const std::vector<FunctionId>& stage_fn) {
  const std::size_t stages = sc.stage_threads.size();
  auto service = [&](std::size_t s) {
    return sc.stage_service_ns.size() == 1 ? sc.stage_service_ns[0]
                                           : sc.stage_service_ns[s];
  };

  std::map<Tid, std::size_t> stage_of;
  std::vector<std::deque<Tid>> waiting(stages);
  std::vector<std::uint64_t> queued(stages, 0);
  std::uint64_t remaining = sc.items;
  std::uint64_t completed = 0;

  struct Completion {
    Nanos t;
    std::uint64_t seq;
    Tid tid;
    bool operator>(const Completion& o) const {
      return std::tie(t, seq) > std::tie(o.t, o.seq);
    }
  };
  std::priority_queue<Completion, std::vector<Completion>, std::greater<>> heap;
  std::uint64_t seq = 0;
  auto schedule = [&](Nanos t, Tid tid) {
    heap.push({t + service(stage_of.at(tid)), seq++, tid});
  };
  auto schedule_all = [&](Nanos t, const std::vector<Tid>& started) {
    for (Tid tid : started) schedule(t, tid);
  };

  Tid next_tid = 1;
  for (std::size_t s = 0; s < stages; ++s) {
    for (std::uint32_t i = 0; i < sc.stage_threads[s]; ++i) {
      const Tid tid = next_tid++;
      stage_of[tid] = s;
      b.spawn(0, tid, fmt::format("stage{}-{}", s, i), stage_fn[s]);
    }
  }
  for (const auto& [tid, s] : stage_of) {
    if (s == 0) {
      if (remaining > 0) {
        --remaining;
        schedule_all(0, b.ready(0, tid));
      }
    } else {
      waiting[s].push_back(tid);
    }
  }

  Nanos end = 0;
  while (!heap.empty()) {
    const Completion c = heap.top();
    heap.pop();
    const std::size_t s = stage_of.at(c.tid);
    if (s + 1 < stages) {
      if (!waiting[s + 1].empty()) {
        const Tid consumer = waiting[s + 1].front();
        waiting[s + 1].pop_front();
        schedule_all(c.t, b.ready(c.t, consumer));
      } else {
        ++queued[s + 1];
      }
    } else {
      ++completed;
    }

    bool has_item = false;
    if (s == 0) {
      if (remaining > 0) {
        --remaining;
        has_item = true;
      }
    } else if (queued[s] > 0) {
      --queued[s];
      has_item = true;
    }
    if (has_item) {
      schedule(c.t, c.tid);
    } else {
      if (auto next = b.block(c.t, c.tid, stacks.at(stage_fn[s], kWaitOffset))) {
        schedule(c.t, *next);
      }
      if (s > 0) waiting[s].push_back(c.tid);
    }
    end = c.t;
    if (completed == sc.items) break;
  }
  for (Tid tid : b.running()) {
    b.block(end, tid, stacks.at(stage_fn[stage_of.at(tid)], kWaitOffset));
  }
  for (const auto& [tid, s] : stage_of) b.exit(end, tid);
}

GroundTruth integrate_schedule(const Scenario& sc, const ScheduleBuilder& b,
                               const SymbolMap& symbols) {
  GroundTruth truth;
  std::map<std::vector<Address>, double> path_cm;
  for (const auto& slice : b.slices()) {
    truth.cmetric[slice.tid] += slice.cmetric;
    ++truth.total_slices;
    const Nanos duration = slice.t_out - slice.t_in;
    const bool triggered =
        duration > 0 &&
        2 * slice.nt < sc.truth_nmin.doubled(slice.live_at_close) * duration;
    if (!triggered) continue;
    ++truth.critical_slices;
    std::vector<Address> path(
        slice.stack.begin(),
        slice.stack.begin() +
            std::min<std::size_t>(slice.stack.size(), sc.stack_depth));
    path_cm[path] += slice.cmetric;
  }
  truth.cr = truth.total_slices == 0
                 ? 0.0
                 : static_cast<double>(truth.critical_slices) /
                       static_cast<double>(truth.total_slices);
  double best = -1.0;
  for (const auto& [path, cm] : path_cm) {
    if (cm > best) {
      best = cm;
      truth.top_path = path;
    }
  }
  if (!truth.top_path.empty()) {
    if (const SymbolEntry* sym = lookup_address(symbols, truth.top_path[0])) {
      truth.top_function = sym->function;
    }
  }
  return truth;
}

}  // namespace

std::string_view scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kSerialPhase:
      return "serial";
    case ScenarioKind::kLockConvoy:
      return "convoy";
    case ScenarioKind::kPipeline:
      return "pipeline";
    case ScenarioKind::kBalanced:
      return "balanced";
  }
  return "unknown";
}

ScenarioKind parse_scenario_kind(std::string_view name) {
  if (name == "serial" || name == "serial-phase") {
    return ScenarioKind::kSerialPhase;
  }
  if (name == "convoy" || name == "lock-convoy") {
    return ScenarioKind::kLockConvoy;
  }
  if (name == "pipeline") return ScenarioKind::kPipeline;
  if (name == "balanced") return ScenarioKind::kBalanced;
  invalid(fmt::format("unknown scenario kind \"{}\"", name));
}

Scenario Scenario::defaults(ScenarioKind kind) {
  Scenario s;
  s.kind = kind;
  switch (kind) {
    case ScenarioKind::kSerialPhase:
      break;
    case ScenarioKind::kBalanced:
      s.parallel_ns = 100'000;
      break;
    case ScenarioKind::kLockConvoy:
      s.parallel_ns = 0;
      s.critical_ns = 10'000;
      s.rounds = 3;
      break;
    case ScenarioKind::kPipeline:
      s.stage_threads = {1, 4, 1};
      s.stage_service_ns = {50'000};
      s.threads = 6;
      break;
  }
  return s;
}

std::uint32_t Scenario::thread_count() const {
  if (kind != ScenarioKind::kPipeline) return threads;
  std::uint64_t n = 0;
  for (std::uint32_t m : stage_threads) n += m;
  return static_cast<std::uint32_t>(std::min<std::uint64_t>(n, UINT32_MAX));
}

void Scenario::validate() const {
  static constexpr Nanos kMaxDuration = 1'000'000'000'000;  // 1000 s per phase
  constexpr std::uint32_t kMaxThreads = 4096;
  constexpr std::uint32_t kMaxRounds = 1'000'000;
  auto check_duration = [](Nanos v, std::string_view name, bool allow_zero) {
    if (v < 0 || (!allow_zero && v == 0) || v > kMaxDuration) {
      invalid(fmt::format("{} must be {} and at most {} ns, got {}", name,
                          allow_zero ? "non-negative" : "positive",
                          kMaxDuration, v));
    }
  };

  if (kind == ScenarioKind::kPipeline) {
    if (stage_threads.empty()) invalid("pipeline needs at least one stage");
    for (std::uint32_t m : stage_threads) {
      if (m == 0) invalid("every pipeline stage needs at least one thread");
    }
    if (stage_service_ns.size() != 1 &&
        stage_service_ns.size() != stage_threads.size()) {
      invalid(fmt::format("expected 1 or {} service times, got {}",
                          stage_threads.size(), stage_service_ns.size()));
    }
    for (Nanos s : stage_service_ns) check_duration(s, "service time", false);
    if (items == 0) invalid("items must be >= 1");
  } else {
    if (threads == 0) invalid("threads must be >= 1");
    if (rounds == 0 || rounds > kMaxRounds) {
      invalid(fmt::format("rounds must be in [1, {}]", kMaxRounds));
    }
  }
  if (thread_count() > kMaxThreads) {
    invalid(fmt::format("at most {} threads supported", kMaxThreads));
  }
  if (cpu_count() == 0) invalid("cpus must be >= 1");
  if ((kind == ScenarioKind::kSerialPhase || kind == ScenarioKind::kBalanced) &&
      thread_count() > cpu_count()) {
    invalid(fmt::format("{} requires threads <= cpus", scenario_name(kind)));
  }
  if (sample_period <= 0) invalid("sample period must be positive");
  if (truth_nmin.mode() == NminPolicy::Mode::kFixed &&
      truth_nmin.fixed_value() == 0) {
    invalid("N_min must be >= 1");
  }
  if (stack_depth == 0) invalid("stack depth must be >= 1");

  switch (kind) {
    case ScenarioKind::kSerialPhase:
      check_duration(parallel_ns, "parallel phase", false);
      check_duration(serial_ns, "serial phase", false);
      break;
    case ScenarioKind::kBalanced:
      check_duration(parallel_ns, "work length", false);
      break;
    case ScenarioKind::kLockConvoy:
      check_duration(critical_ns, "critical section", false);
      check_duration(parallel_ns, "parallel work", true);
      break;
    case ScenarioKind::kPipeline:
      break;
  }
}

std::map<Tid, double> closed_form_cmetric(const Scenario& sc) {
  sc.validate();
  std::map<Tid, double> cm;
  const Tid k = sc.threads;
  const double rounds = sc.rounds;
  switch (sc.kind) {
    case ScenarioKind::kSerialPhase: {
      // Parallel phase shared by k threads; tid 1 alone in the serial phase.
      const double share = static_cast<double>(sc.parallel_ns) / k;
      for (Tid tid = 1; tid <= k; ++tid) cm[tid] = rounds * share;
      cm[1] += rounds * static_cast<double>(sc.serial_ns);
      return cm;
    }
    case ScenarioKind::kBalanced:
      for (Tid tid = 1; tid <= k; ++tid) {
        cm[tid] = rounds * static_cast<double>(sc.parallel_ns) / k;
      }
      return cm;
    case ScenarioKind::kLockConvoy: {
      // Each critical section runs alone: C per round. In the parallel phase
      // the thread at queue position j runs in wave j / p, while every thread
      // of that wave and the later ones is active: W / (k - wave * p).
      const std::uint32_t p = sc.cpu_count();
      const bool has_parallel = sc.parallel_ns > 0;
      for (Tid tid = 1; tid <= k; ++tid) {
        cm[tid] = rounds * static_cast<double>(sc.critical_ns);
      }
      std::optional<Tid> holder;
      for (std::uint32_t r = 0; r < sc.rounds; ++r) {
        const std::vector<Tid> queue = round_queue(k, holder);
        if (has_parallel) {
          for (std::size_t j = 0; j < queue.size(); ++j) {
            const std::uint32_t wave = static_cast<std::uint32_t>(j / p);
            cm[queue[j]] += static_cast<double>(sc.parallel_ns) /
                            static_cast<double>(k - wave * p);
          }
        }
        holder = convoy_order(queue, has_parallel).back();
      }
      return cm;
    }
    case ScenarioKind::kPipeline:
      break;
  }
  invalid("no closed form for the pipeline scenario");
}

SynthOutput generate(const Scenario& sc) {
  sc.validate();
  CodeLayout layout;
  const CommonFunctions common = add_common(layout);
  StackFactory stacks(layout, common);
  ScheduleBuilder builder(sc.cpu_count());

  switch (sc.kind) {
    case ScenarioKind::kSerialPhase: {
      const FunctionId parallel = layout.add("parallel_work", "work.c", 50);
      const FunctionId serial = layout.add("serial_work", "serial.c", 80);
      build_serial_phase(sc, layout, builder, stacks, parallel, serial);
      break;
    }
    case ScenarioKind::kBalanced: {
      const FunctionId work = layout.add("parallel_work", "work.c", 50);
      build_balanced(sc, builder, stacks, work);
      break;
    }
    case ScenarioKind::kLockConvoy: {
      const FunctionId parallel = layout.add("parallel_work", "work.c", 50);
      const FunctionId critical = layout.add("critical_section", "lock.c", 120);
      build_lock_convoy(sc, builder, stacks, parallel, critical);
      break;
    }
    case ScenarioKind::kPipeline: {
      std::vector<FunctionId> stage_fn;
      for (std::size_t s = 0; s < sc.stage_threads.size(); ++s) {
        stage_fn.push_back(layout.add(fmt::format("stage_{}", s), "pipeline.c",
                                      static_cast<std::uint32_t>(200 + 20 * s)));
      }
      build_pipeline(sc, builder, stacks, stage_fn);
      break;
    }
  }

  SynthOutput out;
  out.symbols = layout.symbols();
  out.truth = integrate_schedule(sc, builder, out.symbols);
  if (sc.kind != ScenarioKind::kPipeline) {
    out.truth.cmetric = closed_form_cmetric(sc);
  }
  out.trace = builder.finish(layout, sc.sample_period, sc.seed);
  return out;
}

std::string truth_to_json(const Scenario& sc, const GroundTruth& truth) {
  nlohmann::ordered_json doc;
  doc["scenario"] = scenario_name(sc.kind);
  doc["threads"] = sc.thread_count();
  doc["cpus"] = sc.cpu_count();
  doc["seed"] = sc.seed;
  if (sc.truth_nmin.mode() == NminPolicy::Mode::kFixed) {
    doc["nmin"] = sc.truth_nmin.fixed_value();
  } else {
    doc["nmin"] = "half";
  }
  nlohmann::ordered_json cm = nlohmann::ordered_json::object();
  for (const auto& [tid, v] : truth.cmetric) cm[std::to_string(tid)] = v;
  doc["cmetric_ns"] = std::move(cm);
  doc["total_slices"] = truth.total_slices;
  doc["critical_slices"] = truth.critical_slices;
  doc["cr"] = truth.cr;
  doc["top_path"] = truth.top_path;
  doc["top_function"] = truth.top_function;
  return doc.dump(2) + "\n";
}

void write_synth_files(const Scenario& scenario, const SynthOutput& out,
                       const std::filesystem::path& prefix) {
  const std::string base = prefix.string();
  write_trace_file(base + ".jsonl", out.trace);
  write_symbol_file(base + ".sym", out.symbols);
  const std::string truth_path = base + ".truth.json";
  std::ofstream truth(truth_path, std::ios::binary);
  if (!truth) {
    throw Error(ErrorKind::kIo,
                fmt::format("cannot write \"{}\"", truth_path));
  }
  truth << truth_to_json(scenario, out.truth);
}

}  // namespace cmprof

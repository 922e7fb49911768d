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

#include "trace_model.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "error.hpp"
#include "json.hpp"

namespace cmprof {

namespace {

using nlohmann::json;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void parse_fail(std::size_t line_number, std::string_view what) {
  throw Error(ErrorKind::kParse, fmt::format("line {}: {}", line_number, what));
}

class RecordReader {
 public:
  RecordReader(const json& obj, std::size_t line_number)
      : obj_(obj), line_(line_number) {}

  const json& field(std::string_view name) const {
    auto it = obj_.find(name);
    if (it == obj_.end()) {
      parse_fail(line_, fmt::format("missing field \"{}\"", name));
    }
    return *it;
  }

  bool has(std::string_view name) const { return obj_.contains(name); }

  std::int64_t signed_int(std::string_view name) const {
    const json& v = field(name);
    if (v.is_number_unsigned()) {
      auto u = v.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(INT64_MAX)) {
        parse_fail(line_, fmt::format("field \"{}\" out of range", name));
      }
      return static_cast<std::int64_t>(u);
    }
    if (!v.is_number_integer()) {
      parse_fail(line_, fmt::format("field \"{}\" must be an integer", name));
    }
    return v.get<std::int64_t>();
  }

  std::uint64_t unsigned_int(const json& v, std::string_view name) const {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
      parse_fail(line_, fmt::format("field \"{}\" must be non-negative", name));
    }
    parse_fail(line_, fmt::format("field \"{}\" must be an integer", name));
  }

  std::uint64_t unsigned_int(std::string_view name) const {
    return unsigned_int(field(name), name);
  }

  std::uint32_t u32(std::string_view name) const {
    std::uint64_t v = unsigned_int(name);
    if (v > UINT32_MAX) {
      parse_fail(line_, fmt::format("field \"{}\" out of range", name));
    }
    return static_cast<std::uint32_t>(v);
  }

  Tid tid(std::string_view name) const { return u32(name); }

  Nanos timestamp() const {
    Nanos ts = signed_int("ts");
    if (ts < 0) parse_fail(line_, "field \"ts\" must be non-negative");
    return ts;
  }

  std::string string(std::string_view name) const {
    const json& v = field(name);
    if (!v.is_string()) {
      parse_fail(line_, fmt::format("field \"{}\" must be a string", name));
    }
    return v.get<std::string>();
  }

  std::size_t line() const { return line_; }

 private:
  const json& obj_;
  std::size_t line_;
};

json parse_object(std::string_view line, std::size_t line_number) {
  json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (obj.is_discarded()) parse_fail(line_number, "malformed JSON");
  if (!obj.is_object()) parse_fail(line_number, "record is not a JSON object");
  return obj;
}

std::string quoted(const std::string& s) { return json(s).dump(); }

bool is_blank_or_comment(std::string_view line) {
  auto first = line.find_first_not_of(" \t\r");
  return first == std::string_view::npos || line[first] == '#';
}

void check_header(std::string_view line, std::size_t line_number) {
  constexpr std::string_view kPrefix = "#cmprof-trace ";
  if (line.rfind(kPrefix, 0) != 0) return;  // ordinary comment
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
    line.remove_suffix(1);
  }
  if (line != kTraceHeader) {
    parse_fail(line_number, fmt::format("unsupported trace version \"{}\"",
                                        line.substr(kPrefix.size())));
  }
}

}  // namespace

Nanos event_time(const TraceEvent& ev) {
  return std::visit([](const auto& e) { return e.ts; }, ev);
}

std::string_view event_tag(const TraceEvent& ev) {
  return std::visit(
      Overloaded{
          [](const TaskNew&) { return std::string_view("new"); },
          [](const TaskExit&) { return std::string_view("exit"); },
          [](const SchedSwitch&) { return std::string_view("switch"); },
          [](const SchedWakeup&) { return std::string_view("wakeup"); },
          [](const Sample&) { return std::string_view("sample"); },
      },
      ev);
}

TraceEvent parse_event(std::string_view line, std::size_t line_number) {
  json obj = parse_object(line, line_number);
  RecordReader r(obj, line_number);
  const json& tag = r.field("ev");
  if (!tag.is_string()) parse_fail(line_number, "field \"ev\" must be a string");
  const auto& kind = tag.get_ref<const std::string&>();

  if (kind == "switch") {
    SchedSwitch sw;
    sw.ts = r.timestamp();
    sw.prev_tid = r.tid("prev");
    sw.next_tid = r.tid("next");
    std::string state = r.string("prev_state");
    if (state == "R") {
      sw.prev_state = PrevState::kRunnable;
    } else if (state == "B") {
      sw.prev_state = PrevState::kBlocked;
    } else {
      parse_fail(line_number,
                 fmt::format("field \"prev_state\" must be \"R\" or \"B\", got "
                             "\"{}\"",
                             state));
    }
    sw.cpu = r.u32("cpu");
    if (r.has("stack")) {
      const json& arr = r.field("stack");
      if (!arr.is_array()) {
        parse_fail(line_number, "field \"stack\" must be an array");
      }
      std::vector<Address> stack;
      stack.reserve(arr.size());
      for (const json& a : arr) stack.push_back(r.unsigned_int(a, "stack"));
      sw.prev_stack = std::move(stack);
    }
    return sw;
  }
  if (kind == "sample") {
    return Sample{r.timestamp(), r.tid("tid"), r.unsigned_int("ip")};
  }
  if (kind == "wakeup") return SchedWakeup{r.timestamp(), r.tid("tid")};
  if (kind == "new") {
    TaskNew tn;
    tn.ts = r.timestamp();
    tn.tid = r.tid("tid");
    tn.comm = r.string("comm");
    return tn;
  }
  if (kind == "exit") return TaskExit{r.timestamp(), r.tid("tid")};
  parse_fail(line_number, fmt::format("unknown event tag \"{}\"", kind));
}

std::string serialize_event(const TraceEvent& ev) {
  return std::visit(
      Overloaded{
          [](const TaskNew& e) {
            return fmt::format(R"({{"ev":"new","ts":{},"tid":{},"comm":{}}})",
                               e.ts, e.tid, quoted(e.comm));
          },
          [](const TaskExit& e) {
            return fmt::format(R"({{"ev":"exit","ts":{},"tid":{}}})", e.ts,
                               e.tid);
          },
          [](const SchedSwitch& e) {
            std::string out = fmt::format(
                R"({{"ev":"switch","ts":{},"cpu":{},"prev":{},"prev_state":"{}","next":{})",
                e.ts, e.cpu, e.prev_tid,
                e.prev_state == PrevState::kBlocked ? 'B' : 'R', e.next_tid);
            if (e.prev_stack) {
              out += fmt::format(R"(,"stack":[{}])",
                                 fmt::join(*e.prev_stack, ","));
            }
            out += '}';
            return out;
          },
          [](const SchedWakeup& e) {
            return fmt::format(R"({{"ev":"wakeup","ts":{},"tid":{}}})", e.ts,
                               e.tid);
          },
          [](const Sample& e) {
            return fmt::format(R"({{"ev":"sample","ts":{},"tid":{},"ip":{}}})",
                               e.ts, e.tid, e.ip);
          },
      },
      ev);
}

std::vector<TraceEvent> parse_trace(std::istream& in) {
  std::vector<TraceEvent> events;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (is_blank_or_comment(line)) {
      check_header(line, line_number);
      continue;
    }
    events.push_back(parse_event(line, line_number));
  }
  return events;
}

std::vector<TraceEvent> read_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::kIo,
                fmt::format("cannot open trace \"{}\"", path.string()));
  }
  return parse_trace(in);
}

void write_trace(std::ostream& out, std::span<const TraceEvent> events) {
  out << kTraceHeader << '\n';
  for (const TraceEvent& ev : events) out << serialize_event(ev) << '\n';
}

void write_trace_file(const std::filesystem::path& path,
                      std::span<const TraceEvent> events) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorKind::kIo,
                fmt::format("cannot write trace \"{}\"", path.string()));
  }
  write_trace(out, events);
  if (!out) {
    throw Error(ErrorKind::kIo,
                fmt::format("write failed for \"{}\"", path.string()));
  }
}

TraceStats validate_trace(std::span<const TraceEvent> events) {
  auto fail = [](std::size_t index, std::string_view what) {
    throw Error(ErrorKind::kValidation,
                fmt::format("event {}: {}", index, what));
  };

  // First TaskNew index per tid; a tid is an application thread from that
  // point on until it exits.
  std::unordered_map<Tid, std::size_t> first_new;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (const auto* tn = std::get_if<TaskNew>(&events[i])) {
      first_new.try_emplace(tn->tid, i);
    }
  }

  enum class Life { kUnborn, kLive, kExited };
  std::unordered_map<Tid, Life> life;
  std::unordered_set<Tid> active;
  auto life_of = [&](Tid tid) {
    auto it = life.find(tid);
    return it == life.end() ? Life::kUnborn : it->second;
  };
  auto check_ref = [&](std::size_t i, Tid tid, std::string_view role) {
    if (tid == kIdleTid) return;
    auto it = first_new.find(tid);
    if (it != first_new.end() && it->second > i) {
      fail(i, fmt::format("switch {} tid {} referenced before its TaskNew",
                          role, tid));
    }
  };

  TraceStats stats;
  Nanos last = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const TraceEvent& ev = events[i];
    Nanos ts = event_time(ev);
    if (i == 0) {
      stats.first_ts = ts;
    } else if (ts < last) {
      fail(i, fmt::format("timestamp regression ({} < {})", ts, last));
    }
    last = ts;

    std::visit(
        Overloaded{
            [&](const TaskNew& e) {
              ++stats.new_count;
              if (e.tid == kIdleTid) fail(i, "TaskNew with reserved tid 0");
              if (life_of(e.tid) == Life::kLive) {
                fail(i, fmt::format("duplicate TaskNew for live tid {}", e.tid));
              }
              life[e.tid] = Life::kLive;
              stats.app_tids.insert(e.tid);
            },
            [&](const TaskExit& e) {
              ++stats.exit_count;
              if (life_of(e.tid) != Life::kLive) {
                fail(i, fmt::format("TaskExit for tid {} without a preceding "
                                    "TaskNew",
                                    e.tid));
              }
              life[e.tid] = Life::kExited;
              active.erase(e.tid);
            },
            [&](const SchedSwitch& e) {
              ++stats.switch_count;
              check_ref(i, e.prev_tid, "prev");
              check_ref(i, e.next_tid, "next");
              if (e.prev_tid == e.next_tid && e.prev_tid != kIdleTid) {
                fail(i, fmt::format("switch from tid {} to itself", e.prev_tid));
              }
              if (life_of(e.prev_tid) == Life::kLive &&
                  e.prev_state == PrevState::kBlocked) {
                active.erase(e.prev_tid);
              }
              if (life_of(e.next_tid) == Life::kLive) active.insert(e.next_tid);
            },
            [&](const SchedWakeup& e) {
              ++stats.wakeup_count;
              if (life_of(e.tid) != Life::kLive) return;
              if (!active.insert(e.tid).second) {
                stats.notes.push_back(fmt::format(
                    "event {}: wakeup for already-active tid {} ignored; "
                    "wakeups only ever raise the active count",
                    i, e.tid));
              }
            },
            [&](const Sample&) { ++stats.sample_count; },
        },
        ev);
  }
  stats.last_ts = last;
  return stats;
}

SymbolMap::SymbolMap(std::vector<SymbolEntry> entries)
    : entries_(std::move(entries)) {
  std::stable_sort(entries_.begin(), entries_.end(),
                   [](const SymbolEntry& a, const SymbolEntry& b) {
                     return a.start < b.start;
                   });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const SymbolEntry& e = entries_[i];
    if (e.start >= e.end) {
      throw Error(ErrorKind::kValidation,
                  fmt::format("symbol range [{:#x}, {:#x}) for {} is empty",
                              e.start, e.end, e.function));
    }
    if (e.line == 0) {
      throw Error(ErrorKind::kValidation,
                  fmt::format("symbol {} has line 0", e.function));
    }
    if (i > 0 && entries_[i - 1].end > e.start) {
      throw Error(ErrorKind::kValidation,
                  fmt::format("symbol ranges for {} and {} overlap",
                              entries_[i - 1].function, e.function));
    }
  }
}

SymbolEntry parse_symbol_entry(std::string_view line, std::size_t line_number) {
  json obj = parse_object(line, line_number);
  RecordReader r(obj, line_number);
  SymbolEntry e;
  e.start = r.unsigned_int("start");
  e.end = r.unsigned_int("end");
  e.function = r.string("func");
  e.file = r.string("file");
  e.line = r.u32("line");
  if (e.line == 0) parse_fail(line_number, "field \"line\" must be positive");
  return e;
}

std::string serialize_symbol_entry(const SymbolEntry& e) {
  return fmt::format(
      R"({{"start":{},"end":{},"func":{},"file":{},"line":{}}})", e.start,
      e.end, quoted(e.function), quoted(e.file), e.line);
}

SymbolMap parse_symbol_map(std::istream& in) {
  std::vector<SymbolEntry> entries;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (is_blank_or_comment(line)) continue;
    entries.push_back(parse_symbol_entry(line, line_number));
  }
  return SymbolMap(std::move(entries));
}

SymbolMap read_symbol_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::kIo,
                fmt::format("cannot open symbol map \"{}\"", path.string()));
  }
  return parse_symbol_map(in);
}

void write_symbol_map(std::ostream& out, const SymbolMap& map) {
  for (const SymbolEntry& e : map.entries()) {
    out << serialize_symbol_entry(e) << '\n';
  }
}

void write_symbol_file(const std::filesystem::path& path,
                       const SymbolMap& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorKind::kIo,
                fmt::format("cannot write symbol map \"{}\"", path.string()));
  }
  write_symbol_map(out, map);
}

}  // namespace cmprof

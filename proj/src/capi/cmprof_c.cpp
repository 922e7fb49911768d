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

#include "cmprof/cmprof.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <iterator>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "aggregate.hpp"
#include "error.hpp"
#include "oracle.hpp"
#include "replay.hpp"
#include "symbolize.hpp"
#include "synth.hpp"
#include "trace_model.hpp"

struct cmprof_trace {
  std::vector<cmprof::TraceEvent> events;
  std::vector<std::string> notes;
};

struct cmprof_symbols {
  cmprof::SymbolMap map;
};

struct cmprof_analysis {
  cmprof::ReplayStats stats;
  cmprof::PathMap paths;
  cmprof::Summary summary;
  std::uint32_t top_n = 5;
};

struct cmprof_synth {
  cmprof::Scenario scenario;
  cmprof_trace trace;
  cmprof_symbols symbols;
  cmprof::GroundTruth truth;
  std::string truth_json;
};

namespace {

thread_local std::string g_last_error;

cmprof_status to_status(cmprof::ErrorKind kind) {
  switch (kind) {
    case cmprof::ErrorKind::kInvalidArgument:
      return CMPROF_ERR_INVALID_ARGUMENT;
    case cmprof::ErrorKind::kIo:
      return CMPROF_ERR_IO;
    case cmprof::ErrorKind::kParse:
      return CMPROF_ERR_PARSE;
    case cmprof::ErrorKind::kValidation:
      return CMPROF_ERR_VALIDATION;
    case cmprof::ErrorKind::kConsistency:
      return CMPROF_ERR_CONSISTENCY;
  }
  return CMPROF_ERR_INTERNAL;
}

cmprof_status fail(cmprof_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
cmprof_status guarded(F&& body) {
  try {
    return body();
  } catch (const cmprof::Error& e) {
    return fail(to_status(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(CMPROF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(CMPROF_ERR_INTERNAL, e.what());
  }
}

cmprof_status null_argument(const char* name) {
  return fail(CMPROF_ERR_INVALID_ARGUMENT,
              fmt::format("argument \"{}\" must not be NULL", name));
}

cmprof::NminPolicy to_policy(cmprof_nmin_mode mode, std::uint32_t value) {
  switch (mode) {
    case CMPROF_NMIN_HALF_TOTAL:
      return cmprof::NminPolicy::half_total();
    case CMPROF_NMIN_FIXED:
      return cmprof::NminPolicy::fixed(value);
  }
  throw cmprof::Error(cmprof::ErrorKind::kInvalidArgument,
                      fmt::format("unknown N_min mode {}",
                                  static_cast<int>(mode)));
}

cmprof::Config to_config(const cmprof_config& c) {
  cmprof::Config cfg;
  cfg.nmin = to_policy(c.nmin_mode, c.nmin);
  cfg.stack_depth = c.stack_depth;
  cfg.sample_period = c.sample_period_ns;
  cfg.validate();
  if (c.top_n == 0) {
    throw cmprof::Error(cmprof::ErrorKind::kInvalidArgument,
                        "top_n must be >= 1");
  }
  return cfg;
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

cmprof::ScenarioKind to_kind(cmprof_scenario_kind kind) {
  switch (kind) {
    case CMPROF_SCENARIO_SERIAL_PHASE:
      return cmprof::ScenarioKind::kSerialPhase;
    case CMPROF_SCENARIO_LOCK_CONVOY:
      return cmprof::ScenarioKind::kLockConvoy;
    case CMPROF_SCENARIO_PIPELINE:
      return cmprof::ScenarioKind::kPipeline;
    case CMPROF_SCENARIO_BALANCED:
      return cmprof::ScenarioKind::kBalanced;
  }
  throw cmprof::Error(cmprof::ErrorKind::kInvalidArgument,
                      fmt::format("unknown scenario kind {}",
                                  static_cast<int>(kind)));
}

cmprof_scenario_kind from_kind(cmprof::ScenarioKind kind) {
  switch (kind) {
    case cmprof::ScenarioKind::kSerialPhase:
      return CMPROF_SCENARIO_SERIAL_PHASE;
    case cmprof::ScenarioKind::kLockConvoy:
      return CMPROF_SCENARIO_LOCK_CONVOY;
    case cmprof::ScenarioKind::kPipeline:
      return CMPROF_SCENARIO_PIPELINE;
    case cmprof::ScenarioKind::kBalanced:
      break;
  }
  return CMPROF_SCENARIO_BALANCED;
}

constexpr std::uint32_t kDefaultStages[] = {1, 4, 1};
constexpr std::int64_t kDefaultService[] = {50'000};

}  // namespace

extern "C" {

const char* cmprof_version(void) { return "1.0.0"; }

const char* cmprof_status_string(cmprof_status status) {
  switch (status) {
    case CMPROF_OK:
      return "ok";
    case CMPROF_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case CMPROF_ERR_IO:
      return "i/o error";
    case CMPROF_ERR_PARSE:
      return "parse error";
    case CMPROF_ERR_VALIDATION:
      return "validation error";
    case CMPROF_ERR_CONSISTENCY:
      return "consistency error";
    case CMPROF_ERR_DIVERGENCE:
      return "divergence";
    case CMPROF_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

const char* cmprof_last_error(void) { return g_last_error.c_str(); }

void cmprof_string_free(char* s) { std::free(s); }

cmprof_status cmprof_trace_load(const char* path, cmprof_trace** out) {
  if (path == nullptr) return null_argument("path");
  if (out == nullptr) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    auto trace = std::make_unique<cmprof_trace>();
    trace->events = cmprof::read_trace_file(path);
    *out = trace.release();
    return CMPROF_OK;
  });
}

cmprof_status cmprof_trace_parse(const char* data, size_t size,
                                 cmprof_trace** out) {
  if (data == nullptr && size > 0) return null_argument("data");
  if (out == nullptr) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    std::istringstream in(std::string(data == nullptr ? "" : data, size));
    auto trace = std::make_unique<cmprof_trace>();
    trace->events = cmprof::parse_trace(in);
    *out = trace.release();
    return CMPROF_OK;
  });
}

cmprof_status cmprof_trace_save(const cmprof_trace* trace, const char* path) {
  if (trace == nullptr) return null_argument("trace");
  if (path == nullptr) return null_argument("path");
  return guarded([&] {
    cmprof::write_trace_file(path, trace->events);
    return CMPROF_OK;
  });
}

void cmprof_trace_free(cmprof_trace* trace) { delete trace; }

size_t cmprof_trace_event_count(const cmprof_trace* trace) {
  return trace == nullptr ? 0 : trace->events.size();
}

cmprof_status cmprof_trace_validate(cmprof_trace* trace,
                                    cmprof_trace_stats* stats) {
  if (trace == nullptr) return null_argument("trace");
  return guarded([&] {
    trace->notes.clear();
    cmprof::TraceStats s = cmprof::validate_trace(trace->events);
    trace->notes = std::move(s.notes);
    if (stats != nullptr) {
      *stats = cmprof_trace_stats{s.new_count,
                                  s.exit_count,
                                  s.switch_count,
                                  s.wakeup_count,
                                  s.sample_count,
                                  s.app_tids.size(),
                                  s.first_ts,
                                  s.last_ts,
                                  trace->notes.size()};
    }
    return CMPROF_OK;
  });
}

const char* cmprof_trace_note(const cmprof_trace* trace, size_t index) {
  if (trace == nullptr || index >= trace->notes.size()) return nullptr;
  return trace->notes[index].c_str();
}

cmprof_status cmprof_symbols_load(const char* path, cmprof_symbols** out) {
  if (path == nullptr) return null_argument("path");
  if (out == nullptr) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    auto symbols = std::make_unique<cmprof_symbols>();
    symbols->map = cmprof::read_symbol_file(path);
    *out = symbols.release();
    return CMPROF_OK;
  });
}

void cmprof_symbols_free(cmprof_symbols* symbols) { delete symbols; }

size_t cmprof_symbols_count(const cmprof_symbols* symbols) {
  return symbols == nullptr ? 0 : symbols->map.size();
}

int cmprof_symbols_lookup(const cmprof_symbols* symbols, uint64_t addr,
                          cmprof_symbol_info* info) {
  if (symbols == nullptr) return 0;
  const cmprof::SymbolEntry* e = cmprof::lookup_address(symbols->map, addr);
  if (e == nullptr) return 0;
  if (info != nullptr) {
    *info = cmprof_symbol_info{e->start, e->end, e->function.c_str(),
                               e->file.c_str(), e->line};
  }
  return 1;
}

void cmprof_config_init(cmprof_config* config) {
  if (config == nullptr) return;
  const cmprof::Config defaults;
  *config = cmprof_config{CMPROF_NMIN_HALF_TOTAL, 1, defaults.stack_depth, 5,
                          defaults.sample_period};
}

cmprof_status cmprof_analyze(const cmprof_trace* trace,
                             const cmprof_config* config,
                             cmprof_analysis** out) {
  if (trace == nullptr) return null_argument("trace");
  if (out == nullptr) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    cmprof_config c;
    cmprof_config_init(&c);
    if (config != nullptr) c = *config;
    const cmprof::Config cfg = to_config(c);
    cmprof::validate_trace(trace->events);
    cmprof::ReplayResult result = cmprof::run_replay(trace->events, cfg);
    auto analysis = std::make_unique<cmprof_analysis>();
    analysis->paths = cmprof::merge_paths(result.slices);
    analysis->summary = cmprof::compute_summary(result.stats, analysis->paths);
    analysis->stats = std::move(result.stats);
    analysis->top_n = c.top_n;
    *out = analysis.release();
    return CMPROF_OK;
  });
}

void cmprof_analysis_free(cmprof_analysis* analysis) { delete analysis; }

uint64_t cmprof_analysis_total_slices(const cmprof_analysis* a) {
  return a == nullptr ? 0 : a->summary.total_slices;
}

uint64_t cmprof_analysis_critical_slices(const cmprof_analysis* a) {
  return a == nullptr ? 0 : a->summary.critical_slices;
}

double cmprof_analysis_cr(const cmprof_analysis* a) {
  return a == nullptr ? 0.0 : a->summary.cr;
}

size_t cmprof_analysis_path_count(const cmprof_analysis* a) {
  return a == nullptr ? 0 : a->paths.size();
}

size_t cmprof_analysis_thread_count(const cmprof_analysis* a) {
  return a == nullptr ? 0 : a->summary.threads.size();
}

cmprof_status cmprof_analysis_thread(const cmprof_analysis* a, size_t index,
                                     uint32_t* tid, double* cmetric_ns) {
  if (a == nullptr) return null_argument("analysis");
  if (index >= a->summary.threads.size()) {
    return fail(CMPROF_ERR_INVALID_ARGUMENT,
                fmt::format("thread index {} out of range ({} threads)", index,
                            a->summary.threads.size()));
  }
  const cmprof::ThreadCmetric& t = a->summary.threads[index];
  if (tid != nullptr) *tid = t.tid;
  if (cmetric_ns != nullptr) *cmetric_ns = t.cmetric;
  return CMPROF_OK;
}

cmprof_status cmprof_analysis_render(const cmprof_analysis* a,
                                     const cmprof_symbols* symbols,
                                     cmprof_format format, char** out) {
  if (a == nullptr) return null_argument("analysis");
  if (out == nullptr) return null_argument("out");
  *out = nullptr;
  if (format != CMPROF_FORMAT_TEXT && format != CMPROF_FORMAT_JSON) {
    return fail(CMPROF_ERR_INVALID_ARGUMENT,
                fmt::format("unknown report format {}", static_cast<int>(format)));
  }
  return guarded([&] {
    const cmprof::SymbolMap empty;
    const auto ranked = cmprof::rank_top_n(a->paths, a->top_n);
    const std::string report = cmprof::render_report(
        ranked, symbols == nullptr ? empty : symbols->map, a->summary,
        format == CMPROF_FORMAT_JSON ? cmprof::ReportFormat::kJson
                                     : cmprof::ReportFormat::kText);
    *out = copy_string(report);
    return CMPROF_OK;
  });
}

cmprof_status cmprof_oracle_cmetric(const cmprof_trace* trace, uint32_t* tids,
                                    double* values, size_t capacity,
                                    size_t* count) {
  if (trace == nullptr) return null_argument("trace");
  if (count == nullptr) return null_argument("count");
  if (capacity > 0 && (tids == nullptr || values == nullptr)) {
    return null_argument(tids == nullptr ? "tids" : "values");
  }
  return guarded([&] {
    cmprof::validate_trace(trace->events);
    const auto cm = cmprof::oracle_cmetric(trace->events);
    *count = cm.size();
    size_t i = 0;
    for (auto it = cm.begin(); it != cm.end() && i < capacity; ++it, ++i) {
      tids[i] = it->first;
      values[i] = it->second;
    }
    return CMPROF_OK;
  });
}

cmprof_status cmprof_oracle_check(const cmprof_trace* trace,
                                  double relative_tolerance,
                                  size_t* mismatches) {
  if (trace == nullptr) return null_argument("trace");
  if (!(relative_tolerance >= 0.0)) {
    return fail(CMPROF_ERR_INVALID_ARGUMENT,
                "relative tolerance must be non-negative");
  }
  return guarded([&] {
    cmprof::validate_trace(trace->events);
    const auto expected = cmprof::oracle_cmetric(trace->events);
    const auto replay = cmprof::run_replay(trace->events, cmprof::Config{});
    const auto diff = cmprof::compare_cmetrics(expected, replay.stats.cm_hash,
                                               relative_tolerance);
    if (mismatches != nullptr) *mismatches = diff.size();
    if (diff.empty()) return CMPROF_OK;
    const cmprof::CmetricMismatch& m = diff.front();
    return fail(CMPROF_ERR_DIVERGENCE,
                fmt::format("tid {}: reference {} ns, engine {} ns "
                            "({} thread(s) differ)",
                            m.tid, m.expected, m.actual, diff.size()));
  });
}

cmprof_status cmprof_scenario_kind_parse(const char* name,
                                         cmprof_scenario_kind* out) {
  if (name == nullptr) return null_argument("name");
  if (out == nullptr) return null_argument("out");
  return guarded([&] {
    *out = from_kind(cmprof::parse_scenario_kind(name));
    return CMPROF_OK;
  });
}

cmprof_status cmprof_scenario_init(cmprof_scenario_kind kind,
                                   cmprof_scenario* scenario) {
  if (scenario == nullptr) return null_argument("scenario");
  return guarded([&] {
    const cmprof::Scenario s = cmprof::Scenario::defaults(to_kind(kind));
    const bool pipeline = s.kind == cmprof::ScenarioKind::kPipeline;
    *scenario = cmprof_scenario{
        kind,
        s.threads,
        s.cpus,
        s.seed,
        s.sample_period,
        s.parallel_ns,
        s.serial_ns,
        s.critical_ns,
        s.rounds,
        pipeline ? kDefaultStages : nullptr,
        pipeline ? std::size(kDefaultStages) : 0,
        pipeline ? kDefaultService : nullptr,
        pipeline ? std::size(kDefaultService) : 0,
        s.items,
        CMPROF_NMIN_HALF_TOTAL,
        1,
        s.stack_depth};
    return CMPROF_OK;
  });
}

cmprof_status cmprof_synth_generate(const cmprof_scenario* scenario,
                                    cmprof_synth** out) {
  if (scenario == nullptr) return null_argument("scenario");
  if (out == nullptr) return null_argument("out");
  *out = nullptr;
  if ((scenario->stage_count > 0 && scenario->stage_threads == nullptr) ||
      (scenario->service_count > 0 && scenario->stage_service_ns == nullptr)) {
    return null_argument("stage arrays");
  }
  return guarded([&] {
    cmprof::Scenario s;
    s.kind = to_kind(scenario->kind);
    s.threads = scenario->threads;
    s.cpus = scenario->cpus;
    s.seed = scenario->seed;
    s.sample_period = scenario->sample_period_ns;
    s.parallel_ns = scenario->parallel_ns;
    s.serial_ns = scenario->serial_ns;
    s.critical_ns = scenario->critical_ns;
    s.rounds = scenario->rounds;
    s.stage_threads.assign(scenario->stage_threads,
                           scenario->stage_threads + scenario->stage_count);
    s.stage_service_ns.assign(
        scenario->stage_service_ns,
        scenario->stage_service_ns + scenario->service_count);
    s.items = scenario->items;
    s.truth_nmin = to_policy(scenario->truth_nmin_mode, scenario->truth_nmin);
    s.stack_depth = scenario->stack_depth;

    cmprof::SynthOutput generated = cmprof::generate(s);
    auto synth = std::make_unique<cmprof_synth>();
    synth->scenario = std::move(s);
    synth->trace.events = std::move(generated.trace);
    synth->symbols.map = std::move(generated.symbols);
    synth->truth = std::move(generated.truth);
    synth->truth_json = cmprof::truth_to_json(synth->scenario, synth->truth);
    *out = synth.release();
    return CMPROF_OK;
  });
}

void cmprof_synth_free(cmprof_synth* synth) { delete synth; }

const cmprof_trace* cmprof_synth_trace(const cmprof_synth* synth) {
  return synth == nullptr ? nullptr : &synth->trace;
}

const cmprof_symbols* cmprof_synth_symbols(const cmprof_synth* synth) {
  return synth == nullptr ? nullptr : &synth->symbols;
}

const char* cmprof_synth_truth_json(const cmprof_synth* synth) {
  return synth == nullptr ? nullptr : synth->truth_json.c_str();
}

cmprof_status cmprof_synth_write(const cmprof_synth* synth,
                                 const char* prefix) {
  if (synth == nullptr) return null_argument("synth");
  if (prefix == nullptr) return null_argument("prefix");
  return guarded([&] {
    cmprof::write_trace_file(std::string(prefix) + ".jsonl",
                             synth->trace.events);
    cmprof::write_symbol_file(std::string(prefix) + ".sym", synth->symbols.map);
    const std::string truth_path = std::string(prefix) + ".truth.json";
    std::FILE* f = std::fopen(truth_path.c_str(), "wb");
    if (f == nullptr) {
      return fail(CMPROF_ERR_IO,
                  fmt::format("cannot write \"{}\"", truth_path));
    }
    const size_t n =
        std::fwrite(synth->truth_json.data(), 1, synth->truth_json.size(), f);
    const bool ok = std::fclose(f) == 0 && n == synth->truth_json.size();
    return ok ? CMPROF_OK
              : fail(CMPROF_ERR_IO,
                     fmt::format("cannot write \"{}\"", truth_path));
  });
}

}  // extern "C"

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

// cmprof command-line tool: analyze, synth and oracle subcommands on top of
// the C API.

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cmprof/cmprof.h"

namespace {

// Exit statuses.
constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDivergence = 3;

constexpr double kOracleTolerance = 1e-9;

struct TraceDeleter {
  void operator()(cmprof_trace* t) const { cmprof_trace_free(t); }
};
struct SymbolsDeleter {
  void operator()(cmprof_symbols* s) const { cmprof_symbols_free(s); }
};
struct AnalysisDeleter {
  void operator()(cmprof_analysis* a) const { cmprof_analysis_free(a); }
};
struct SynthDeleter {
  void operator()(cmprof_synth* s) const { cmprof_synth_free(s); }
};
struct StringDeleter {
  void operator()(char* s) const { cmprof_string_free(s); }
};

using TracePtr = std::unique_ptr<cmprof_trace, TraceDeleter>;
using SymbolsPtr = std::unique_ptr<cmprof_symbols, SymbolsDeleter>;
using AnalysisPtr = std::unique_ptr<cmprof_analysis, AnalysisDeleter>;
using SynthPtr = std::unique_ptr<cmprof_synth, SynthDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

void setup_logging() {
  auto logger = spdlog::stderr_color_st("cmprof");
  logger->set_pattern("cmprof: %l: %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::err);
  const char* env = std::getenv("CMPROF_LOG");
  if (env == nullptr) return;
  const std::string level = env;
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::warn);
    spdlog::warn("ignoring CMPROF_LOG=\"{}\" (expected error, info or debug)",
                 level);
    spdlog::set_level(spdlog::level::err);
  }
}

// Logs the last C API error and maps the status onto an exit code.
int report(cmprof_status status) {
  spdlog::error("{}", cmprof_last_error());
  switch (status) {
    case CMPROF_OK:
      return kExitOk;
    case CMPROF_ERR_INVALID_ARGUMENT:
      return kExitUsage;
    case CMPROF_ERR_DIVERGENCE:
      return kExitDivergence;
    default:
      return kExitFailure;
  }
}

int write_output(const std::string& path, const char* text) {
  if (path.empty() || path == "-") {
    std::fputs(text, stdout);
    return std::fflush(stdout) == 0 ? kExitOk : kExitFailure;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.close();
  if (!out) {
    spdlog::error("cannot write \"{}\"", path);
    return kExitFailure;
  }
  return kExitOk;
}

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, end) : std::to_string(v);
}

struct AnalyzeOptions {
  std::string trace;
  std::string symbols;
  std::uint32_t nmin = 0;
  bool nmin_half = false;
  std::uint32_t top = 5;
  std::uint32_t stack_depth = 16;
  std::string format = "text";
  std::string out;
};

int run_analyze(const AnalyzeOptions& opt, const CLI::Option* nmin_flag) {
  cmprof_trace* raw_trace = nullptr;
  if (cmprof_status s = cmprof_trace_load(opt.trace.c_str(), &raw_trace)) {
    report(s);
    return kExitFailure;
  }
  TracePtr trace(raw_trace);
  spdlog::info("loaded {} events from {}", cmprof_trace_event_count(raw_trace),
               opt.trace);

  SymbolsPtr symbols;
  if (!opt.symbols.empty()) {
    cmprof_symbols* raw = nullptr;
    if (cmprof_status s = cmprof_symbols_load(opt.symbols.c_str(), &raw)) {
      report(s);
      return kExitFailure;
    }
    symbols.reset(raw);
    spdlog::info("loaded {} symbol ranges", cmprof_symbols_count(raw));
  }

  cmprof_trace_stats stats{};
  if (cmprof_status s = cmprof_trace_validate(trace.get(), &stats)) {
    report(s);
    return kExitFailure;
  }
  for (size_t i = 0; i < stats.note_count; ++i) {
    spdlog::info("{}", cmprof_trace_note(trace.get(), i));
  }

  cmprof_config config;
  cmprof_config_init(&config);
  if (nmin_flag->count() > 0) {
    config.nmin_mode = CMPROF_NMIN_FIXED;
    config.nmin = opt.nmin;
  }
  config.top_n = opt.top;
  config.stack_depth = opt.stack_depth;

  cmprof_analysis* raw_analysis = nullptr;
  if (cmprof_status s = cmprof_analyze(trace.get(), &config, &raw_analysis)) {
    return report(s);
  }
  AnalysisPtr analysis(raw_analysis);
  spdlog::info("{} timeslices, {} critical",
               cmprof_analysis_total_slices(raw_analysis),
               cmprof_analysis_critical_slices(raw_analysis));

  char* raw_text = nullptr;
  const cmprof_format format =
      opt.format == "json" ? CMPROF_FORMAT_JSON : CMPROF_FORMAT_TEXT;
  if (cmprof_status s = cmprof_analysis_render(analysis.get(), symbols.get(),
                                               format, &raw_text)) {
    return report(s);
  }
  StringPtr text(raw_text);
  return write_output(opt.out, text.get());
}

struct SynthOptions {
  std::string kind;
  std::uint32_t threads = 0;
  std::uint32_t cpus = 0;
  std::uint64_t seed = 1;
  std::int64_t period = 0;
  std::int64_t parallel_ns = 0;
  std::int64_t serial_ns = 0;
  std::int64_t critical_ns = 0;
  std::uint32_t rounds = 0;
  std::vector<std::uint32_t> stages;
  std::vector<std::int64_t> service_ns;
  std::uint32_t items = 0;
  std::uint32_t truth_nmin = 0;
  std::uint32_t stack_depth = 0;
  std::string out;
};

int run_synth(const SynthOptions& opt, const CLI::App& cmd) {
  auto given = [&](const char* name) { return cmd.count(name) > 0; };

  cmprof_scenario_kind kind;
  if (cmprof_status s = cmprof_scenario_kind_parse(opt.kind.c_str(), &kind)) {
    return report(s);
  }
  cmprof_scenario sc;
  if (cmprof_status s = cmprof_scenario_init(kind, &sc)) return report(s);
  if (given("--threads")) sc.threads = opt.threads;
  if (given("--cpus")) sc.cpus = opt.cpus;
  if (given("--seed")) sc.seed = opt.seed;
  if (given("--period")) sc.sample_period_ns = opt.period;
  if (given("--parallel-ns")) sc.parallel_ns = opt.parallel_ns;
  if (given("--serial-ns")) sc.serial_ns = opt.serial_ns;
  if (given("--critical-ns")) sc.critical_ns = opt.critical_ns;
  if (given("--rounds")) sc.rounds = opt.rounds;
  if (given("--stages")) {
    sc.stage_threads = opt.stages.data();
    sc.stage_count = opt.stages.size();
  }
  if (given("--service-ns")) {
    sc.stage_service_ns = opt.service_ns.data();
    sc.service_count = opt.service_ns.size();
  }
  if (given("--items")) sc.items = opt.items;
  if (given("--truth-nmin")) {
    sc.truth_nmin_mode = CMPROF_NMIN_FIXED;
    sc.truth_nmin = opt.truth_nmin;
  }
  if (given("--stack-depth")) sc.stack_depth = opt.stack_depth;
  if (kind == CMPROF_SCENARIO_PIPELINE && given("--threads")) {
    spdlog::warn("--threads is ignored for pipeline; use --stages");
  }

  cmprof_synth* raw = nullptr;
  if (cmprof_status s = cmprof_synth_generate(&sc, &raw)) return report(s);
  SynthPtr synth(raw);

  const std::string prefix = opt.out.empty() ? opt.kind : opt.out;
  if (cmprof_status s = cmprof_synth_write(synth.get(), prefix.c_str())) {
    return report(s);
  }
  spdlog::info("wrote {0}.jsonl ({1} events), {0}.sym, {0}.truth.json", prefix,
               cmprof_trace_event_count(cmprof_synth_trace(synth.get())));
  return kExitOk;
}

struct OracleOptions {
  std::string trace;
  bool check = false;
};

int run_oracle(const OracleOptions& opt) {
  cmprof_trace* raw = nullptr;
  if (cmprof_status s = cmprof_trace_load(opt.trace.c_str(), &raw)) {
    report(s);
    return kExitFailure;
  }
  TracePtr trace(raw);

  size_t count = 0;
  if (cmprof_status s =
          cmprof_oracle_cmetric(trace.get(), nullptr, nullptr, 0, &count)) {
    report(s);
    return kExitFailure;
  }
  std::vector<std::uint32_t> tids(count);
  std::vector<double> values(count);
  if (cmprof_status s = cmprof_oracle_cmetric(trace.get(), tids.data(),
                                              values.data(), count, &count)) {
    report(s);
    return kExitFailure;
  }
  std::string line;
  for (size_t i = 0; i < count; ++i) {
    if (i > 0) line += ", ";
    line += std::to_string(tids[i]) + ": " + shortest(values[i]) + "ns";
  }
  std::puts(line.c_str());

  if (!opt.check) return kExitOk;
  size_t mismatches = 0;
  cmprof_status s =
      cmprof_oracle_check(trace.get(), kOracleTolerance, &mismatches);
  if (s == CMPROF_ERR_DIVERGENCE) return report(s);
  if (s != CMPROF_OK) {
    report(s);
    return kExitFailure;
  }
  spdlog::info("engine matches reference for {} thread(s)", count);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Offline serialization-bottleneck profiler for scheduler traces",
               "cmprof"};
  app.set_version_flag("--version", cmprof_version());
  app.require_subcommand(1);

  AnalyzeOptions analyze;
  CLI::App* analyze_cmd =
      app.add_subcommand("analyze", "Rank critical call paths of a trace");
  analyze_cmd->add_option("trace", analyze.trace, "Trace file (JSON Lines)")
      ->required();
  analyze_cmd->add_option("--symbols", analyze.symbols, "Symbol map file");
  CLI::Option* nmin_opt =
      analyze_cmd
          ->add_option("--nmin", analyze.nmin,
                       "Fixed parallelism threshold N_min")
          ->check(CLI::Range(1u, UINT32_MAX));
  CLI::Option* nmin_half_opt = analyze_cmd->add_flag(
      "--nmin-half", analyze.nmin_half,
      "N_min = half the live threads (default)");
  nmin_opt->excludes(nmin_half_opt);
  analyze_cmd->add_option("--top", analyze.top, "Number of paths to report")
      ->check(CLI::Range(1u, UINT32_MAX))
      ->capture_default_str();
  analyze_cmd
      ->add_option("--stack-depth", analyze.stack_depth,
                   "Frames kept per call path")
      ->check(CLI::Range(1u, UINT32_MAX))
      ->capture_default_str();
  analyze_cmd->add_option("--format", analyze.format, "Report format")
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();
  analyze_cmd->add_option("--out", analyze.out, "Output file (default stdout)");

  SynthOptions synth;
  CLI::App* synth_cmd =
      app.add_subcommand("synth", "Generate a synthetic trace with ground truth");
  synth_cmd
      ->add_option("kind", synth.kind, "serial | convoy | pipeline | balanced")
      ->required();
  synth_cmd->add_option("--threads", synth.threads, "Application threads");
  synth_cmd->add_option("--cpus", synth.cpus, "CPUs (default one per thread)");
  synth_cmd->add_option("--seed", synth.seed, "Sample ip seed");
  synth_cmd->add_option("--period", synth.period, "Sample period in ns");
  synth_cmd->add_option("--parallel-ns", synth.parallel_ns,
                        "Parallel phase length");
  synth_cmd->add_option("--serial-ns", synth.serial_ns, "Serial phase length");
  synth_cmd->add_option("--critical-ns", synth.critical_ns,
                        "Critical section length");
  synth_cmd->add_option("--rounds", synth.rounds, "Repetitions");
  synth_cmd->add_option("--stages", synth.stages, "Threads per pipeline stage")
      ->delimiter(',');
  synth_cmd
      ->add_option("--service-ns", synth.service_ns,
                   "Per-item service time per stage (one value or one per stage)")
      ->delimiter(',');
  synth_cmd->add_option("--items", synth.items, "Pipeline work items");
  synth_cmd->add_option("--truth-nmin", synth.truth_nmin,
                        "Fixed N_min for the ground truth (default n/2)");
  synth_cmd->add_option("--stack-depth", synth.stack_depth,
                        "Stack depth for the ground truth");
  synth_cmd->add_option("--out", synth.out,
                        "Output prefix (default: the kind)");

  OracleOptions oracle;
  CLI::App* oracle_cmd = app.add_subcommand(
      "oracle", "Per-thread CMetric from the reference computation");
  oracle_cmd->add_option("trace", oracle.trace, "Trace file")->required();
  oracle_cmd->add_flag("--check", oracle.check,
                       "Compare against the incremental engine");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (analyze_cmd->parsed()) return run_analyze(analyze, nmin_opt);
  if (synth_cmd->parsed()) return run_synth(synth, *synth_cmd);
  return run_oracle(oracle);
}

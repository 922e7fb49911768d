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
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "json.hpp"

namespace {

const char* kTraceA = CMPROF_TEST_DATA_DIR "/trace_a.jsonl";

struct TraceHandle {
  cmprof_trace* p = nullptr;
  ~TraceHandle() { cmprof_trace_free(p); }
};
struct AnalysisHandle {
  cmprof_analysis* p = nullptr;
  ~AnalysisHandle() { cmprof_analysis_free(p); }
};
struct SynthHandle {
  cmprof_synth* p = nullptr;
  ~SynthHandle() { cmprof_synth_free(p); }
};
struct SymbolsHandle {
  cmprof_symbols* p = nullptr;
  ~SymbolsHandle() { cmprof_symbols_free(p); }
};

std::string render(const cmprof_analysis* a, const cmprof_symbols* s,
                   cmprof_format f) {
  char* out = nullptr;
  EXPECT_EQ(cmprof_analysis_render(a, s, f, &out), CMPROF_OK)
      << cmprof_last_error();
  std::string text = out == nullptr ? "" : out;
  cmprof_string_free(out);
  return text;
}

TEST(CApi, VersionAndStatusStrings) {
  EXPECT_STREQ(cmprof_version(), "1.0.0");
  EXPECT_STREQ(cmprof_status_string(CMPROF_OK), "ok");
  EXPECT_STREQ(cmprof_status_string(CMPROF_ERR_DIVERGENCE), "divergence");
}

TEST(CApi, TraceLoadValidate) {
  TraceHandle t;
  ASSERT_EQ(cmprof_trace_load(kTraceA, &t.p), CMPROF_OK) << cmprof_last_error();
  EXPECT_EQ(cmprof_trace_event_count(t.p), 11u);
  cmprof_trace_stats stats;
  ASSERT_EQ(cmprof_trace_validate(t.p, &stats), CMPROF_OK);
  EXPECT_EQ(stats.switch_count, 6u);
  EXPECT_EQ(stats.wakeup_count, 1u);
  EXPECT_EQ(stats.new_count, 2u);
  EXPECT_EQ(stats.exit_count, 2u);
  EXPECT_EQ(stats.app_thread_count, 2u);
  EXPECT_EQ(stats.last_ts, 300);
  EXPECT_EQ(stats.note_count, 0u);
  EXPECT_EQ(cmprof_trace_note(t.p, 0), nullptr);
}

TEST(CApi, TraceErrors) {
  TraceHandle t;
  EXPECT_EQ(cmprof_trace_load("/nonexistent.jsonl", &t.p), CMPROF_ERR_IO);
  EXPECT_EQ(t.p, nullptr);
  EXPECT_NE(std::string(cmprof_last_error()).find("cannot open trace"),
            std::string::npos);

  const std::string bad = R"({"ev":"switch","ts":5,"prev":1})";
  EXPECT_EQ(cmprof_trace_parse(bad.data(), bad.size(), &t.p), CMPROF_ERR_PARSE);
  EXPECT_NE(std::string(cmprof_last_error()).find("missing field \"next\""),
            std::string::npos);

  EXPECT_EQ(cmprof_trace_load(nullptr, &t.p), CMPROF_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(cmprof_trace_load(kTraceA, nullptr), CMPROF_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(cmprof_trace_validate(nullptr, nullptr),
            CMPROF_ERR_INVALID_ARGUMENT);
}

TEST(CApi, ValidationAndConsistencyErrors) {
  const std::string regress =
      "{\"ev\":\"wakeup\",\"ts\":10,\"tid\":1}\n"
      "{\"ev\":\"wakeup\",\"ts\":5,\"tid\":1}\n";
  TraceHandle t;
  ASSERT_EQ(cmprof_trace_parse(regress.data(), regress.size(), &t.p), CMPROF_OK);
  AnalysisHandle a;
  EXPECT_EQ(cmprof_analyze(t.p, nullptr, &a.p), CMPROF_ERR_VALIDATION);
  EXPECT_NE(std::string(cmprof_last_error()).find("timestamp regression"),
            std::string::npos);

  const std::string idle_out =
      "{\"ev\":\"new\",\"ts\":0,\"tid\":1,\"comm\":\"a\"}\n"
      "{\"ev\":\"switch\",\"ts\":5,\"cpu\":0,\"prev\":1,\"prev_state\":\"B\","
      "\"next\":0}\n";
  TraceHandle u;
  ASSERT_EQ(cmprof_trace_parse(idle_out.data(), idle_out.size(), &u.p),
            CMPROF_OK);
  EXPECT_EQ(cmprof_analyze(u.p, nullptr, &a.p), CMPROF_ERR_CONSISTENCY);
  EXPECT_EQ(a.p, nullptr);
}

TEST(CApi, AnalyzeTraceA) {
  TraceHandle t;
  ASSERT_EQ(cmprof_trace_load(kTraceA, &t.p), CMPROF_OK);
  cmprof_config cfg;
  cmprof_config_init(&cfg);
  EXPECT_EQ(cfg.nmin_mode, CMPROF_NMIN_HALF_TOTAL);
  EXPECT_EQ(cfg.stack_depth, 16u);
  EXPECT_EQ(cfg.top_n, 5u);
  cfg.nmin_mode = CMPROF_NMIN_FIXED;
  cfg.nmin = 2;
  AnalysisHandle a;
  ASSERT_EQ(cmprof_analyze(t.p, &cfg, &a.p), CMPROF_OK) << cmprof_last_error();
  EXPECT_EQ(cmprof_analysis_total_slices(a.p), 3u);
  EXPECT_EQ(cmprof_analysis_critical_slices(a.p), 1u);
  EXPECT_DOUBLE_EQ(cmprof_analysis_cr(a.p), 1.0 / 3.0);
  EXPECT_EQ(cmprof_analysis_path_count(a.p), 1u);
  ASSERT_EQ(cmprof_analysis_thread_count(a.p), 2u);
  uint32_t tid = 0;
  double cm = 0;
  ASSERT_EQ(cmprof_analysis_thread(a.p, 0, &tid, &cm), CMPROF_OK);
  EXPECT_EQ(tid, 1u);
  EXPECT_EQ(cm, 175.0);
  EXPECT_EQ(cmprof_analysis_thread(a.p, 2, &tid, &cm),
            CMPROF_ERR_INVALID_ARGUMENT);

  const std::string text = render(a.p, nullptr, CMPROF_FORMAT_TEXT);
  EXPECT_NE(text.find("Critical Path 1:"), std::string::npos);
  auto doc = nlohmann::json::parse(render(a.p, nullptr, CMPROF_FORMAT_JSON));
  EXPECT_EQ(doc["summary"]["critical_slices"], 1);
  char* out = nullptr;
  EXPECT_EQ(cmprof_analysis_render(a.p, nullptr, static_cast<cmprof_format>(9),
                                   &out),
            CMPROF_ERR_INVALID_ARGUMENT);
}

TEST(CApi, BadConfig) {
  TraceHandle t;
  ASSERT_EQ(cmprof_trace_load(kTraceA, &t.p), CMPROF_OK);
  cmprof_config cfg;
  cmprof_config_init(&cfg);
  cfg.nmin_mode = CMPROF_NMIN_FIXED;
  cfg.nmin = 0;
  AnalysisHandle a;
  EXPECT_EQ(cmprof_analyze(t.p, &cfg, &a.p), CMPROF_ERR_INVALID_ARGUMENT);
  cmprof_config_init(&cfg);
  cfg.top_n = 0;
  EXPECT_EQ(cmprof_analyze(t.p, &cfg, &a.p), CMPROF_ERR_INVALID_ARGUMENT);
}

TEST(CApi, Oracle) {
  TraceHandle t;
  ASSERT_EQ(cmprof_trace_load(kTraceA, &t.p), CMPROF_OK);
  size_t count = 0;
  ASSERT_EQ(cmprof_oracle_cmetric(t.p, nullptr, nullptr, 0, &count), CMPROF_OK);
  ASSERT_EQ(count, 2u);
  std::vector<uint32_t> tids(count);
  std::vector<double> values(count);
  ASSERT_EQ(cmprof_oracle_cmetric(t.p, tids.data(), values.data(), count,
                                  &count),
            CMPROF_OK);
  EXPECT_EQ(tids, (std::vector<uint32_t>{1, 2}));
  EXPECT_EQ(values, (std::vector<double>{175.0, 100.0}));
  size_t mismatches = 7;
  EXPECT_EQ(cmprof_oracle_check(t.p, 1e-9, &mismatches), CMPROF_OK);
  EXPECT_EQ(mismatches, 0u);
  EXPECT_EQ(cmprof_oracle_check(t.p, -1.0, nullptr),
            CMPROF_ERR_INVALID_ARGUMENT);
}

TEST(CApi, Symbols) {
  SymbolsHandle s;
  ASSERT_EQ(cmprof_symbols_load(CMPROF_TEST_DATA_DIR "/stack_top.sym", &s.p),
            CMPROF_OK);
  EXPECT_EQ(cmprof_symbols_count(s.p), 10u);
  cmprof_symbol_info info;
  ASSERT_EQ(cmprof_symbols_lookup(s.p, 0x500020, &info), 1);
  EXPECT_STREQ(info.function, "sync_array_reserve_cell");
  EXPECT_STREQ(info.file, "sync0arr.cc");
  EXPECT_EQ(info.line, 389u);
  EXPECT_EQ(cmprof_symbols_lookup(s.p, 0x400000, &info), 0);
  EXPECT_EQ(cmprof_symbols_lookup(nullptr, 0x500020, &info), 0);
}

TEST(CApi, SynthSerial) {
  cmprof_scenario_kind kind;
  ASSERT_EQ(cmprof_scenario_kind_parse("serial", &kind), CMPROF_OK);
  EXPECT_EQ(kind, CMPROF_SCENARIO_SERIAL_PHASE);
  EXPECT_EQ(cmprof_scenario_kind_parse("nope", &kind),
            CMPROF_ERR_INVALID_ARGUMENT);
  cmprof_scenario sc;
  ASSERT_EQ(cmprof_scenario_init(kind, &sc), CMPROF_OK);
  EXPECT_EQ(sc.threads, 4u);
  EXPECT_EQ(sc.parallel_ns, 100'000);
  EXPECT_EQ(sc.serial_ns, 400'000);

  SynthHandle synth;
  ASSERT_EQ(cmprof_synth_generate(&sc, &synth.p), CMPROF_OK)
      << cmprof_last_error();
  auto truth = nlohmann::json::parse(cmprof_synth_truth_json(synth.p));
  EXPECT_EQ(truth["cmetric_ns"]["1"], 425'000.0);

  cmprof_config cfg;
  cmprof_config_init(&cfg);
  cfg.nmin_mode = CMPROF_NMIN_FIXED;
  cfg.nmin = 2;
  AnalysisHandle a;
  ASSERT_EQ(cmprof_analyze(cmprof_synth_trace(synth.p), &cfg, &a.p), CMPROF_OK);
  const std::string text =
      render(a.p, cmprof_synth_symbols(synth.p), CMPROF_FORMAT_TEXT);
  EXPECT_EQ(text.rfind("Critical Path 1:\n\nserial_work()\n", 0), 0u) << text;

  const auto dir = std::filesystem::temp_directory_path() / "cmprof_capi_test";
  std::filesystem::create_directories(dir);
  const std::string prefix = (dir / "s").string();
  ASSERT_EQ(cmprof_synth_write(synth.p, prefix.c_str()), CMPROF_OK);
  for (const char* ext : {".jsonl", ".sym", ".truth.json"}) {
    EXPECT_TRUE(std::filesystem::exists(prefix + ext)) << ext;
  }
  TraceHandle reread;
  ASSERT_EQ(cmprof_trace_load((prefix + ".jsonl").c_str(), &reread.p),
            CMPROF_OK);
  EXPECT_EQ(cmprof_trace_event_count(reread.p),
            cmprof_trace_event_count(cmprof_synth_trace(synth.p)));
  std::filesystem::remove_all(dir);
}

TEST(CApi, SynthPipelineDefaultsAndErrors) {
  cmprof_scenario sc;
  ASSERT_EQ(cmprof_scenario_init(CMPROF_SCENARIO_PIPELINE, &sc), CMPROF_OK);
  ASSERT_EQ(sc.stage_count, 3u);
  EXPECT_EQ(sc.stage_threads[1], 4u);
  SynthHandle synth;
  EXPECT_EQ(cmprof_synth_generate(&sc, &synth.p), CMPROF_OK);

  cmprof_scenario bad;
  ASSERT_EQ(cmprof_scenario_init(CMPROF_SCENARIO_SERIAL_PHASE, &bad),
            CMPROF_OK);
  bad.threads = 0;
  SynthHandle none;
  EXPECT_EQ(cmprof_synth_generate(&bad, &none.p), CMPROF_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(none.p, nullptr);
  bad.threads = 2;
  bad.stage_count = 2;
  bad.stage_threads = nullptr;
  EXPECT_EQ(cmprof_synth_generate(&bad, &none.p), CMPROF_ERR_INVALID_ARGUMENT);
}

TEST(CApi, LastErrorIsPerThread) {
  TraceHandle t;
  ASSERT_EQ(cmprof_trace_load("/nonexistent.jsonl", &t.p), CMPROF_ERR_IO);
  std::string other;
  std::thread([&] { other = cmprof_last_error(); }).join();
  EXPECT_EQ(other, "");
  EXPECT_NE(std::string(cmprof_last_error()), "");
}

TEST(CApi, SaveRoundTrip) {
  TraceHandle t;
  ASSERT_EQ(cmprof_trace_load(kTraceA, &t.p), CMPROF_OK);
  const auto path =
      (std::filesystem::temp_directory_path() / "cmprof_capi_save.jsonl")
          .string();
  ASSERT_EQ(cmprof_trace_save(t.p, path.c_str()), CMPROF_OK);
  TraceHandle u;
  ASSERT_EQ(cmprof_trace_load(path.c_str(), &u.p), CMPROF_OK);
  EXPECT_EQ(cmprof_trace_event_count(u.p), 11u);
  std::remove(path.c_str());
}

}  // namespace

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

#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "aggregate.hpp"
#include "error.hpp"
#include "json.hpp"
#include "oracle.hpp"
#include "symbolize.hpp"

namespace cmprof {
namespace {

struct Analysis {
  ReplayResult replay;
  std::vector<PathAggregate> ranked;
};

Analysis analyze(const SynthOutput& out, NminPolicy nmin) {
  Config cfg;
  cfg.nmin = nmin;
  Analysis a;
  validate_trace(out.trace);
  a.replay = run_replay(out.trace, cfg);
  a.ranked = rank_top_n(merge_paths(a.replay.slices), 5);
  return a;
}

std::string leaf_function(const SynthOutput& out, const Analysis& a) {
  if (a.ranked.empty() || a.ranked[0].path.empty()) return {};
  const SymbolEntry* e = lookup_address(out.symbols, a.ranked[0].path[0]);
  return e ? e->function : std::string();
}

void expect_matches_truth(const SynthOutput& out, const Analysis& a) {
  EXPECT_TRUE(
      compare_cmetrics(out.truth.cmetric, a.replay.stats.cm_hash, 1e-9).empty());
  EXPECT_EQ(a.replay.stats.total_slices, out.truth.total_slices);
  EXPECT_EQ(a.replay.stats.critical_slices, out.truth.critical_slices);
  EXPECT_EQ(a.replay.stats.cr, out.truth.cr);
  if (out.truth.top_path.empty()) {
    EXPECT_TRUE(a.ranked.empty());
  } else {
    ASSERT_FALSE(a.ranked.empty());
    EXPECT_EQ(a.ranked[0].path, out.truth.top_path);
  }
}

TEST(SynthSerialPhase, ClosedForm) {
  Scenario sc = Scenario::defaults(ScenarioKind::kSerialPhase);
  sc.threads = 4;
  sc.parallel_ns = 100'000;
  sc.serial_ns = 400'000;
  auto cm = closed_form_cmetric(sc);
  EXPECT_EQ(cm, (std::map<Tid, double>{
                    {1, 425'000.0}, {2, 25'000.0}, {3, 25'000.0}, {4, 25'000.0}}));
}

TEST(SynthSerialPhase, ReplayFindsSerialFunction) {
  Scenario sc = Scenario::defaults(ScenarioKind::kSerialPhase);
  sc.truth_nmin = NminPolicy::fixed(2);
  SynthOutput out = generate(sc);
  Analysis a = analyze(out, NminPolicy::fixed(2));
  expect_matches_truth(out, a);
  EXPECT_NEAR(a.replay.stats.cm_hash.at(1), 425'000.0, 425'000.0 * 1e-9);
  EXPECT_EQ(a.replay.stats.cr, 0.25);
  EXPECT_EQ(leaf_function(out, a), "serial_work");
  EXPECT_EQ(out.truth.top_function, "serial_work");
}

TEST(SynthBalanced, NoCriticalSlicesAtHalf) {
  Scenario sc = Scenario::defaults(ScenarioKind::kBalanced);
  SynthOutput out = generate(sc);
  Analysis a = analyze(out, NminPolicy::half_total());
  expect_matches_truth(out, a);
  for (Tid t = 1; t <= 4; ++t) {
    EXPECT_EQ(a.replay.stats.cm_hash.at(t), 25'000.0);
  }
  EXPECT_EQ(a.replay.stats.critical_slices, 0u);
  EXPECT_TRUE(a.ranked.empty());
}

TEST(SynthLockConvoy, TwoThreadsAlternate) {
  Scenario sc = Scenario::defaults(ScenarioKind::kLockConvoy);
  sc.threads = 2;
  sc.critical_ns = 10'000;
  sc.parallel_ns = 0;
  sc.rounds = 3;
  sc.truth_nmin = NminPolicy::fixed(2);
  SynthOutput out = generate(sc);
  Analysis a = analyze(out, NminPolicy::fixed(2));
  expect_matches_truth(out, a);
  EXPECT_EQ(a.replay.stats.cm_hash,
            (std::map<Tid, double>{{1, 30'000.0}, {2, 30'000.0}}));
  ASSERT_EQ(a.ranked.size(), 1u);
  EXPECT_EQ(leaf_function(out, a), "critical_section");
  for (const auto& rec : a.replay.slices) EXPECT_EQ(rec.threads_av, 1.0);
}

TEST(SynthLockConvoy, WavesMatchClosedForm) {
  Scenario sc = Scenario::defaults(ScenarioKind::kLockConvoy);
  sc.threads = 8;
  sc.cpus = 4;
  sc.parallel_ns = 200'000;
  sc.truth_nmin = NminPolicy::fixed(4);
  SynthOutput out = generate(sc);
  Analysis a = analyze(out, NminPolicy::fixed(4));
  expect_matches_truth(out, a);
  EXPECT_EQ(leaf_function(out, a), "critical_section");
}

TEST(SynthPipeline, TruthFromSchedule) {
  Scenario sc = Scenario::defaults(ScenarioKind::kPipeline);
  sc.stage_threads = {1, 3, 2, 1};
  sc.stage_service_ns = {10'000, 60'000, 40'000, 15'000};
  sc.items = 50;
  sc.sample_period = 7'000;
  SynthOutput out = generate(sc);
  Analysis a = analyze(out, NminPolicy::half_total());
  expect_matches_truth(out, a);
  EXPECT_THROW(closed_form_cmetric(sc), Error);
}

TEST(Synth, Deterministic) {
  for (auto kind : {ScenarioKind::kSerialPhase, ScenarioKind::kLockConvoy,
                    ScenarioKind::kPipeline, ScenarioKind::kBalanced}) {
    Scenario sc = Scenario::defaults(kind);
    sc.sample_period = 5'000;
    SynthOutput a = generate(sc);
    SynthOutput b = generate(sc);
    EXPECT_EQ(a.trace, b.trace);
    EXPECT_EQ(truth_to_json(sc, a.truth), truth_to_json(sc, b.truth));
    sc.seed = 99;
    SynthOutput c = generate(sc);
    ASSERT_EQ(a.trace.size(), c.trace.size());
    EXPECT_NE(a.trace, c.trace);
  }
}

TEST(Synth, SamplesLieInsideRunningFunction) {
  Scenario sc = Scenario::defaults(ScenarioKind::kSerialPhase);
  sc.sample_period = 1'000;
  SynthOutput out = generate(sc);
  std::size_t samples = 0;
  for (const auto& ev : out.trace) {
    if (const auto* s = std::get_if<Sample>(&ev)) {
      const SymbolEntry* e = lookup_address(out.symbols, s->ip);
      ASSERT_NE(e, nullptr);
      const bool serial_phase = s->ts >= sc.parallel_ns;
      EXPECT_EQ(e->function, serial_phase ? "serial_work" : "parallel_work");
      EXPECT_TRUE(!serial_phase || s->tid == 1);
      ++samples;
    }
  }
  // 100 grid points in the parallel phase on 4 threads, 400 serial.
  EXPECT_EQ(samples, 4u * 100u + 400u);
}

TEST(Synth, ScenarioValidation) {
  Scenario sc = Scenario::defaults(ScenarioKind::kSerialPhase);
  sc.threads = 0;
  EXPECT_THROW(sc.validate(), Error);
  sc.threads = 4;
  sc.cpus = 2;
  EXPECT_THROW(sc.validate(), Error);
  sc.cpus = 0;
  sc.serial_ns = 0;
  EXPECT_THROW(sc.validate(), Error);

  Scenario p = Scenario::defaults(ScenarioKind::kPipeline);
  p.stage_threads = {1, 0, 1};
  EXPECT_THROW(p.validate(), Error);
  p.stage_threads = {1, 2, 1};
  p.stage_service_ns = {1, 2};
  EXPECT_THROW(p.validate(), Error);
  p.stage_service_ns = {1, 2, 3};
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(p.thread_count(), 4u);

  Scenario c = Scenario::defaults(ScenarioKind::kLockConvoy);
  c.sample_period = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Synth, ScenarioNames) {
  EXPECT_EQ(parse_scenario_kind("serial"), ScenarioKind::kSerialPhase);
  EXPECT_EQ(parse_scenario_kind("lock-convoy"), ScenarioKind::kLockConvoy);
  EXPECT_EQ(parse_scenario_kind("pipeline"), ScenarioKind::kPipeline);
  EXPECT_EQ(parse_scenario_kind("balanced"), ScenarioKind::kBalanced);
  EXPECT_THROW(parse_scenario_kind("chaos"), Error);
  for (auto kind : {ScenarioKind::kSerialPhase, ScenarioKind::kLockConvoy,
                    ScenarioKind::kPipeline, ScenarioKind::kBalanced}) {
    EXPECT_EQ(parse_scenario_kind(scenario_name(kind)), kind);
  }
}

TEST(Synth, WritesThreeFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "cmprof_synth_test";
  std::filesystem::create_directories(dir);
  Scenario sc = Scenario::defaults(ScenarioKind::kSerialPhase);
  SynthOutput out = generate(sc);
  write_synth_files(sc, out, dir / "serial");
  EXPECT_EQ(read_trace_file(dir / "serial.jsonl"), out.trace);
  EXPECT_EQ(read_symbol_file(dir / "serial.sym").size(), out.symbols.size());
  std::ifstream truth(dir / "serial.truth.json");
  auto doc = nlohmann::json::parse(truth);
  EXPECT_EQ(doc["scenario"], "serial");
  EXPECT_EQ(doc["cmetric_ns"]["1"], 425'000.0);
  EXPECT_EQ(doc["top_function"], "serial_work");
  std::filesystem::remove_all(dir);
}

// Randomized scenarios of every kind must replay to their ground truth.
TEST(SynthProperty, ReplayReproducesTruth) {
  std::mt19937_64 rng(41);
  auto pick = [&](std::uint32_t lo, std::uint32_t hi) {
    return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng);
  };
  for (int i = 0; i < 120; ++i) {
    const auto kind = static_cast<ScenarioKind>(i % 4);
    Scenario sc = Scenario::defaults(kind);
    sc.seed = i;
    sc.sample_period = pick(500, 20'000);
    sc.rounds = pick(1, 4);
    sc.parallel_ns = pick(kind == ScenarioKind::kLockConvoy ? 0 : 1, 90'000);
    sc.serial_ns = pick(1, 90'000);
    sc.critical_ns = pick(1, 30'000);
    sc.threads = pick(1, 12);
    sc.cpus = kind == ScenarioKind::kLockConvoy ? pick(1, 12) : 0;
    if (kind == ScenarioKind::kPipeline) {
      sc.stage_threads.assign(pick(1, 5), 0);
      for (auto& m : sc.stage_threads) m = pick(1, 4);
      sc.stage_service_ns.assign(sc.stage_threads.size(), 0);
      for (auto& s : sc.stage_service_ns) s = pick(1, 50'000);
      sc.items = pick(1, 60);
      sc.cpus = pick(0, 6);
    }
    sc.truth_nmin = i % 3 == 0 ? NminPolicy::half_total()
                               : NminPolicy::fixed(pick(1, 6));
    SynthOutput out = generate(sc);
    Analysis a = analyze(out, sc.truth_nmin);
    SCOPED_TRACE(truth_to_json(sc, out.truth));
    expect_matches_truth(out, a);
    EXPECT_TRUE(compare_cmetrics(out.truth.cmetric, oracle_cmetric(out.trace),
                                 1e-9)
                    .empty());
  }
}

}  // namespace
}  // namespace cmprof

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

// Post-processing of critical timeslices: slices with element-wise identical
// call paths are merged (CMetric summed, sampled addresses counted), and the
// paths with the largest merged CMetric are reported as bottlenecks.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "replay.hpp"

namespace cmprof {

// Raw addresses, top of stack first. The empty key collects triggered slices
// that carried no stack.
using CallPathKey = std::vector<Address>;

using AddressKey = std::pair<Address, Provenance>;

struct PathAggregate {
  CallPathKey path;
  double total_cmetric = 0.0;
  std::uint64_t slice_count = 0;
  std::map<AddressKey, std::uint64_t> addr_freq;

  std::uint64_t sample_total() const;
  bool operator==(const PathAggregate&) const = default;
};

using PathMap = std::map<CallPathKey, PathAggregate>;

// Ignores non-triggered records. Member CMetrics are summed in ascending
// ts_id order, so the result does not depend on input order.
PathMap merge_paths(std::span<const TimesliceRecord> records);

// Descending total CMetric, ties broken by the lexicographically smaller
// path. Throws Error(kInvalidArgument) for n == 0.
std::vector<PathAggregate> rank_top_n(const PathMap& aggregates, std::size_t n);

struct ThreadCmetric {
  Tid tid = 0;
  double cmetric = 0.0;
};

struct Summary {
  std::uint64_t total_slices = 0;
  std::uint64_t critical_slices = 0;
  double cr = 0.0;
  double cr_percent = 0.0;
  std::vector<ThreadCmetric> threads;  // descending CMetric, then tid
  std::size_t distinct_paths = 0;
  Nanos span = 0;
};

Summary compute_summary(const ReplayStats& stats, const PathMap& aggregates);

}  // namespace cmprof

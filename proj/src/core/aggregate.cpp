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

#include "aggregate.hpp"

#include <algorithm>

#include "error.hpp"

namespace cmprof {

std::uint64_t PathAggregate::sample_total() const {
  std::uint64_t total = 0;
  for (const auto& [key, count] : addr_freq) total += count;
  return total;
}

PathMap merge_paths(std::span<const TimesliceRecord> records) {
  std::vector<const TimesliceRecord*> triggered;
  for (const TimesliceRecord& r : records) {
    if (r.triggered) triggered.push_back(&r);
  }
  std::sort(triggered.begin(), triggered.end(),
            [](const TimesliceRecord* a, const TimesliceRecord* b) {
              return a->ts_id < b->ts_id;
            });

  PathMap merged;
  for (const TimesliceRecord* r : triggered) {
    auto [it, inserted] = merged.try_emplace(r->stack);
    PathAggregate& agg = it->second;
    if (inserted) agg.path = r->stack;
    agg.total_cmetric += r->cmetric;
    ++agg.slice_count;
    for (const SampleRef& s : r->samples) ++agg.addr_freq[{s.ip, s.provenance}];
  }
  return merged;
}

std::vector<PathAggregate> rank_top_n(const PathMap& aggregates,
                                      std::size_t n) {
  if (n == 0) throw Error(ErrorKind::kInvalidArgument, "top N must be >= 1");
  std::vector<const PathAggregate*> order;
  order.reserve(aggregates.size());
  for (const auto& [key, agg] : aggregates) order.push_back(&agg);
  // The map is already in lexicographic key order, so a stable sort on the
  // total alone yields the documented tie-break.
  std::stable_sort(order.begin(), order.end(),
                   [](const PathAggregate* a, const PathAggregate* b) {
                     return a->total_cmetric > b->total_cmetric;
                   });
  order.resize(std::min(n, order.size()));

  std::vector<PathAggregate> ranked;
  ranked.reserve(order.size());
  for (const PathAggregate* p : order) ranked.push_back(*p);
  return ranked;
}

Summary compute_summary(const ReplayStats& stats, const PathMap& aggregates) {
  Summary s;
  s.total_slices = stats.total_slices;
  s.critical_slices = stats.critical_slices;
  s.cr = stats.cr;
  s.cr_percent = stats.cr * 100.0;
  s.distinct_paths = aggregates.size();
  s.span = stats.span();
  for (const auto& [tid, cm] : stats.cm_hash) s.threads.push_back({tid, cm});
  std::stable_sort(s.threads.begin(), s.threads.end(),
                   [](const ThreadCmetric& a, const ThreadCmetric& b) {
                     return a.cmetric > b.cmetric;
                   });
  return s;
}

}  // namespace cmprof

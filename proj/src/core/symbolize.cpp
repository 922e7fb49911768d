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

#include "symbolize.hpp"

#include <algorithm>
#include <map>
#include <tuple>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"

namespace cmprof {

namespace {

using nlohmann::ordered_json;

std::string display_name(std::string_view function) {
  if (function.find('(') != std::string_view::npos) return std::string(function);
  return fmt::format("{}()", function);
}

struct LineKey {
  std::string file;
  std::uint32_t line = 0;
  bool stack_top = false;
  auto operator<=>(const LineKey&) const = default;
};

struct FunctionRow {
  std::string name;  // display name, or hex address when unknown
  bool known = true;
  Address unknown_addr = 0;
  std::uint64_t total = 0;
  std::map<LineKey, std::uint64_t> lines;
};

// Groups a path's address frequencies by function, then by source line.
std::vector<FunctionRow> frequency_table(const PathAggregate& agg,
                                         const SymbolMap& map) {
  std::map<std::string, FunctionRow> rows;
  for (const auto& [key, count] : agg.addr_freq) {
    const auto [addr, provenance] = key;
    const SymbolEntry* sym = lookup_address(map, addr);
    const std::string name =
        sym ? display_name(sym->function) : format_address(addr);
    FunctionRow& row = rows[name];
    row.name = name;
    row.total += count;
    if (sym) {
      row.lines[{sym->file, sym->line,
                 provenance == Provenance::kStackTop}] += count;
    } else {
      row.known = false;
      row.unknown_addr = addr;
    }
  }
  std::vector<FunctionRow> out;
  for (auto& [name, row] : rows) out.push_back(std::move(row));
  std::stable_sort(out.begin(), out.end(),
                   [](const FunctionRow& a, const FunctionRow& b) {
                     return a.total > b.total;
                   });
  return out;
}

std::vector<std::pair<LineKey, std::uint64_t>> sorted_lines(
    const FunctionRow& row) {
  std::vector<std::pair<LineKey, std::uint64_t>> lines(row.lines.begin(),
                                                       row.lines.end());
  std::stable_sort(lines.begin(), lines.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;
                   });
  return lines;
}

std::string frame_text(const SymbolMap& map, Address addr) {
  const SymbolEntry* sym = lookup_address(map, addr);
  return sym ? display_name(sym->function) : format_address(addr);
}

std::string plural(std::uint64_t n, std::string_view word) {
  return fmt::format("{} {}{}", n, word, n == 1 ? "" : "s");
}

std::string render_text(std::span<const PathAggregate> ranked,
                        const SymbolMap& map, const Summary& summary) {
  std::string out;
  auto line = [&out](std::string_view s) {
    out += s;
    out += '\n';
  };

  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const PathAggregate& agg = ranked[k];
    line(fmt::format("Critical Path {}:", k + 1));
    line("");
    if (agg.path.empty()) {
      line("<no stack>");
    } else {
      for (std::size_t i = 0; i < agg.path.size(); ++i) {
        line(fmt::format("{}{}", i == 0 ? "" : "<---",
                         frame_text(map, agg.path[i])));
      }
    }
    line("");
    line(fmt::format("CMetric: {:.3f} ns across {}", agg.total_cmetric,
                     plural(agg.slice_count, "timeslice")));
    line("");
    line("Functions and lines + frequency");
    line("-------------------------------");
    const auto table = frequency_table(agg, map);
    if (table.empty()) line("(no samples)");
    for (const FunctionRow& row : table) {
      line(fmt::format("{} -- {}", row.name, row.total));
      for (const auto& [key, count] : sorted_lines(row)) {
        line(fmt::format("  {}:{}{} -- {}", key.file, key.line,
                         key.stack_top ? " (StackTop)" : "", count));
      }
    }
    line("");
  }

  line("Summary");
  line("-------");
  line(fmt::format("Total timeslices: {}", summary.total_slices));
  line(fmt::format("{} (CR = {:.4f}, {:.2f}%)",
                   plural(summary.critical_slices, "critical timeslice"),
                   summary.cr, summary.cr_percent));
  line(fmt::format("Distinct critical call paths: {}", summary.distinct_paths));
  line(fmt::format("Trace span: {} ns", summary.span));
  line("");
  line("Per-thread CMetric");
  line("------------------");
  line(fmt::format("{:<10} {:>18}", "tid", "CMetric (ns)"));
  for (const ThreadCmetric& t : summary.threads) {
    line(fmt::format("{:<10} {:>18.3f}", t.tid, t.cmetric));
  }
  return out;
}

ordered_json frame_json(const SymbolMap& map, Address addr) {
  ordered_json f;
  f["addr"] = addr;
  if (const SymbolEntry* sym = lookup_address(map, addr)) {
    f["func"] = sym->function;
    f["file"] = sym->file;
    f["line"] = sym->line;
  } else {
    f["func"] = nullptr;
  }
  return f;
}

std::string render_json(std::span<const PathAggregate> ranked,
                        const SymbolMap& map, const Summary& summary) {
  ordered_json doc;
  doc["version"] = kReportSchemaVersion;
  doc["paths"] = ordered_json::array();
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const PathAggregate& agg = ranked[k];
    ordered_json p;
    p["rank"] = k + 1;
    p["total_cmetric_ns"] = agg.total_cmetric;
    p["slice_count"] = agg.slice_count;
    p["frames"] = ordered_json::array();
    for (Address a : agg.path) p["frames"].push_back(frame_json(map, a));
    p["functions"] = ordered_json::array();
    for (const FunctionRow& row : frequency_table(agg, map)) {
      ordered_json f;
      f["name"] = row.name;
      f["known"] = row.known;
      if (!row.known) f["addr"] = row.unknown_addr;
      f["total"] = row.total;
      f["lines"] = ordered_json::array();
      for (const auto& [key, count] : sorted_lines(row)) {
        f["lines"].push_back({{"file", key.file},
                              {"line", key.line},
                              {"stack_top", key.stack_top},
                              {"count", count}});
      }
      p["functions"].push_back(std::move(f));
    }
    doc["paths"].push_back(std::move(p));
  }

  ordered_json s;
  s["total_slices"] = summary.total_slices;
  s["critical_slices"] = summary.critical_slices;
  s["cr"] = summary.cr;
  s["cr_percent"] = summary.cr_percent;
  s["distinct_paths"] = summary.distinct_paths;
  s["span_ns"] = summary.span;
  s["threads"] = ordered_json::array();
  for (const ThreadCmetric& t : summary.threads) {
    s["threads"].push_back({{"tid", t.tid}, {"cmetric_ns", t.cmetric}});
  }
  doc["summary"] = std::move(s);
  return doc.dump(2) + "\n";
}

}  // namespace

const SymbolEntry* lookup_address(const SymbolMap& map, Address addr) {
  auto entries = map.entries();
  auto it = std::upper_bound(
      entries.begin(), entries.end(), addr,
      [](Address a, const SymbolEntry& e) { return a < e.start; });
  if (it == entries.begin()) return nullptr;
  --it;
  return addr < it->end ? &*it : nullptr;
}

std::string format_address(Address addr) {
  return fmt::format("{:#010x}", addr);
}

std::string render_report(std::span<const PathAggregate> ranked,
                          const SymbolMap& map, const Summary& summary,
                          ReportFormat format) {
  return format == ReportFormat::kJson ? render_json(ranked, map, summary)
                                       : render_text(ranked, map, summary);
}

}  // namespace cmprof

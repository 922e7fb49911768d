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

// Address symbolization against a SymbolMap and rendering of the bottleneck
// report, both as text (critical paths leaf-first, joined by "<---", followed
// by a function/line frequency table) and as JSON with the same content.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "aggregate.hpp"
#include "trace_model.hpp"

namespace cmprof {

// Entry containing addr, or nullptr. O(log n).
const SymbolEntry* lookup_address(const SymbolMap& map, Address addr);

// "0x" followed by at least eight hex digits.
std::string format_address(Address addr);

enum class ReportFormat { kText, kJson };

std::string render_report(std::span<const PathAggregate> ranked,
                          const SymbolMap& map, const Summary& summary,
                          ReportFormat format = ReportFormat::kText);

inline constexpr int kReportSchemaVersion = 1;

}  // namespace cmprof

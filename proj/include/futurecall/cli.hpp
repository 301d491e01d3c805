// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "futurecall/analysis.hpp"
#include "futurecall/schema.hpp"

namespace futurecall {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

/// Conflict status of every directed pair of tools in the same class,
/// self-pairs included, from static annotations. `{param}` segments match
/// any segment; session-relative paths and missing annotations cover the
/// whole tree.
struct StaticConflicts {
    std::set<analysis::DirectedPair> pairs;
    std::size_t universe = 0;
};
StaticConflicts static_conflicts(const std::vector<SchemaEntry>& tools);

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace futurecall

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "futurecall/analysis.hpp"
#include "futurecall/driver.hpp"
#include "futurecall/trace.hpp"

namespace testing {

inline std::string fixture(const std::string& name) { return std::string(FIXTURE_DIR) + "/" + name; }

/// Every context produced by a test goes through here so the protocol linter
/// sees all of them.
std::vector<std::string>& linted_contexts();
futurecall::RunTrace run(const futurecall::WorkloadSpec& spec, futurecall::RunMode mode);
futurecall::RunTrace run(const std::string& fixture_name, futurecall::RunMode mode);

/// Unit-grid measure of the union: count cells [k, k+1) covered by some interval.
inline double raster_union(const futurecall::analysis::IntervalSet& set) {
    std::set<long> cells;
    for (const auto& iv : set)
        for (long k = static_cast<long>(iv.start); k < static_cast<long>(iv.end); ++k)
            cells.insert(k);
    return static_cast<double>(cells.size());
}

/// Reachability by repeated relaxation over an adjacency matrix.
inline std::set<int> reachable(const std::vector<std::vector<bool>>& adj, int root) {
    std::vector<bool> seen(adj.size(), false);
    seen[root] = true;
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t u = 0; u < adj.size(); ++u)
            for (std::size_t v = 0; v < adj.size(); ++v)
                if (seen[u] && adj[u][v] && !seen[v])
                    seen[v] = changed = true;
    }
    std::set<int> out;
    for (std::size_t v = 0; v < adj.size(); ++v)
        if (seen[v] && static_cast<int>(v) != root)
            out.insert(static_cast<int>(v));
    return out;
}

/// Longest path by enumerating every simple path from every node.
inline double brute_critical_path(const futurecall::analysis::DependencyDag& dag) {
    std::map<std::string, std::vector<std::string>> next;
    for (const auto& [a, b] : dag.edges)
        next[a].push_back(b);
    double best = 0;
    std::function<void(const std::string&, double)> walk = [&](const std::string& n, double acc) {
        acc += dag.nodes.at(n);
        best = std::max(best, acc);
        for (const auto& m : next[n])
            walk(m, acc);
    };
    for (const auto& [n, _] : dag.nodes)
        walk(n, 0);
    return best;
}

/// Decode-order serial schedule: every interval of the trace ends before the
/// next one starts.
inline bool pairwise_disjoint(const futurecall::analysis::IntervalSet& set) {
    for (std::size_t i = 0; i < set.size(); ++i)
        for (std::size_t j = i + 1; j < set.size(); ++j)
            if (set[i].start < set[j].end && set[j].start < set[i].end)
                return false;
    return true;
}

}  // namespace testing

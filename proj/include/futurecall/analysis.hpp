// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace futurecall::analysis {

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class DegenerateInput : public DomainError {
public:
    using DomainError::DomainError;
};

class OverlappingDecode : public std::runtime_error {
public:
    OverlappingDecode() : std::runtime_error("decode intervals overlap") {}
};

class CycleDetected : public std::runtime_error {
public:
    CycleDetected() : std::runtime_error("dependency graph has a cycle") {}
};

struct Interval {
    double start = 0;
    double end = 0;

    Interval() = default;
    Interval(double s, double e);
    double length() const { return end - start; }
};

using IntervalSet = std::vector<Interval>;

/// Sum of durations.
double sequential_sum(const IntervalSet& intervals);
/// Measure of the union (half-open; zero-length intervals contribute nothing).
double effective_union(const IntervalSet& intervals);

struct SavingsReport {
    double delta_ff = 0;  // inter-function parallelism: S(E) - D(E)
    double delta_de = 0;  // decode/execution overlap: D(M) + D(E) - D(M u E)
    double t_saving = 0;  // S(M) + S(E) - D(M u E)
    double s_m = 0;
    double s_e = 0;
    double d_e = 0;
    double d_union = 0;
};

/// Throws OverlappingDecode when decode intervals overlap each other.
SavingsReport savings_decomposition(const IntervalSet& decode, const IntervalSet& exec);

struct DependencyDag {
    std::map<std::string, double> nodes;  // call id -> execution duration
    std::set<std::pair<std::string, std::string>> edges;  // producer -> consumer
};

/// Longest node-weighted path. Throws CycleDetected.
double critical_path(const DependencyDag& dag);

/// (t_llm + t_tool) / max(t_llm, t_cp).
double ideal_speedup(double t_llm, double t_tool, double t_cp);
/// Ideal speedup when asynchronous decoding costs a fraction `alpha` extra.
double overhead_speedup(double t_llm, double t_tool, double t_cp, double alpha);

enum class Regime { little, moderate, sweet_spot };

std::string to_string(Regime r);

struct RegimeThresholds {
    double parallel_ratio = 3.0;  // t_tool / t_cp at or above this is "much greater"
    double balance_low = 0.5;     // t_llm / t_cp within [low, high] is "comparable"
    double balance_high = 2.0;
};

Regime classify_regime(double t_llm, double t_tool, double t_cp, RegimeThresholds th = {});

struct PairedTest {
    double geomean_speedup = 0;
    double t_statistic = 0;
    double p_value = 0;  // one-sided, alternative: mean log speedup > 0
    std::size_t n = 0;
};

/// Pairs are (baseline latency, treated latency).
PairedTest paired_log_speedup_test(const std::vector<std::pair<double, double>>& pairs);

struct McNemar {
    double chi2 = 0;
    double p_value = 1;
};

/// Uncorrected McNemar test on the discordant counts.
McNemar mcnemar(std::size_t b, std::size_t c);

using DirectedPair = std::pair<std::string, std::string>;

struct Confusion {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    double accuracy = 0, precision = 0, recall = 0, fp_rate = 0, fn_rate = 0;
};

Confusion confusion_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);
Confusion annotation_confusion(const std::set<DirectedPair>& predicted,
                               const std::set<DirectedPair>& truth, std::size_t universe);

}  // namespace futurecall::analysis

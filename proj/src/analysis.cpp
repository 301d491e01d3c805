// SPDX-License-Identifier: Apache-2.0
#include "futurecall/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

namespace futurecall::analysis {

Interval::Interval(double s, double e) : start(s), end(e) {
    if (!(s <= e))
        throw DomainError("interval end precedes start");
}

double sequential_sum(const IntervalSet& intervals) {
    double total = 0;
    for (const auto& i : intervals)
        total += i.length();
    return total;
}

double effective_union(const IntervalSet& intervals) {
    IntervalSet sorted;
    sorted.reserve(intervals.size());
    for (const auto& i : intervals)
        if (i.length() > 0)
            sorted.push_back(i);
    std::sort(sorted.begin(), sorted.end(),
              [](const Interval& a, const Interval& b) { return a.start < b.start; });

    double total = 0;
    std::size_t k = 0;
    while (k < sorted.size()) {
        double s = sorted[k].start, e = sorted[k].end;
        for (++k; k < sorted.size() && sorted[k].start <= e; ++k)
            e = std::max(e, sorted[k].end);
        total += e - s;
    }
    return total;
}

SavingsReport savings_decomposition(const IntervalSet& decode, const IntervalSet& exec) {
    SavingsReport r;
    r.s_m = sequential_sum(decode);
    if (effective_union(decode) != r.s_m)
        throw OverlappingDecode();
    r.s_e = sequential_sum(exec);
    r.d_e = effective_union(exec);

    IntervalSet both = decode;
    both.insert(both.end(), exec.begin(), exec.end());
    r.d_union = effective_union(both);

    r.delta_ff = r.s_e - r.d_e;
    r.delta_de = r.s_m + r.d_e - r.d_union;
    r.t_saving = r.s_m + r.s_e - r.d_union;
    if (std::abs(r.t_saving - (r.delta_ff + r.delta_de)) > 1e-9)
        throw std::logic_error("savings identity violated");
    return r;
}

double critical_path(const DependencyDag& dag) {
    std::map<std::string, std::vector<std::string>> preds;
    for (const auto& [from, to] : dag.edges) {
        if (!dag.nodes.contains(from) || !dag.nodes.contains(to))
            throw std::invalid_argument("edge references unknown node " + from + "->" + to);
        preds[to].push_back(from);
    }

    enum class Mark { none, active, done };
    std::map<std::string, Mark> mark;
    std::map<std::string, double> finish;
    std::function<double(const std::string&)> visit = [&](const std::string& n) -> double {
        auto& m = mark[n];
        if (m == Mark::done)
            return finish[n];
        if (m == Mark::active)
            throw CycleDetected();
        m = Mark::active;
        double best = 0;
        for (const auto& p : preds[n])
            best = std::max(best, visit(p));
        mark[n] = Mark::done;
        return finish[n] = best + dag.nodes.at(n);
    };

    double longest = 0;
    for (const auto& [n, _] : dag.nodes)
        longest = std::max(longest, visit(n));
    return longest;
}

namespace {

void check_speedup_inputs(double t_llm, double t_tool, double t_cp) {
    if (t_llm < 0 || t_tool < 0 || t_cp < 0)
        throw DomainError("negative time");
    if (t_cp > t_tool)
        throw DomainError("critical path exceeds total tool time");
    if (!(std::max(t_llm, t_cp) > 0))
        throw DomainError("no decode or execution time");
}

}  // namespace

double ideal_speedup(double t_llm, double t_tool, double t_cp) {
    check_speedup_inputs(t_llm, t_tool, t_cp);
    return (t_llm + t_tool) / std::max(t_llm, t_cp);
}

double overhead_speedup(double t_llm, double t_tool, double t_cp, double alpha) {
    check_speedup_inputs(t_llm, t_tool, t_cp);
    if (alpha < 0)
        throw DomainError("negative decode overhead");
    double slowed = (1 + alpha) * t_llm;
    if (t_cp >= slowed)
        return (t_llm + t_tool) / t_cp;
    return (t_llm + t_tool) / slowed;
}

std::string to_string(Regime r) {
    switch (r) {
    case Regime::little: return "little";
    case Regime::moderate: return "moderate";
    case Regime::sweet_spot: return "sweet-spot";
    }
    return "?";
}

Regime classify_regime(double t_llm, double t_tool, double t_cp, RegimeThresholds th) {
    if (!(t_llm > 0 && t_tool > 0 && t_cp > 0))
        throw DomainError("regime inputs must be positive");
    bool parallel = t_tool / t_cp >= th.parallel_ratio;
    double balance = t_llm / t_cp;
    bool balanced = balance >= th.balance_low && balance <= th.balance_high;
    if (parallel && balanced)
        return Regime::sweet_spot;
    if (!parallel && !balanced)
        return Regime::little;
    return Regime::moderate;
}

PairedTest paired_log_speedup_test(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.size() < 2)
        throw DegenerateInput("paired test needs at least two pairs");
    std::vector<double> logs;
    for (const auto& [base, treated] : pairs) {
        if (!(base > 0 && treated > 0))
            throw DomainError("latencies must be positive");
        logs.push_back(std::log(base / treated));
    }

    PairedTest t;
    t.n = logs.size();
    double n = static_cast<double>(logs.size());
    double mean = std::accumulate(logs.begin(), logs.end(), 0.0) / n;
    t.geomean_speedup = std::exp(mean);

    double ss = 0;
    for (double x : logs)
        ss += (x - mean) * (x - mean);
    double sd = std::sqrt(ss / (n - 1));
    // Relative guard: logs of equal ratios differ only by rounding.
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
        t.t_statistic = mean > 0 ? INFINITY : (mean < 0 ? -INFINITY : 0.0);
        t.p_value = mean > 0 ? 0.0 : 1.0;
        return t;
    }
    t.t_statistic = mean / (sd / std::sqrt(n));
    boost::math::students_t dist(n - 1);
    t.p_value = boost::math::cdf(boost::math::complement(dist, t.t_statistic));
    return t;
}

McNemar mcnemar(std::size_t b, std::size_t c) {
    if (b + c == 0)
        return {0.0, 1.0};
    double diff = static_cast<double>(b) - static_cast<double>(c);
    McNemar m;
    m.chi2 = diff * diff / static_cast<double>(b + c);
    // Survival function of chi-square with one degree of freedom.
    m.p_value = std::erfc(std::sqrt(m.chi2 / 2.0));
    return m;
}

Confusion confusion_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
    Confusion c{tp, fp, fn, tn};
    double total = static_cast<double>(tp + fp + fn + tn);
    if (total == 0)
        throw DomainError("empty pair universe");
    c.accuracy = static_cast<double>(tp + tn) / total;
    c.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    c.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    c.fp_rate = static_cast<double>(fp) / total;
    c.fn_rate = static_cast<double>(fn) / total;
    return c;
}

Confusion annotation_confusion(const std::set<DirectedPair>& predicted,
                               const std::set<DirectedPair>& truth, std::size_t universe) {
    std::size_t tp = 0;
    for (const auto& p : predicted)
        tp += truth.contains(p);
    std::size_t fp = predicted.size() - tp;
    std::size_t fn = truth.size() - tp;
    if (tp + fp + fn > universe)
        throw DomainError("conflict sets exceed the pair universe");
    return confusion_from_counts(tp, fp, fn, universe - tp - fp - fn);
}

}  // namespace futurecall::analysis

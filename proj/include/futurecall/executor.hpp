// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "futurecall/clock.hpp"
#include "futurecall/futures.hpp"
#include "futurecall/scheduler.hpp"

namespace futurecall {

/// Mock backend state shared by every tool of a run, keyed by resource path.
using ToolState = std::map<std::string, Value>;

struct ToolOutcome {
    std::optional<Value> value;
    std::optional<std::string> error;

    static ToolOutcome ok(Value v) { return {std::move(v), std::nullopt}; }
    static ToolOutcome failure(std::string msg) { return {std::nullopt, std::move(msg)}; }
};

/// A tool implementation. `behavior` runs atomically at the end of the call's
/// latency interval and must be deterministic in (args, invocation, state).
struct ToolBinding {
    std::string name;
    std::function<ToolOutcome(const Value& args, std::size_t invocation, ToolState& state)> behavior;
    std::function<Time(std::size_t invocation)> latency = [](std::size_t) { return Time{0}; };
};

class ToolRegistry {
public:
    void add(ToolBinding binding);
    bool contains(const std::string& name) const { return tools_.contains(name); }
    const ToolBinding& at(const std::string& name) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, ToolBinding> tools_;
};

class GatesPending : public std::runtime_error {
public:
    explicit GatesPending(const std::string& id)
        : std::runtime_error("dispatch with pending blocking gates: " + id) {}
};

struct DependencyEdge {
    std::string producer;
    std::string consumer;
    bool consuming = true;
};

/// Every node reachable from `root` over the edges, in first-reached order.
/// Non-consuming edges are followed only when `follow_all` is set.
std::vector<std::string> transitive_dependents(const std::vector<DependencyEdge>& edges,
                                               const std::string& root, bool follow_all = false);

enum class CancelPolicy {
    consuming,  // argument edges and read-after-write gate edges
    strict,     // any gate edge
};

/// Runs dispatched calls, fulfils their result futures, releases their labels,
/// and cancels transitive dependents of failures.
class Executor {
public:
    using ExecSink = std::function<void(const CallRecord&, Time start, Time end)>;

    Executor(EventLoop& loop, FutureStore& store, Scheduler& scheduler, const ToolRegistry& tools,
             ToolState& state);

    Executor(const Executor&) = delete;
    Executor& operator=(const Executor&) = delete;

    void set_policy(CancelPolicy p) { policy_ = p; }
    void set_exec_sink(ExecSink sink) { exec_sink_ = std::move(sink); }

    /// Enqueues the call and schedules an admission pass. Returns immediately.
    FutureId submit(CallRecord call);

    void dispatch(const std::string& call_id);
    std::vector<std::string> cancel_transitive(const std::string& failed_call);

    /// Dependency edges among all submitted calls (argument use and gates).
    std::vector<DependencyEdge> dependency_edges() const;

    std::size_t in_flight() const { return in_flight_; }
    std::size_t peak_in_flight() const { return peak_in_flight_; }
    std::optional<std::string> producer_of(const FutureId& id) const;

private:
    void run_worker(const std::string& call_id);
    void start_execution(const std::string& call_id);
    void complete(const std::string& call_id, Time start);
    void cancel_call(const std::string& call_id, const FutureId& cause);
    void fail_call(const std::string& call_id, ErrorInfo error);
    void schedule_admission();
    FutureId failure_cause(const std::string& call_id) const;

    EventLoop& loop_;
    FutureStore& store_;
    Scheduler& scheduler_;
    const ToolRegistry& tools_;
    ToolState& state_;
    CancelPolicy policy_ = CancelPolicy::consuming;
    ExecSink exec_sink_;
    std::map<std::uint64_t, std::string> producers_;
    std::size_t in_flight_ = 0;
    std::size_t peak_in_flight_ = 0;
    bool admission_pending_ = false;
};

}  // namespace futurecall

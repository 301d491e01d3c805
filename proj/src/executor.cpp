// SPDX-License-Identifier: Apache-2.0
#include "futurecall/executor.hpp"

#include <algorithm>
#include <deque>

namespace futurecall {

void ToolRegistry::add(ToolBinding binding) {
    auto name = binding.name;
    if (name.empty())
        throw std::invalid_argument("tool binding without a name");
    if (!tools_.emplace(name, std::move(binding)).second)
        throw std::invalid_argument("duplicate tool binding: " + name);
}

const ToolBinding& ToolRegistry::at(const std::string& name) const {
    auto it = tools_.find(name);
    if (it == tools_.end())
        throw std::out_of_range("unknown tool: " + name);
    return it->second;
}

std::vector<std::string> ToolRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [n, _] : tools_)
        out.push_back(n);
    return out;
}

std::vector<std::string> transitive_dependents(const std::vector<DependencyEdge>& edges,
                                               const std::string& root, bool follow_all) {
    std::map<std::string, std::vector<std::string>> next;
    for (const auto& e : edges)
        if (e.consuming || follow_all)
            next[e.producer].push_back(e.consumer);

    std::vector<std::string> out;
    std::set<std::string> seen{root};
    std::deque<std::string> frontier{root};
    while (!frontier.empty()) {
        auto n = frontier.front();
        frontier.pop_front();
        for (const auto& m : next[n]) {
            if (seen.insert(m).second) {
                out.push_back(m);
                frontier.push_back(m);
            }
        }
    }
    return out;
}

Executor::Executor(EventLoop& loop, FutureStore& store, Scheduler& scheduler,
                   const ToolRegistry& tools, ToolState& state)
    : loop_(loop), store_(store), scheduler_(scheduler), tools_(tools), state_(state) {
    scheduler_.on_ready([this](const std::string& id) { dispatch(id); });
    scheduler_.on_unresolvable([this](const std::string& id, const FutureId& cause) {
        cancel_call(id, cause);
        cancel_transitive(id);
    });
    scheduler_.on_bad_template([this](const std::string& id, const std::string& msg) {
        fail_call(id, ErrorInfo{ErrorKind::execution_error, msg, id});
    });
}

std::optional<std::string> Executor::producer_of(const FutureId& id) const {
    auto it = producers_.find(id.number());
    if (it == producers_.end())
        return std::nullopt;
    return it->second;
}

FutureId Executor::submit(CallRecord call) {
    if (!tools_.contains(call.tool))
        throw std::out_of_range("unknown tool: " + call.tool);
    producers_[call.result.number()] = call.id;
    auto fut = scheduler_.submit(std::move(call));
    schedule_admission();
    return fut;
}

void Executor::schedule_admission() {
    if (admission_pending_)
        return;
    admission_pending_ = true;
    loop_.schedule(0, [this] {
        admission_pending_ = false;
        scheduler_.try_admit();
    });
}

void Executor::dispatch(const std::string& call_id) {
    auto& c = scheduler_.call(call_id);
    if (c.status != CallStatus::admitted)
        throw std::logic_error("dispatch of call in status " + std::string(to_string(c.status)));
    for (const auto& g : c.blocking_gates)
        if (!is_terminal(store_.state_of(g)))
            throw GatesPending(call_id);
    c.status = CallStatus::dispatched;
    ++in_flight_;
    peak_in_flight_ = std::max(peak_in_flight_, in_flight_);
    run_worker(call_id);
}

void Executor::run_worker(const std::string& call_id) {
    auto& c = scheduler_.call(call_id);
    std::vector<FutureId> args(c.argument_futures.begin(), c.argument_futures.end());
    store_.wait_for(args, [this, call_id](std::map<FutureId, FutureState> states) {
        auto& call = scheduler_.call(call_id);
        if (call.status != CallStatus::dispatched)
            return;  // cancelled while waiting
        for (const auto& [id, state] : states) {
            if (auto* cancelled = std::get_if<Cancelled>(&state)) {
                --in_flight_;
                cancel_call(call_id, cancelled->cause);
                cancel_transitive(call_id);
                return;
            }
            if (std::holds_alternative<Failed>(state)) {
                --in_flight_;
                cancel_call(call_id, id);
                cancel_transitive(call_id);
                return;
            }
        }
        start_execution(call_id);
    });
}

void Executor::start_execution(const std::string& call_id) {
    auto& c = scheduler_.call(call_id);
    c.status = CallStatus::running;
    c.args = substitute_resolved(c.args, store_);
    Time start = loop_.stamp();
    Time latency = tools_.at(c.tool).latency(c.invocation);
    loop_.schedule(latency, [this, call_id, start] { complete(call_id, start); });
}

void Executor::complete(const std::string& call_id, Time start) {
    auto& c = scheduler_.call(call_id);
    const auto& tool = tools_.at(c.tool);
    ToolOutcome out;
    try {
        out = tool.behavior(c.args, c.invocation, state_);
    } catch (const std::exception& e) {
        out = ToolOutcome::failure(e.what());
    }
    Time end = loop_.stamp();
    --in_flight_;
    if (exec_sink_)
        exec_sink_(c, start, end);

    if (out.error) {
        fail_call(call_id, ErrorInfo{ErrorKind::execution_error, *out.error, call_id});
        return;
    }
    c.status = CallStatus::done;
    store_.resolve(c.result, out.value.value_or(Value()));
    scheduler_.release(call_id);
    schedule_admission();
}

void Executor::fail_call(const std::string& call_id, ErrorInfo error) {
    auto& c = scheduler_.call(call_id);
    scheduler_.drop_queued(call_id);
    c.status = CallStatus::failed;
    store_.fail(c.result, std::move(error));
    // Dependents are cancelled before the failed call's gates open.
    cancel_transitive(call_id);
    scheduler_.release(call_id);
    schedule_admission();
}

void Executor::cancel_call(const std::string& call_id, const FutureId& cause) {
    auto& c = scheduler_.call(call_id);
    if (is_terminal(c.status))
        return;
    if (c.status == CallStatus::running)
        throw std::logic_error("cancellation of running call " + call_id);
    scheduler_.drop_queued(call_id);
    c.status = CallStatus::cancelled;
    store_.cancel(c.result, cause);
    scheduler_.release(call_id);
    schedule_admission();
}

FutureId Executor::failure_cause(const std::string& call_id) const {
    const auto& c = scheduler_.call(call_id);
    auto state = store_.state_of(c.result);
    if (auto* cancelled = std::get_if<Cancelled>(&state))
        return cancelled->cause;
    return c.result;
}

std::vector<DependencyEdge> Executor::dependency_edges() const {
    std::vector<DependencyEdge> edges;
    for (const auto& id : scheduler_.submission_order()) {
        const auto& c = scheduler_.call(id);
        std::set<std::string> producers;
        for (const auto* set : {&c.argument_futures, &c.path_futures})
            for (const auto& f : *set)
                if (auto p = producer_of(f); p && *p != id)
                    producers.insert(*p);
        for (const auto& p : producers)
            edges.push_back({p, id, true});
        for (const auto& g : c.gate_edges)
            if (!producers.contains(g.owner))
                edges.push_back({g.owner, id, g.consuming});
    }
    return edges;
}

std::vector<std::string> Executor::cancel_transitive(const std::string& failed_call) {
    auto cause = failure_cause(failed_call);
    auto closure = transitive_dependents(dependency_edges(), failed_call, policy_ == CancelPolicy::strict);

    std::vector<std::string> cancelled;
    for (const auto& id : scheduler_.submission_order()) {
        if (std::find(closure.begin(), closure.end(), id) == closure.end())
            continue;
        auto& c = scheduler_.call(id);
        if (is_terminal(c.status) || c.status == CallStatus::running)
            continue;
        if (c.status == CallStatus::dispatched)
            --in_flight_;
        cancel_call(id, cause);
        cancelled.push_back(id);
    }
    return cancelled;
}

}  // namespace futurecall

// SPDX-License-Identifier: Apache-2.0
#include "futurecall/trace.hpp"

#include <istream>

namespace futurecall {

std::string_view to_string(Role r) {
    switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    case Role::tool: return "tool";
    }
    return "?";
}

Value to_json(const Message& m) {
    Value j{{"role", to_string(m.role)}, {"content", m.content}};
    if (!m.tool_calls.empty()) {
        Value calls = Value::array();
        for (const auto& c : m.tool_calls)
            calls.push_back({{"id", c.id},
                             {"type", "function"},
                             {"function", {{"name", c.name}, {"arguments", c.args.dump()}}}});
        j["tool_calls"] = calls;
    }
    if (m.role == Role::tool)
        j["tool_call_id"] = m.tool_call_id;
    if (!m.bound_futures.is_null())
        j["bound_futures"] = m.bound_futures;
    return j;
}

analysis::IntervalSet RunTrace::decode_intervals() const {
    analysis::IntervalSet out;
    for (const auto& e : events)
        if (e.kind == "decode")
            out.emplace_back(e.t0, e.t1);
    return out;
}

analysis::IntervalSet RunTrace::exec_intervals() const {
    analysis::IntervalSet out;
    for (const auto& e : events)
        if (e.kind == "exec")
            out.emplace_back(e.t0, e.t1);
    return out;
}

const CallOutcome* RunTrace::outcome(const std::string& call_id) const {
    for (const auto& c : calls)
        if (c.id == call_id)
            return &c;
    return nullptr;
}

Value summary_json(const RunTrace& trace) {
    auto in = trace_to_inputs(trace);
    Value nodes = Value::object();
    for (const auto& [n, d] : trace.dag.nodes)
        nodes[n] = d;
    Value edges = Value::array();
    for (const auto& [a, b] : trace.dag.edges)
        edges.push_back({a, b});
    Value calls = Value::array();
    for (const auto& c : trace.calls) {
        Value cj{{"id", c.id}, {"tool", c.tool}, {"status", c.status}, {"future", c.future}};
        if (c.start)
            cj["start"] = *c.start;
        if (c.end)
            cj["end"] = *c.end;
        if (!c.error.empty())
            cj["error"] = c.error;
        calls.push_back(cj);
    }
    return {{"summary", true},
            {"mode", trace.mode},
            {"complete", trace.complete},
            {"end_to_end", trace.end_to_end},
            {"t_llm", in.t_llm},
            {"t_tool", in.t_tool},
            {"t_cp", in.t_cp},
            {"decode_turns", trace.decode_turns},
            {"recovery_turns", trace.recovery_turns},
            {"final_answer", trace.final_answer},
            {"final_state", trace.final_state},
            {"calls", calls},
            {"dag", {{"nodes", nodes}, {"edges", edges}}}};
}

void write_jsonl(std::ostream& out, const RunTrace& trace) {
    for (const auto& e : trace.events) {
        Value j{{"t0", e.t0}, {"t1", e.t1}, {"kind", e.kind}, {"id", e.id}, {"turn", e.turn}};
        out << j.dump() << '\n';
    }
    out << summary_json(trace).dump() << '\n';
}

RunTrace read_jsonl(std::istream& in) {
    RunTrace t;
    std::string line;
    bool summary = false;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        auto j = Value::parse(line);
        if (j.value("summary", false)) {
            summary = true;
            t.mode = j.value("mode", "");
            t.complete = j.value("complete", false);
            t.end_to_end = j.value("end_to_end", 0.0);
            t.decode_turns = j.value("decode_turns", 0);
            t.final_answer = j.value("final_answer", "");
            t.final_state = j.value("final_state", Value::object());
            const auto& dag = j.at("dag");
            for (const auto& [n, d] : dag.at("nodes").items())
                t.dag.nodes[n] = d.get<double>();
            for (const auto& e : dag.at("edges"))
                t.dag.edges.emplace(e.at(0).get<std::string>(), e.at(1).get<std::string>());
            continue;
        }
        t.events.push_back(TraceEvent{j.at("t0").get<double>(), j.at("t1").get<double>(),
                                      j.at("kind").get<std::string>(), j.at("id").get<std::string>(),
                                      j.at("turn").get<int>()});
    }
    if (!summary)
        throw IncompleteTrace("trace has no summary record");
    return t;
}

Value context_json(const RunTrace& trace) {
    Value out = Value::array();
    for (const auto& m : trace.context)
        out.push_back(to_json(m));
    return out;
}

std::vector<std::string> lint_protocol(const std::vector<Message>& context) {
    std::vector<std::string> problems;
    for (std::size_t i = 0; i < context.size(); ++i) {
        const auto& m = context[i];
        if (m.role == Role::tool) {
            // Every tool message must close a call of the preceding assistant turn.
            std::size_t j = i;
            while (j > 0 && context[j - 1].role == Role::tool)
                --j;
            if (j == 0 || context[j - 1].role != Role::assistant)
                problems.push_back("orphan tool message for " + m.tool_call_id);
            continue;
        }
        if (m.role != Role::assistant)
            continue;
        for (std::size_t k = 0; k < m.tool_calls.size(); ++k) {
            std::size_t at = i + 1 + k;
            if (at >= context.size() || context[at].role != Role::tool ||
                context[at].tool_call_id != m.tool_calls[k].id)
                problems.push_back("tool call " + m.tool_calls[k].id +
                                   " not immediately followed by its result");
        }
    }
    return problems;
}

TraceInputs trace_to_inputs(const RunTrace& trace, const analysis::DependencyDag& dag) {
    TraceInputs in;
    in.decode = trace.decode_intervals();
    in.exec = trace.exec_intervals();
    in.t_llm = analysis::sequential_sum(in.decode);
    in.t_tool = analysis::sequential_sum(in.exec);

    analysis::DependencyDag measured;
    for (const auto& e : trace.events)
        if (e.kind == "exec")
            measured.nodes[e.id] = e.t1 - e.t0;
    for (const auto& [n, _] : dag.nodes)
        if (!measured.nodes.contains(n))
            throw IncompleteTrace("no execution interval for call " + n);
    for (const auto& edge : dag.edges)
        if (measured.nodes.contains(edge.first) && measured.nodes.contains(edge.second))
            measured.edges.insert(edge);
    in.t_cp = measured.nodes.empty() ? 0.0 : analysis::critical_path(measured);
    return in;
}

}  // namespace futurecall

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "futurecall/analysis.hpp"
#include "futurecall/futures.hpp"

namespace futurecall {

enum class Role { system, user, assistant, tool };

std::string_view to_string(Role r);

struct ToolCall {
    std::string id;
    std::string name;
    Value args;
};

struct Message {
    Role role = Role::user;
    Value content;
    std::vector<ToolCall> tool_calls;  // assistant only
    std::string tool_call_id;          // tool only
    Value bound_futures;               // integration messages: id -> value
};

Value to_json(const Message& m);

struct TraceEvent {
    Time t0 = 0;
    Time t1 = 0;
    std::string kind;  // decode | exec | await | integrate
    std::string id;
    int turn = 0;
};

struct CallOutcome {
    std::string id;
    std::string tool;
    std::string status;  // done | failed | cancelled
    std::string future;
    std::optional<Time> start;
    std::optional<Time> end;
    Value result;       // resolved value, or null
    std::string error;  // failure message or cancellation origin
};

struct RunTrace {
    std::string mode;
    std::vector<TraceEvent> events;
    std::vector<Message> context;
    std::vector<CallOutcome> calls;
    Value final_state = Value::object();
    std::string final_answer;
    Time end_to_end = 0;
    int decode_turns = 0;
    int recovery_turns = 0;
    analysis::DependencyDag dag;
    bool complete = false;

    analysis::IntervalSet decode_intervals() const;
    analysis::IntervalSet exec_intervals() const;
    const CallOutcome* outcome(const std::string& call_id) const;
};

/// Serializes events one per line, then a summary record.
void write_jsonl(std::ostream& out, const RunTrace& trace);
/// Reads a trace written by write_jsonl (events, dag, and totals only).
RunTrace read_jsonl(std::istream& in);
Value summary_json(const RunTrace& trace);
Value context_json(const RunTrace& trace);

/// Assistant tool-calls not immediately followed by their tool messages.
std::vector<std::string> lint_protocol(const std::vector<Message>& context);

class IncompleteTrace : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TraceInputs {
    double t_llm = 0;
    double t_tool = 0;
    double t_cp = 0;
    analysis::IntervalSet decode;
    analysis::IntervalSet exec;
};

/// t_llm = S(decode), t_tool = S(exec), t_cp = critical path of `dag` with
/// durations measured from the trace.
TraceInputs trace_to_inputs(const RunTrace& trace, const analysis::DependencyDag& dag);
inline TraceInputs trace_to_inputs(const RunTrace& trace) { return trace_to_inputs(trace, trace.dag); }

}  // namespace futurecall

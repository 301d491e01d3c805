// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "futurecall/executor.hpp"
#include "futurecall/schema.hpp"

namespace futurecall {

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Fixed delay, or one delay per invocation (the last one repeats).
struct LatencyModel {
    std::vector<Time> delays{0};

    Time at(std::size_t invocation) const;
    friend bool operator==(const LatencyModel&, const LatencyModel&) = default;
};

/// State effects of a mock tool; templates may use `{param}` segments.
struct Effects {
    std::vector<std::string> reads;
    std::vector<std::string> writes;
    friend bool operator==(const Effects&, const Effects&) = default;
};

struct ToolSpec {
    FunctionSchema schema;
    std::optional<DependencyAnnotation> annotation;
    LatencyModel latency;
    std::optional<std::vector<Value>> returns;
    Effects effects;
    std::set<std::size_t> fail_on;
    std::string error = "tool failed";
    /// Thinking delegates: subquery -> answer.
    std::optional<std::map<std::string, std::string>> delegate;

    /// Output template: the annotation's, else the schema's.
    std::optional<Value> outputs() const;
    friend bool operator==(const ToolSpec&, const ToolSpec&) = default;
};

/// One scripted call. String leaves `@<call>` / `@<call>.<field>` in `args`
/// refer to earlier calls' results.
struct ScriptCall {
    std::string id;
    std::string name;
    Value args;
    friend bool operator==(const ScriptCall&, const ScriptCall&) = default;
};

struct ScriptTurn {
    std::vector<std::string> when;  // call ids whose results must be observed first
    std::vector<ScriptCall> calls;
    std::optional<std::string> final_text;
    Time decode_time = 1;
    std::vector<std::pair<std::string, Time>> tokens;

    bool is_final() const { return final_text.has_value(); }
    friend bool operator==(const ScriptTurn&, const ScriptTurn&) = default;
};

struct WorkloadSpec {
    std::string system;
    std::string prompt;
    std::vector<ToolSpec> tools;
    std::vector<ScriptTurn> script;
    std::vector<ScriptTurn> recovery;
    double delay_scale = 1.0;
    int context_budget = 64;
    std::optional<std::string> mode;

    const ToolSpec& tool(const std::string& name) const;
    friend bool operator==(const WorkloadSpec&, const WorkloadSpec&) = default;
};

/// Parses `@id` or `@id.a.b`; nullopt for other strings.
struct CallRef {
    std::string call;
    std::vector<std::string> fields;
};
std::optional<CallRef> parse_call_ref(const std::string& text);
/// Call references among the string leaves of `args`.
std::vector<CallRef> collect_call_refs(const Value& args);

WorkloadSpec parse_workload(const Value& doc);
/// Throws ParseError (missing file, malformed JSON) or ValidationError.
WorkloadSpec load_workload(const std::filesystem::path& path);
void validate(const WorkloadSpec& spec);
Value to_json(const WorkloadSpec& spec);

/// One workload per delay with every tool latency overridden.
std::vector<WorkloadSpec> make_latency_sweep(const WorkloadSpec& base, const std::vector<Time>& delays);

/// Mock tool bindings for the workload's tools.
ToolRegistry make_tool_registry(const WorkloadSpec& spec);

struct GeneratorOptions {
    std::size_t max_calls = 6;
    std::size_t max_paths = 3;
    bool annotate = true;
};

/// Random failure-free workload whose annotations cover every declared
/// effect: turns of 1-3 calls, random triggers, and argument references to
/// calls of earlier turns.
WorkloadSpec random_workload(std::uint64_t seed, const GeneratorOptions& options = {});

/// Stable 64-bit FNV-1a digest of a value's canonical dump, as hex.
std::string digest(const Value& v);

}  // namespace futurecall

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "futurecall/futures.hpp"

namespace futurecall {

class InvalidSchema : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnresolvedArgument : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Parameter {
    std::string type;  // string | number | integer | boolean | array | object
    std::string description;
    bool required = false;
    /// Set by the transformer: the parameter also accepts a future identifier.
    bool accepts_future = false;

    friend bool operator==(const Parameter&, const Parameter&) = default;
};

struct FunctionSchema {
    std::string name;
    std::string description;
    std::map<std::string, Parameter> parameters;
    std::optional<Value> outputs;
    /// Human-readable return contract; empty for untransformed schemas.
    std::string returns;
    bool transformed = false;

    friend bool operator==(const FunctionSchema&, const FunctionSchema&) = default;
};

struct PathSpec {
    std::string path;  // `/a/b`, `$session/key/...`, or with `{param}` segments
    bool subtree = false;

    friend bool operator==(const PathSpec&, const PathSpec&) = default;
};

struct DependencyAnnotation {
    std::vector<PathSpec> reads;
    std::vector<PathSpec> writes;
    bool session_read = false;
    bool session_write = false;
    std::optional<Value> outputs;

    friend bool operator==(const DependencyAnnotation&, const DependencyAnnotation&) = default;
};

/// Name of the auxiliary resolution function exposed to the model.
inline constexpr std::string_view kAwaitFuture = "await_future";

/// Fixed preamble appended to every transformed description.
extern const std::string kFuturePreamble;

void validate(const FunctionSchema& s);

/// Widens every parameter to value-or-future-id and describes the return as
/// a future. Idempotent; the await_future schema keeps its identifier-only
/// parameter.
FunctionSchema transform_schema(const FunctionSchema& s);

FunctionSchema await_future_schema();

/// Replaces every scalar leaf of `example` with its field-future identifier
/// and registers those field futures. No template yields the bare base id.
Value futurize_output_template(const std::optional<Value>& example, const FutureId& base,
                               FutureStore& store);

struct FutureRef {
    std::string location;  // `mode`, `xs[0]`, `a.b`
    FutureId id;

    friend bool operator==(const FutureRef&, const FutureRef&) = default;
};

/// Every string leaf of `args` that is exactly a registered (base or field)
/// future identifier. Substrings never match.
std::vector<FutureRef> scan_future_refs(const Value& args, const FutureStore& store);

/// Replaces identifier leaves by resolved values. Throws UnresolvedArgument if
/// any referenced future is not Resolved.
Value substitute_resolved(const Value& args, const FutureStore& store);

// JSON mapping of the schema file format.
FunctionSchema schema_from_json(const Value& j);
Value to_json(const FunctionSchema& s);
DependencyAnnotation annotation_from_json(const Value& j);
Value to_json(const DependencyAnnotation& a);
/// Provider-facing tool definition (`{"type":"function","function":{...}}`).
Value to_tool_definition(const FunctionSchema& s);

struct SchemaEntry {
    FunctionSchema schema;
    std::optional<DependencyAnnotation> annotation;
    std::string group;  // optional `class` tag, empty when absent
};

/// Parses `{"tools": [FunctionSchema + "annotation"...]}`.
std::vector<SchemaEntry> load_schema_document(const Value& doc);

}  // namespace futurecall

// SPDX-License-Identifier: Apache-2.0
#include "futurecall/schema.hpp"

#include <set>

namespace futurecall {

const std::string kFuturePreamble =
    "This function runs asynchronously. It returns immediately with a future identifier "
    "(fut_<n>, or a structure of fut_<n>.<field> identifiers) standing for its pending result. "
    "Any argument may be given either a concrete value or a future identifier. "
    "Call await_future when a concrete value is required.";

namespace {

const std::set<std::string> kTypes{"string", "number", "integer", "boolean", "array", "object"};

constexpr std::string_view kReturnsFuture =
    "A future identifier, or a structure of field-future identifiers mirroring the output.";

void futurize_into(Value& node, const FutureId& id, FutureStore& store) {
    if (node.is_object()) {
        for (auto& [key, child] : node.items())
            futurize_into(child, id.field(key), store);
    } else if (node.is_array()) {
        for (std::size_t i = 0; i < node.size(); ++i)
            futurize_into(node[i], id.field(std::to_string(i)), store);
    } else if (node.is_string() || node.is_number() || node.is_boolean()) {
        store.register_field(id);
        node = id.str();
    }
}

void scan_into(const Value& node, const std::string& where, const FutureStore& store,
               std::vector<FutureRef>& out) {
    if (node.is_object()) {
        for (const auto& [key, child] : node.items())
            scan_into(child, where.empty() ? key : where + "." + key, store, out);
    } else if (node.is_array()) {
        for (std::size_t i = 0; i < node.size(); ++i)
            scan_into(node[i], where + "[" + std::to_string(i) + "]", store, out);
    } else if (node.is_string()) {
        auto id = FutureId::parse(node.get_ref<const std::string&>());
        if (id && store.contains(*id))
            out.push_back({where, *id});
    }
}

Value substitute_into(const Value& node, const FutureStore& store) {
    if (node.is_object()) {
        Value out = Value::object();
        for (const auto& [key, child] : node.items())
            out[key] = substitute_into(child, store);
        return out;
    }
    if (node.is_array()) {
        Value out = Value::array();
        for (const auto& child : node)
            out.push_back(substitute_into(child, store));
        return out;
    }
    if (node.is_string()) {
        auto id = FutureId::parse(node.get_ref<const std::string&>());
        if (id && store.contains(*id)) {
            auto state = store.state_of(*id);
            if (auto* r = std::get_if<Resolved>(&state))
                return r->value;
            throw UnresolvedArgument("argument references unresolved future " + id->str());
        }
    }
    return node;
}

std::vector<PathSpec> paths_from_json(const Value& j) {
    std::vector<PathSpec> out;
    if (j.is_null())
        return out;
    if (!j.is_array())
        throw InvalidSchema("reads/writes must be arrays");
    for (const auto& e : j) {
        if (e.contains("path")) {
            out.push_back({e.at("path").get<std::string>(), e.value("subtree", false)});
        } else if (e.is_object() && e.size() == 1) {
            // Decorator shorthand: {"/vehicle/drive": true}
            auto it = e.begin();
            out.push_back({it.key(), it.value().get<bool>()});
        } else {
            throw InvalidSchema("malformed path entry: " + e.dump());
        }
    }
    return out;
}

Value paths_to_json(const std::vector<PathSpec>& ps) {
    Value out = Value::array();
    for (const auto& p : ps)
        out.push_back({{"path", p.path}, {"subtree", p.subtree}});
    return out;
}

}  // namespace

void validate(const FunctionSchema& s) {
    if (s.name.empty())
        throw InvalidSchema("function schema without a name");
    for (const auto& [name, p] : s.parameters) {
        if (name.empty())
            throw InvalidSchema(s.name + ": parameter without a name");
        if (!kTypes.contains(p.type))
            throw InvalidSchema(s.name + "." + name + ": unsupported type '" + p.type + "'");
    }
}

FunctionSchema transform_schema(const FunctionSchema& s) {
    validate(s);
    if (s.transformed)
        return s;

    FunctionSchema out = s;
    out.transformed = true;
    if (s.name == kAwaitFuture)
        return out;

    for (auto& [name, p] : out.parameters)
        p.accepts_future = true;
    out.returns = std::string(kReturnsFuture);
    out.description = s.description.empty() ? kFuturePreamble : s.description + "\n\n" + kFuturePreamble;
    return out;
}

FunctionSchema await_future_schema() {
    FunctionSchema s;
    s.name = std::string(kAwaitFuture);
    s.description =
        "Blocks until the listed futures are resolved and returns a map from each future "
        "identifier to its concrete value.";
    s.parameters["future_ids"] = Parameter{"array", "Future identifiers to resolve.", true, false};
    s.returns = "Map from future identifier to resolved value.";
    return s;
}

Value futurize_output_template(const std::optional<Value>& example, const FutureId& base,
                               FutureStore& store) {
    if (!example || example->is_null())
        return base.str();
    // Scalar templates carry no fields, so the whole result is the base future.
    if (!example->is_structured())
        return base.str();
    Value out = *example;
    // Empty containers have no leaves and stay as they are.
    futurize_into(out, base, store);
    return out;
}

std::vector<FutureRef> scan_future_refs(const Value& args, const FutureStore& store) {
    std::vector<FutureRef> out;
    scan_into(args, "", store, out);
    return out;
}

Value substitute_resolved(const Value& args, const FutureStore& store) {
    return substitute_into(args, store);
}

FunctionSchema schema_from_json(const Value& j) {
    if (!j.is_object())
        throw InvalidSchema("schema must be an object");
    FunctionSchema s;
    s.name = j.value("name", "");
    s.description = j.value("description", "");
    if (j.contains("parameters")) {
        const auto& ps = j.at("parameters");
        if (!ps.is_object())
            throw InvalidSchema(s.name + ": parameters must be an object");
        for (const auto& [name, p] : ps.items()) {
            if (!p.is_object() || !p.contains("type") || !p.at("type").is_string())
                throw InvalidSchema(s.name + "." + name + ": parameter needs a type");
            s.parameters[name] = Parameter{p.at("type").get<std::string>(), p.value("description", ""),
                                           p.value("required", false),
                                           p.value("accepts_future", false)};
        }
    }
    if (j.contains("outputs"))
        s.outputs = j.at("outputs");
    s.returns = j.value("returns", "");
    s.transformed = j.value("transformed", false);
    validate(s);
    return s;
}

Value to_json(const FunctionSchema& s) {
    Value params = Value::object();
    for (const auto& [name, p] : s.parameters) {
        Value pj{{"type", p.type}, {"description", p.description}, {"required", p.required}};
        if (p.accepts_future)
            pj["accepts_future"] = true;
        params[name] = pj;
    }
    Value j{{"name", s.name}, {"description", s.description}, {"parameters", params}};
    if (s.outputs)
        j["outputs"] = *s.outputs;
    if (!s.returns.empty())
        j["returns"] = s.returns;
    if (s.transformed)
        j["transformed"] = true;
    return j;
}

DependencyAnnotation annotation_from_json(const Value& j) {
    if (!j.is_object())
        throw InvalidSchema("annotation must be an object");
    DependencyAnnotation a;
    a.reads = paths_from_json(j.value("reads", Value()));
    a.writes = paths_from_json(j.value("writes", Value()));
    a.session_read = j.value("session_read", false);
    a.session_write = j.value("session_write", false);
    if (j.contains("outputs"))
        a.outputs = j.at("outputs");
    for (const auto* set : {&a.reads, &a.writes})
        for (const auto& p : *set)
            if (!(p.path.starts_with('/') || p.path.starts_with("$session")))
                throw InvalidSchema("path template must be absolute or $session-relative: " + p.path);
    return a;
}

Value to_json(const DependencyAnnotation& a) {
    Value j{{"reads", paths_to_json(a.reads)},
            {"writes", paths_to_json(a.writes)},
            {"session_read", a.session_read},
            {"session_write", a.session_write}};
    if (a.outputs)
        j["outputs"] = *a.outputs;
    return j;
}

Value to_tool_definition(const FunctionSchema& s) {
    Value props = Value::object();
    Value required = Value::array();
    for (const auto& [name, p] : s.parameters) {
        Value prop{{"description", p.description}};
        if (s.name == kAwaitFuture && name == "future_ids") {
            prop["type"] = "array";
            prop["items"] = {{"type", "string"}};
        } else if (p.accepts_future) {
            prop["anyOf"] = Value::array({Value{{"type", p.type}}, Value{{"type", "string"}}});
            prop["description"] = p.description + (p.description.empty() ? "" : " ") +
                                  "(concrete value or future identifier)";
        } else {
            prop["type"] = p.type;
        }
        props[name] = prop;
        if (p.required)
            required.push_back(name);
    }
    std::string desc = s.description;
    if (!s.returns.empty())
        desc += "\nReturns: " + s.returns;
    return {{"type", "function"},
            {"function",
             {{"name", s.name},
              {"description", desc},
              {"parameters", {{"type", "object"}, {"properties", props}, {"required", required}}}}}};
}

std::vector<SchemaEntry> load_schema_document(const Value& doc) {
    if (!doc.is_object() || !doc.contains("tools") || !doc.at("tools").is_array())
        throw InvalidSchema("schema document needs a \"tools\" array");
    std::vector<SchemaEntry> out;
    std::set<std::string> seen;
    for (const auto& t : doc.at("tools")) {
        SchemaEntry e;
        e.schema = schema_from_json(t);
        if (!seen.insert(e.schema.name).second)
            throw InvalidSchema("duplicate tool name: " + e.schema.name);
        if (t.contains("annotation") && !t.at("annotation").is_null())
            e.annotation = annotation_from_json(t.at("annotation"));
        e.group = t.value("class", "");
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace futurecall

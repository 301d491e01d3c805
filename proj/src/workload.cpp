// SPDX-License-Identifier: Apache-2.0
#include "futurecall/workload.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "futurecall/scheduler.hpp"
#include "futurecall/thinking.hpp"

namespace futurecall {

Time LatencyModel::at(std::size_t invocation) const {
    if (delays.empty())
        return 0;
    return delays[std::min(invocation, delays.size() - 1)];
}

std::optional<Value> ToolSpec::outputs() const {
    if (annotation && annotation->outputs)
        return annotation->outputs;
    return schema.outputs;
}

const ToolSpec& WorkloadSpec::tool(const std::string& name) const {
    for (const auto& t : tools)
        if (t.schema.name == name)
            return t;
    throw std::out_of_range("unknown tool: " + name);
}

std::optional<CallRef> parse_call_ref(const std::string& text) {
    if (text.size() < 2 || text.front() != '@')
        return std::nullopt;
    CallRef ref;
    std::string_view rest(text);
    rest.remove_prefix(1);
    auto dot = rest.find('.');
    ref.call = std::string(rest.substr(0, dot));
    if (ref.call.empty())
        return std::nullopt;
    while (dot != std::string_view::npos) {
        rest.remove_prefix(dot + 1);
        dot = rest.find('.');
        auto seg = rest.substr(0, dot);
        if (seg.empty())
            return std::nullopt;
        ref.fields.emplace_back(seg);
    }
    return ref;
}

namespace {

void collect_refs(const Value& v, std::vector<CallRef>& out) {
    if (v.is_structured()) {
        for (const auto& child : v)
            collect_refs(child, out);
    } else if (v.is_string()) {
        if (auto r = parse_call_ref(v.get<std::string>()))
            out.push_back(*r);
    }
}

std::string strip_at(const std::string& s) { return !s.empty() && s.front() == '@' ? s.substr(1) : s; }

ScriptTurn parse_turn(const Value& j, std::size_t& auto_id) {
    ScriptTurn t;
    if (j.contains("when")) {
        const auto& w = j.at("when");
        for (const auto& r : w.value("resolved", Value::array()))
            t.when.push_back(strip_at(r.get<std::string>()));
    }
    t.decode_time = j.value("decode_time", 1.0);
    if (j.contains("tokens"))
        for (const auto& tok : j.at("tokens"))
            t.tokens.emplace_back(tok.at(0).get<std::string>(), tok.at(1).get<double>());

    if (!j.contains("emit"))
        throw ValidationError("script entry without \"emit\"");
    const auto& emit = j.at("emit");
    if (emit.is_object() && emit.contains("final")) {
        t.final_text = emit.at("final").get<std::string>();
    } else if (emit.is_array()) {
        for (const auto& c : emit) {
            ScriptCall call;
            call.name = c.at("name").get<std::string>();
            call.args = c.value("args", Value::object());
            call.id = c.contains("id") ? c.at("id").get<std::string>() : "c" + std::to_string(auto_id);
            ++auto_id;
            t.calls.push_back(std::move(call));
        }
    } else {
        throw ValidationError("\"emit\" must be a call array or {\"final\": ...}");
    }
    return t;
}

Value turn_to_json(const ScriptTurn& t) {
    Value j;
    if (!t.when.empty())
        j["when"] = {{"resolved", t.when}};
    if (t.final_text) {
        j["emit"] = {{"final", *t.final_text}};
    } else {
        Value calls = Value::array();
        for (const auto& c : t.calls)
            calls.push_back({{"id", c.id}, {"name", c.name}, {"args", c.args}});
        j["emit"] = calls;
    }
    j["decode_time"] = t.decode_time;
    if (!t.tokens.empty()) {
        Value toks = Value::array();
        for (const auto& [text, at] : t.tokens)
            toks.push_back({text, at});
        j["tokens"] = toks;
    }
    return j;
}

}  // namespace

std::vector<CallRef> collect_call_refs(const Value& args) {
    std::vector<CallRef> out;
    collect_refs(args, out);
    return out;
}

WorkloadSpec parse_workload(const Value& doc) {
    if (!doc.is_object())
        throw ValidationError("workload must be a JSON object");
    WorkloadSpec spec;
    try {
        spec.system = doc.value("system", "");
        spec.prompt = doc.value("prompt", "");
        spec.delay_scale = doc.value("delay_scale", 1.0);
        spec.context_budget = doc.value("context_budget", 64);
        if (doc.contains("mode"))
            spec.mode = doc.at("mode").get<std::string>();

        for (const auto& tj : doc.at("tools")) {
            ToolSpec t;
            t.schema = schema_from_json(tj.at("schema"));
            if (tj.contains("annotation") && !tj.at("annotation").is_null())
                t.annotation = annotation_from_json(tj.at("annotation"));
            if (tj.contains("latency")) {
                const auto& l = tj.at("latency");
                t.latency.delays = l.is_array() ? l.get<std::vector<Time>>() : std::vector<Time>{l.get<Time>()};
            }
            if (tj.contains("returns"))
                t.returns = tj.at("returns").get<std::vector<Value>>();
            if (tj.contains("effects")) {
                const auto& e = tj.at("effects");
                t.effects.reads = e.value("reads", std::vector<std::string>{});
                t.effects.writes = e.value("writes", std::vector<std::string>{});
            }
            if (tj.contains("fail_on"))
                t.fail_on = tj.at("fail_on").get<std::set<std::size_t>>();
            t.error = tj.value("error", t.error);
            if (tj.contains("delegate"))
                t.delegate = tj.at("delegate").value("answers", std::map<std::string, std::string>{});
            spec.tools.push_back(std::move(t));
        }

        std::size_t auto_id = 0;
        for (const auto& turn : doc.at("script"))
            spec.script.push_back(parse_turn(turn, auto_id));
        for (const auto& turn : doc.value("recovery", Value::array()))
            spec.recovery.push_back(parse_turn(turn, auto_id));
    } catch (const InvalidSchema& e) {
        throw ValidationError(e.what());
    } catch (const Value::exception& e) {
        throw ValidationError(std::string("malformed workload: ") + e.what());
    }
    validate(spec);
    return spec;
}

void validate(const WorkloadSpec& spec) {
    std::set<std::string> tools;
    for (const auto& t : spec.tools) {
        if (!tools.insert(t.schema.name).second)
            throw ValidationError("duplicate tool: " + t.schema.name);
        if (t.schema.name == kAwaitFuture)
            throw ValidationError("await_future is provided by the runtime");
        for (auto d : t.latency.delays)
            if (d < 0)
                throw ValidationError("negative latency for " + t.schema.name);
    }
    if (!(spec.delay_scale > 0))
        throw ValidationError("delay_scale must be positive");
    if (spec.script.empty() || !spec.script.back().is_final())
        throw ValidationError("script must end with a final answer");

    std::set<std::string> emitted;
    auto check_turn = [&](const ScriptTurn& t, bool recovery) {
        if (!(t.decode_time > 0))
            throw ValidationError("decode_time must be positive");
        for (std::size_t i = 1; i < t.tokens.size(); ++i)
            if (t.tokens[i].second < t.tokens[i - 1].second)
                throw ValidationError("token offsets must be non-decreasing");
        for (const auto& w : t.when)
            if (!emitted.contains(w))
                throw ValidationError("trigger references call never emitted earlier: " + w);
        if (t.is_final() && !t.calls.empty())
            throw ValidationError("final turn cannot emit calls");
        bool has_await = false;
        for (const auto& c : t.calls) {
            if (c.name == kAwaitFuture) {
                has_await = true;
                if (!c.args.contains("future_ids") || !c.args.at("future_ids").is_array())
                    throw ValidationError("await_future needs a future_ids array");
            } else if (!tools.contains(c.name)) {
                throw ValidationError("unknown tool: " + c.name);
            }
            for (const auto& ref : collect_call_refs(c.args))
                if (!emitted.contains(ref.call))
                    throw ValidationError("call " + c.id + " references call never emitted earlier: " +
                                          ref.call);
        }
        if (has_await && t.calls.size() != 1)
            throw ValidationError("await_future must be the only call of its turn");
        if (t.final_text) {
            std::string_view text = *t.final_text;
            for (auto pos = text.find("{@"); pos != std::string_view::npos; pos = text.find("{@", pos + 1)) {
                auto close = text.find('}', pos);
                if (close == std::string_view::npos)
                    throw ValidationError("unterminated reference in final answer");
                auto ref = parse_call_ref(std::string(text.substr(pos + 1, close - pos - 1)));
                if (!ref || !emitted.contains(ref->call))
                    throw ValidationError("final answer references unknown call");
            }
        }
        for (const auto& c : t.calls) {
            if (!emitted.insert(c.id).second)
                throw ValidationError("duplicate call id: " + c.id);
        }
        (void)recovery;
    };
    for (const auto& t : spec.script)
        check_turn(t, false);
    for (const auto& t : spec.recovery)
        check_turn(t, true);
}

WorkloadSpec load_workload(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open workload " + path.string());
    Value doc;
    try {
        doc = Value::parse(in);
    } catch (const Value::parse_error& e) {
        throw ParseError("malformed workload " + path.string() + ": " + e.what());
    }
    return parse_workload(doc);
}

Value to_json(const WorkloadSpec& spec) {
    Value tools = Value::array();
    for (const auto& t : spec.tools) {
        Value tj{{"schema", to_json(t.schema)}};
        if (t.annotation)
            tj["annotation"] = to_json(*t.annotation);
        tj["latency"] = t.latency.delays.size() == 1 ? Value(t.latency.delays[0]) : Value(t.latency.delays);
        if (t.returns)
            tj["returns"] = *t.returns;
        if (!t.effects.reads.empty() || !t.effects.writes.empty())
            tj["effects"] = {{"reads", t.effects.reads}, {"writes", t.effects.writes}};
        if (!t.fail_on.empty()) {
            tj["fail_on"] = t.fail_on;
            tj["error"] = t.error;
        }
        if (t.delegate)
            tj["delegate"] = {{"answers", *t.delegate}};
        tools.push_back(tj);
    }
    Value script = Value::array();
    for (const auto& t : spec.script)
        script.push_back(turn_to_json(t));
    Value j{{"system", spec.system},
            {"prompt", spec.prompt},
            {"tools", tools},
            {"script", script},
            {"delay_scale", spec.delay_scale},
            {"context_budget", spec.context_budget}};
    if (!spec.recovery.empty()) {
        Value rec = Value::array();
        for (const auto& t : spec.recovery)
            rec.push_back(turn_to_json(t));
        j["recovery"] = rec;
    }
    if (spec.mode)
        j["mode"] = *spec.mode;
    return j;
}

std::vector<WorkloadSpec> make_latency_sweep(const WorkloadSpec& base, const std::vector<Time>& delays) {
    std::vector<WorkloadSpec> out;
    for (auto d : delays) {
        if (!(d > 0))
            throw std::invalid_argument("sweep delays must be positive");
        WorkloadSpec w = base;
        for (auto& t : w.tools)
            t.latency.delays = {d};
        out.push_back(std::move(w));
    }
    return out;
}

std::string digest(const Value& v) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : v.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

// Fills an output template: string leaves get a digest suffix, other leaves stay.
Value stamp_template(const Value& shape, const std::string& d) {
    if (shape.is_structured()) {
        Value out = shape;
        for (auto it = out.begin(); it != out.end(); ++it)
            *it = stamp_template(*it, d);
        return out;
    }
    if (shape.is_string())
        return shape.get<std::string>() + "#" + d.substr(0, 8);
    return shape;
}

}  // namespace

ToolRegistry make_tool_registry(const WorkloadSpec& spec) {
    ToolRegistry reg;
    for (const auto& t : spec.tools) {
        auto latency = [model = t.latency](std::size_t inv) { return model.at(inv); };
        if (t.delegate) {
            auto answers = *t.delegate;
            auto binding = thinking_tool(t.schema.name, [answers](const std::string& subquery, const std::string&) {
                auto it = answers.find(subquery);
                return it != answers.end() ? it->second : "answer: " + subquery;
            });
            binding.latency = latency;
            reg.add(std::move(binding));
            continue;
        }
        ToolBinding b;
        b.name = t.schema.name;
        b.latency = latency;
        b.behavior = [tool = t](const Value& args, std::size_t inv, ToolState& state) -> ToolOutcome {
            if (tool.fail_on.contains(inv))
                return ToolOutcome::failure(tool.error);
            Value observed = Value::object();
            for (const auto& r : tool.effects.reads) {
                auto path = expand_template(r, args).str();
                auto it = state.find(path);
                observed[path] = it == state.end() ? Value() : it->second;
            }
            Value basis{{"tool", tool.schema.name}, {"inv", inv}, {"args", args}, {"observed", observed}};
            auto d = digest(basis);
            for (const auto& w : tool.effects.writes)
                state[expand_template(w, args).str()] = Value{{"by", tool.schema.name}, {"inv", inv}, {"digest", d}};
            if (tool.returns && !tool.returns->empty())
                return ToolOutcome::ok((*tool.returns)[std::min(inv, tool.returns->size() - 1)]);
            if (auto shape = tool.outputs(); shape && shape->is_object())
                return ToolOutcome::ok(stamp_template(*shape, d));
            bool odd = (d.back() - '0') % 2 != 0;
            return ToolOutcome::ok(Value{{"k", odd ? "x" : "y"}, {"v", d}});
        };
        reg.add(std::move(b));
    }
    return reg;
}

}  // namespace futurecall

namespace futurecall {

WorkloadSpec random_workload(std::uint64_t seed, const GeneratorOptions& options) {
    std::mt19937_64 rng(seed);
    auto pick = [&rng](std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    auto coin = [&rng](double p) { return std::bernoulli_distribution(p)(rng); };

    WorkloadSpec w;
    w.prompt = "generated workload " + std::to_string(seed);
    const std::size_t n = pick(1, std::max<std::size_t>(1, options.max_calls));
    const std::size_t roots = pick(1, std::max<std::size_t>(1, options.max_paths));

    auto random_path = [&] {
        std::string p = "/r" + std::to_string(pick(0, roots - 1));
        if (coin(0.4))
            p += "/s" + std::to_string(pick(0, 1));
        return p;
    };
    // A label covering `path`: the path itself, or an ancestor with subtree scope.
    auto cover = [&](const std::string& path) {
        auto slash = path.rfind('/');
        if (slash > 0 && coin(0.4))
            return PathSpec{path.substr(0, slash), true};
        return PathSpec{path, coin(0.3)};
    };

    for (std::size_t i = 0; i < n; ++i) {
        ToolSpec t;
        t.schema.name = "t" + std::to_string(i);
        t.schema.description = "generated tool";
        t.schema.parameters["x"] = Parameter{"string", "input", false, false};
        t.latency.delays = {static_cast<Time>(pick(1, 6))};
        DependencyAnnotation a;
        for (std::size_t k = pick(0, 2); k > 0; --k) {
            auto p = random_path();
            t.effects.reads.push_back(p);
            auto spec = cover(p);
            (coin(0.2) ? a.writes : a.reads).push_back(spec);
        }
        for (std::size_t k = pick(0, 2); k > 0; --k) {
            auto p = random_path();
            t.effects.writes.push_back(p);
            a.writes.push_back(cover(p));
        }
        if (coin(0.2))
            a.reads.push_back(PathSpec{random_path(), coin(0.5)});
        if (options.annotate)
            t.annotation = a;
        w.tools.push_back(std::move(t));
    }

    std::vector<std::string> earlier;  // calls of completed turns
    std::size_t next = 0;
    while (next < n) {
        ScriptTurn turn;
        turn.decode_time = static_cast<Time>(pick(1, 2));
        for (const auto& e : earlier)
            if (coin(0.25))
                turn.when.push_back(e);
        std::size_t k = std::min(pick(1, 3), n - next);
        for (std::size_t j = 0; j < k; ++j, ++next) {
            ScriptCall c;
            c.id = "C" + std::to_string(next);
            c.name = "t" + std::to_string(next);
            if (!earlier.empty() && coin(0.4)) {
                const auto& src = earlier[pick(0, earlier.size() - 1)];
                c.args = {{"x", coin(0.5) ? "@" + src : "@" + src + ".k"}};
            } else {
                c.args = {{"x", "v" + std::to_string(next)}};
            }
            turn.calls.push_back(std::move(c));
        }
        for (const auto& c : turn.calls)
            earlier.push_back(c.id);
        w.script.push_back(std::move(turn));
    }
    ScriptTurn final_turn;
    for (const auto& e : earlier)
        if (coin(0.3))
            final_turn.when.push_back(e);
    final_turn.final_text = "done";
    w.script.push_back(std::move(final_turn));
    w.context_budget = 256;
    validate(w);
    return w;
}

}  // namespace futurecall

// SPDX-License-Identifier: Apache-2.0
#include "futurecall/driver.hpp"

#include <algorithm>
#include <memory>

namespace futurecall {

namespace {

constexpr std::pair<RunMode, std::string_view> kModeNames[] = {
    {RunMode::sync_sequential, "sync-sequential"},
    {RunMode::sync_parallel, "sync-parallel"},
    {RunMode::async_sequential, "async-sequential"},
    {RunMode::async_parallel, "async-parallel"},
};

bool has_await(const ScriptTurn& t) {
    return std::any_of(t.calls.begin(), t.calls.end(), [](const ScriptCall& c) { return c.name == kAwaitFuture; });
}

// True once the first `[` after `from` is balanced by its `]`.
bool array_closed(const std::string& text, std::size_t from) {
    auto open = text.find('[', from);
    if (open == std::string::npos)
        return false;
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\')
                ++i;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"')
            in_string = true;
        else if (c == '[')
            ++depth;
        else if (c == ']' && --depth == 0)
            return true;
    }
    return false;
}

std::string text_of(const Value& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

std::string_view to_string(RunMode m) {
    for (const auto& [mode, name] : kModeNames)
        if (mode == m)
            return name;
    return "?";
}

RunMode parse_run_mode(std::string_view text) {
    for (const auto& [mode, name] : kModeNames)
        if (name == text)
            return mode;
    throw std::invalid_argument("unknown mode: " + std::string(text));
}

std::vector<RunMode> all_run_modes() {
    return {RunMode::sync_sequential, RunMode::sync_parallel, RunMode::async_sequential, RunMode::async_parallel};
}

AwaitTiming locate_await(const std::vector<std::pair<std::string, Time>>& tokens, Time duration) {
    if (tokens.empty())
        return {duration, duration};
    std::string text;
    std::optional<Time> detect;
    std::size_t name_end = 0;
    for (const auto& [piece, at] : tokens) {
        text += piece;
        Time t = std::min(at, duration);
        if (!detect) {
            auto p = text.find(kAwaitFuture);
            if (p == std::string::npos)
                continue;
            detect = t;
            name_end = p + kAwaitFuture.size();
        }
        if (array_closed(text, name_end))
            return {*detect, t};
    }
    return {detect.value_or(duration), duration};
}

// ---------------------------------------------------------------------------

ScriptedDecoder::ScriptedDecoder(const WorkloadSpec& spec, RunMode mode) : mode_(mode) {
    turns_ = expand(spec.script);
    recovery_ = expand(spec.recovery);
    for (const auto& t : spec.script)
        if (t.is_final())
            last_final_ = t;
}

std::vector<ScriptTurn> ScriptedDecoder::expand(const std::vector<ScriptTurn>& in) const {
    std::vector<ScriptTurn> out;
    for (const auto& t : in) {
        if (!is_async(mode_) && has_await(t))
            continue;
        if (is_parallel(mode_) || t.calls.size() <= 1) {
            out.push_back(t);
            continue;
        }
        for (std::size_t i = 0; i < t.calls.size(); ++i) {
            ScriptTurn one;
            if (i == 0)
                one.when = t.when;
            one.calls = {t.calls[i]};
            one.decode_time = t.decode_time;
            out.push_back(std::move(one));
        }
    }
    return out;
}

bool ScriptedDecoder::ready(const ModelView& view) const {
    if (exhausted())
        return false;
    const auto& t = turns_[next_];
    return std::all_of(t.when.begin(), t.when.end(), [&](const std::string& c) { return view.knows(c); });
}

bool ScriptedDecoder::exhausted() const { return next_ >= turns_.size(); }

void ScriptedDecoder::begin_recovery() {
    turns_.erase(turns_.begin() + static_cast<std::ptrdiff_t>(next_), turns_.end());
    bool ends_final = !recovery_.empty() && recovery_.back().is_final();
    turns_.insert(turns_.end(), recovery_.begin(), recovery_.end());
    recovery_.clear();
    if (!ends_final && last_final_) {
        ScriptTurn again = *last_final_;
        again.when.clear();
        turns_.push_back(std::move(again));
    }
}

void ScriptedDecoder::start_turn(const ModelView& view, EventLoop& loop, std::function<void(DecodedTurn)> done) {
    if (exhausted())
        throw ScriptExhausted("no scripted turn left");
    const ScriptTurn& turn = turns_[next_++];

    auto resolve = [&view](const CallRef& r) -> std::optional<Value> {
        if (auto it = view.observed.find(r.call); it != view.observed.end())
            if (auto v = extract_path(it->second, r.fields))
                return v;
        if (auto h = view.handles.find(r.call); h != view.handles.end()) {
            std::string id = h->second;
            for (const auto& f : r.fields)
                id += "." + f;
            return Value(id);
        }
        return std::nullopt;
    };
    std::function<Value(const Value&)> materialize = [&](const Value& v) -> Value {
        if (v.is_structured()) {
            Value out = v;
            for (auto it = out.begin(); it != out.end(); ++it)
                *it = materialize(*it);
            return out;
        }
        if (v.is_string())
            if (auto ref = parse_call_ref(v.get<std::string>()))
                if (auto r = resolve(*ref))
                    return *r;
        return v;
    };

    DecodedTurn out;
    out.trigger = turn.when;
    for (const auto& c : turn.calls) {
        out.calls.push_back(ToolCall{c.id, c.name, materialize(c.args)});
        auto& src = out.sources[c.id];
        for (const auto& ref : collect_call_refs(c.args))
            src.insert(ref.call);
    }
    if (turn.final_text) {
        std::string text = *turn.final_text;
        std::string rendered;
        std::size_t pos = 0;
        while (true) {
            auto open = text.find("{@", pos);
            auto close = open == std::string::npos ? open : text.find('}', open);
            if (close == std::string::npos) {
                rendered += text.substr(pos);
                break;
            }
            rendered += text.substr(pos, open - pos);
            auto ref = parse_call_ref(text.substr(open + 1, close - open - 1));
            std::optional<Value> v = ref ? resolve(*ref) : std::nullopt;
            rendered += v ? text_of(*v) : text.substr(open, close - open + 1);
            pos = close + 1;
        }
        out.final_text = rendered;
    }

    Time duration = has_await(turn) ? locate_await(turn.tokens, turn.decode_time).parse : turn.decode_time;
    loop.schedule(duration, [done = std::move(done), out = std::move(out)]() mutable { done(std::move(out)); });
}

// ---------------------------------------------------------------------------

Integrator::Integrator(const FutureStore& store, CallOf call_of) : store_(store), call_of_(std::move(call_of)) {}

void Integrator::expose(const FutureId& base) { exposed_.push_back(base.base_id()); }

std::optional<Integrator::Batch> Integrator::integrate_boundary() {
    Batch b;
    Value bindings = Value::object();
    for (const auto& f : exposed_) {
        if (integrated_.contains(f))
            continue;
        auto st = store_.state_of(f);
        const auto* r = std::get_if<Resolved>(&st);
        if (!r)
            continue;
        bindings[f.str()] = r->value;
        for (const auto& field : store_.fields_of(f)) {
            auto fs = store_.state_of(field);
            if (const auto* fr = std::get_if<Resolved>(&fs))
                bindings[field.str()] = fr->value;
        }
        integrated_.insert(f);
        b.futures.push_back(f);
    }
    if (b.futures.empty())
        return std::nullopt;
    b.message.role = Role::user;
    b.message.content = Value{{"type", "future_bindings"}, {"bindings", bindings}};
    b.message.bound_futures = bindings;
    return b;
}

ErrorInfo Integrator::describe_failure(const FutureId& base) const {
    auto st = store_.state_of(base);
    if (const auto* f = std::get_if<Failed>(&st)) {
        ErrorInfo e = f->error;
        if (e.origin_call.empty())
            e.origin_call = call_of_(base);
        return e;
    }
    if (const auto* c = std::get_if<Cancelled>(&st)) {
        auto origin = call_of_(c->cause.base_id());
        return ErrorInfo{ErrorKind::cancelled_dependency,
                         "cancelled because " + c->cause.str() + " did not resolve", origin};
    }
    throw std::logic_error("future has not failed: " + base.str());
}

std::optional<Integrator::Batch> Integrator::inject_failures() {
    Batch b;
    Value failures = Value::array();
    for (const auto& f : exposed_) {
        if (reported_.contains(f))
            continue;
        auto st = store_.state_of(f);
        if (!std::holds_alternative<Failed>(st) && !std::holds_alternative<Cancelled>(st))
            continue;
        auto e = describe_failure(f);
        failures.push_back({{"future", f.str()},
                            {"call", call_of_(f)},
                            {"kind", to_string(e.kind)},
                            {"message", e.message},
                            {"origin", e.origin_call}});
        reported_.insert(f);
        b.futures.push_back(f);
    }
    if (b.futures.empty())
        return std::nullopt;
    b.message.role = Role::user;
    b.message.content = Value{{"type", "future_failures"}, {"failures", failures}};
    return b;
}

// ---------------------------------------------------------------------------

namespace {

class Runner {
public:
    Runner(const WorkloadSpec& spec, const RunConfig& config, Decoder& decoder, const ToolRegistry& tools)
        : spec_(spec),
          config_(config),
          decoder_(decoder),
          tools_(tools),
          loop_(config.clock, config.seconds_per_unit.value_or(spec.delay_scale)),
          scheduler_(store_),
          executor_(loop_, store_, scheduler_, tools_, state_),
          integrator_(store_, [this](const FutureId& f) { return call_of(f); }),
          budget_(config.context_budget.value_or(spec.context_budget)) {}

    RunTrace run();

private:
    enum class Phase { boundary, decoding, executing, awaiting, done };

    struct Emitted {
        std::string id;
        std::string tool;
        int turn = 0;
        std::set<std::string> sources;
        std::set<std::string> required;
        bool session_read = false;
        bool session_write = false;
    };

    struct SyncCall {
        std::string id;
        std::string tool;
        Value args;
        int turn = 0;
        std::size_t invocation = 0;
        std::vector<Access> paths;
        std::string status;  // executing | done | failed | cancelled | rejected
        Value result;
        std::string error;
        std::string origin;
        Time start = 0;
        Time end = 0;
    };

    std::string call_of(const FutureId& f) const {
        auto it = future_call_.find(f.number());
        return it == future_call_.end() ? f.str() : it->second;
    }
    const ToolSpec* spec_of(const std::string& tool) const {
        for (const auto& t : spec_.tools)
            if (t.schema.name == tool)
                return &t;
        return nullptr;
    }
    std::optional<DependencyAnnotation> annotation_of(const std::string& tool) const {
        const auto* t = spec_of(tool);
        if (!t)
            return std::nullopt;
        if (t->annotation)
            return t->annotation;
        if (t->delegate)
            return DependencyAnnotation{};
        return std::nullopt;
    }

    void append(Message m);
    void event(Time t0, Time t1, std::string kind, std::string id, int turn) {
        trace_.events.push_back(TraceEvent{t0, t1, std::move(kind), std::move(id), turn});
    }
    bool all_calls_terminal() const;
    void boundary();
    void finish_run();
    void on_decoded(DecodedTurn d);
    void process_async_calls();
    void submit_async(const ToolCall& c);
    bool start_await(const ToolCall& c);
    void run_sync_batch();
    void finish_sync_batch();
    void observe_future(const FutureId& base);
    void build_results();

    const WorkloadSpec& spec_;
    RunConfig config_;
    Decoder& decoder_;
    const ToolRegistry& tools_;
    EventLoop loop_;
    FutureStore store_;
    ToolState state_;
    Scheduler scheduler_;
    Executor executor_;
    Integrator integrator_;
    int budget_;

    RunTrace trace_;
    ModelView view_;
    Phase phase_ = Phase::boundary;
    bool final_emitted_ = false;
    bool in_recovery_ = false;
    std::optional<Time> waiting_since_;
    Time decode_start_ = 0;
    int turn_no_ = 0;

    DecodedTurn current_;
    std::size_t next_call_ = 0;
    std::set<std::string> required_;
    std::map<std::string, std::size_t> invocations_;
    std::map<std::uint64_t, std::string> future_call_;
    std::vector<Emitted> emitted_;
    std::map<std::string, std::pair<Time, Time>> exec_times_;

    std::vector<SyncCall> batch_;
    std::size_t batch_remaining_ = 0;
    std::map<std::string, SyncCall> sync_calls_;
    SessionState sync_session_;
};

void Runner::append(Message m) {
    trace_.context.push_back(std::move(m));
    if (static_cast<int>(trace_.context.size()) > budget_)
        throw ContextOverflow("context exceeds budget of " + std::to_string(budget_) + " messages");
}

bool Runner::all_calls_terminal() const {
    for (const auto& e : emitted_)
        if (scheduler_.has_call(e.id) && !is_terminal(scheduler_.call(e.id).status))
            return false;
    return true;
}

RunTrace Runner::run() {
    store_.set_poster([this](FutureStore::Continuation k) { loop_.schedule(0, std::move(k)); });
    store_.set_clock([this] { return loop_.now(); });
    executor_.set_policy(config_.policy);
    executor_.set_exec_sink([this](const CallRecord& c, Time start, Time end) {
        exec_times_[c.id] = {start, end};
        event(start, end, "exec", c.id, c.turn);
    });
    trace_.mode = std::string(to_string(config_.mode));
    view_.mode = config_.mode;
    view_.context = &trace_.context;

    if (!spec_.system.empty())
        append(Message{Role::system, spec_.system, {}, {}, {}});
    append(Message{Role::user, spec_.prompt, {}, {}, {}});

    boundary();
    while (phase_ != Phase::done) {
        if (loop_.empty()) {
            if (loop_.wait_external())
                continue;
            if (phase_ == Phase::boundary) {
                boundary();
                if (phase_ == Phase::done || !loop_.empty())
                    continue;
            }
            throw ScriptExhausted("conversation cannot progress: nothing scheduled and no turn is ready");
        }
        loop_.advance();
        if (phase_ == Phase::boundary && (loop_.empty() || loop_.next_time() > loop_.now()))
            boundary();
    }

    if (auto bad = lint_protocol(trace_.context); !bad.empty())
        throw std::logic_error("protocol violation for call " + bad.front());
    build_results();
    return std::move(trace_);
}

void Runner::observe_future(const FutureId& base) {
    auto st = store_.state_of(base);
    auto call = call_of(base);
    if (const auto* r = std::get_if<Resolved>(&st))
        view_.observed[call] = r->value;
    else if (is_terminal(st))
        view_.failures[call] = integrator_.describe_failure(base);
}

void Runner::boundary() {
    Time t = loop_.stamp();
    if (is_async(config_.mode)) {
        bool settled = all_calls_terminal();
        std::optional<Integrator::Batch> failures;
        if (!final_emitted_ || settled)
            failures = integrator_.inject_failures();
        // Past the final answer, values are integrated only to inform a recovery turn.
        if (!final_emitted_ || failures) {
            if (auto b = integrator_.integrate_boundary()) {
                std::string ids;
                for (const auto& f : b->futures) {
                    observe_future(f);
                    ids += (ids.empty() ? "" : ",") + f.str();
                }
                append(std::move(b->message));
                event(t, t, "integrate", ids, turn_no_);
            }
        }
        if (failures) {
            std::string ids;
            for (const auto& f : failures->futures) {
                observe_future(f);
                ids += (ids.empty() ? "" : ",") + f.str();
            }
            append(std::move(failures->message));
            event(t, t, "failure", ids, turn_no_);
            if (final_emitted_) {
                decoder_.begin_recovery();
                final_emitted_ = false;
                in_recovery_ = true;
            }
        }
        if (final_emitted_) {
            if (settled)
                finish_run();
            return;
        }
    } else if (final_emitted_) {
        finish_run();
        return;
    }

    if (decoder_.exhausted())
        throw ScriptExhausted("decoder ran out of turns before a final answer");
    if (!decoder_.ready(view_)) {
        if (!waiting_since_)
            waiting_since_ = t;
        return;
    }
    if (waiting_since_) {
        if (t > *waiting_since_)
            event(*waiting_since_, t, "await", "trigger", turn_no_ + 1);
        waiting_since_.reset();
    }
    phase_ = Phase::decoding;
    decode_start_ = t;
    ++turn_no_;
    decoder_.start_turn(view_, loop_, [this](DecodedTurn d) { on_decoded(std::move(d)); });
}

void Runner::finish_run() {
    if (is_async(config_.mode)) {
        auto pending = store_.pending();
        if (!pending.empty()) {
            std::string ids;
            for (const auto& f : pending)
                ids += (ids.empty() ? "" : ", ") + f.str();
            throw LeakedFuture("pending futures at termination: " + ids);
        }
    }
    trace_.end_to_end = loop_.stamp();
    trace_.complete = true;
    phase_ = Phase::done;
}

void Runner::on_decoded(DecodedTurn d) {
    Time t = loop_.stamp();
    std::string label;
    if (d.final_text)
        label = "final";
    for (const auto& c : d.calls)
        label += (label.empty() ? "" : ",") + c.id;
    event(decode_start_, t, "decode", label, turn_no_);
    ++trace_.decode_turns;
    if (in_recovery_)
        ++trace_.recovery_turns;
    required_.insert(d.trigger.begin(), d.trigger.end());

    if (d.final_text) {
        append(Message{Role::assistant, *d.final_text, {}, {}, {}});
        trace_.final_answer = *d.final_text;
        final_emitted_ = true;
        phase_ = Phase::boundary;
        return;
    }
    append(Message{Role::assistant, Value(), d.calls, {}, {}});
    current_ = std::move(d);
    next_call_ = 0;
    if (is_async(config_.mode))
        process_async_calls();
    else
        run_sync_batch();
}

void Runner::process_async_calls() {
    while (next_call_ < current_.calls.size()) {
        const auto& c = current_.calls[next_call_++];
        if (c.name == kAwaitFuture) {
            if (start_await(c))
                return;
            continue;
        }
        submit_async(c);
    }
    phase_ = Phase::boundary;
}

void Runner::submit_async(const ToolCall& c) {
    auto reject = [&](const std::string& msg) { append(Message{Role::tool, Value{{"error", msg}}, {}, c.id, {}}); };
    if (!tools_.contains(c.name))
        return reject("unknown tool: " + c.name);
    if (scheduler_.has_call(c.id))
        return reject("duplicate call id: " + c.id);

    CallRecord rec;
    rec.id = c.id;
    rec.tool = c.name;
    rec.args = c.args;
    rec.annotation = annotation_of(c.name);
    rec.result = store_.create(FutureKind::result);
    rec.invocation = invocations_[c.name]++;
    rec.turn = turn_no_;
    future_call_[rec.result.number()] = c.id;

    Emitted e{c.id, c.name, turn_no_, current_.sources[c.id], required_, false, false};
    for (const auto& ref : scan_future_refs(c.args, store_))
        if (auto p = executor_.producer_of(ref.id))
            e.sources.insert(*p);
    if (rec.annotation) {
        e.session_read = rec.annotation->session_read;
        e.session_write = rec.annotation->session_write;
    }
    emitted_.push_back(std::move(e));

    auto result = rec.result;
    executor_.submit(std::move(rec));
    integrator_.expose(result);
    view_.handles[c.id] = result.str();
    const auto* ts = spec_of(c.name);
    auto content = futurize_output_template(ts ? ts->outputs() : std::nullopt, result, store_);
    append(Message{Role::tool, content, {}, c.id, {}});
}

bool Runner::start_await(const ToolCall& c) {
    std::vector<FutureId> ids;
    std::string unknown;
    const auto list = c.args.value("future_ids", Value::array());
    for (const auto& v : list.is_array() ? list : Value::array({list})) {
        auto text = v.is_string() ? v.get<std::string>() : v.dump();
        auto id = FutureId::parse(text);
        if (!id || !store_.contains(*id) || store_.kind_of(*id) != FutureKind::result) {
            unknown = text;
            break;
        }
        ids.push_back(*id);
    }
    if (!unknown.empty()) {
        append(Message{Role::tool, Value{{"error", "unknown future: " + unknown}}, {}, c.id, {}});
        return false;
    }
    if (ids.empty()) {
        append(Message{Role::tool, Value::object(), {}, c.id, {}});
        return false;
    }

    phase_ = Phase::awaiting;
    Time t0 = loop_.stamp();
    int turn = turn_no_;
    store_.wait_for(ids, [this, id = c.id, t0, turn](std::map<FutureId, FutureState> states) {
        Value content = Value::object();
        for (const auto& [f, st] : states) {
            auto base = f.base_id();
            if (const auto* r = std::get_if<Resolved>(&st))
                content[f.str()] = r->value;
            else if (f.is_field() && std::holds_alternative<Resolved>(store_.state_of(base)))
                content[f.str()] = Value{{"error", "path not found"}};
            else
                content[f.str()] = Value{{"error", integrator_.describe_failure(base).message}};
            if (!f.is_field()) {
                if (std::holds_alternative<Resolved>(st))
                    integrator_.mark_integrated(base);
                else
                    integrator_.mark_reported(base);
                observe_future(base);
            }
            required_.insert(call_of(base));
        }
        append(Message{Role::tool, content, {}, id, {}});
        event(t0, loop_.stamp(), "await", id, turn);
        process_async_calls();
    });
    return true;
}

void Runner::run_sync_batch() {
    batch_.clear();
    batch_remaining_ = 0;
    for (const auto& c : current_.calls) {
        SyncCall s;
        s.id = c.id;
        s.tool = c.name;
        s.args = c.args;
        s.turn = turn_no_;
        if (!tools_.contains(c.name) || sync_calls_.contains(c.id)) {
            s.status = "rejected";
            s.error = tools_.contains(c.name) ? "duplicate call id: " + c.id : "unknown tool: " + c.name;
            batch_.push_back(std::move(s));
            continue;
        }
        s.invocation = invocations_[c.name]++;
        auto annotation = annotation_of(c.name);
        Emitted e{c.id, c.name, turn_no_, current_.sources[c.id], required_, false, false};
        if (annotation) {
            e.session_read = annotation->session_read;
            e.session_write = annotation->session_write;
        }
        emitted_.push_back(e);

        for (const auto& src : e.sources) {
            if (auto it = view_.failures.find(src); it != view_.failures.end()) {
                s.status = "cancelled";
                s.origin = it->second.origin_call.empty() ? src : it->second.origin_call;
                s.error = "not executed: depends on failed call " + s.origin;
                break;
            }
        }
        if (s.status.empty()) {
            s.paths = root_fallback();
            try {
                auto r = resolve_paths(annotation, s.args, sync_session_, store_);
                if (auto* v = std::get_if<std::vector<Access>>(&r))
                    s.paths = *v;
            } catch (const BadPathTemplate&) {
            }
            s.status = "executing";
            s.start = loop_.stamp();
            ++batch_remaining_;
            auto idx = batch_.size();
            loop_.schedule(tools_.at(c.name).latency(s.invocation), [this, idx] {
                batch_[idx].end = loop_.stamp();
                if (--batch_remaining_ == 0)
                    finish_sync_batch();
            });
        }
        batch_.push_back(std::move(s));
    }
    phase_ = Phase::executing;
    if (batch_remaining_ == 0)
        finish_sync_batch();
}

void Runner::finish_sync_batch() {
    for (auto& s : batch_) {
        Value content;
        if (s.status == "executing") {
            ToolOutcome out;
            try {
                out = tools_.at(s.tool).behavior(s.args, s.invocation, state_);
            } catch (const std::exception& e) {
                out = ToolOutcome::failure(e.what());
            }
            exec_times_[s.id] = {s.start, s.end};
            event(s.start, s.end, "exec", s.id, s.turn);
            if (out.error) {
                s.status = "failed";
                s.error = *out.error;
                view_.failures[s.id] = ErrorInfo{ErrorKind::execution_error, s.error, s.id};
                content = Value{{"error", s.error}};
            } else {
                s.status = "done";
                s.result = out.value.value_or(Value());
                view_.observed[s.id] = s.result;
                auto a = annotation_of(s.tool);
                if (a && a->session_write)
                    merge_session_bindings(sync_session_.bindings, s.result);
                content = s.result;
            }
        } else if (s.status == "cancelled") {
            view_.failures[s.id] = ErrorInfo{ErrorKind::cancelled_dependency, s.error, s.origin};
            content = Value{{"error", s.error}};
        } else {
            content = Value{{"error", s.error}};
        }
        append(Message{Role::tool, content, {}, s.id, {}});
        if (s.status != "rejected")
            sync_calls_[s.id] = s;
    }
    batch_.clear();
    phase_ = Phase::boundary;
}

void Runner::build_results() {
    std::map<std::string, std::vector<Access>> paths;
    for (const auto& e : emitted_) {
        CallOutcome o;
        o.id = e.id;
        o.tool = e.tool;
        if (is_async(config_.mode)) {
            const auto& rec = scheduler_.call(e.id);
            o.status = std::string(to_string(rec.status));
            o.future = rec.result.str();
            auto st = store_.state_of(rec.result);
            if (const auto* r = std::get_if<Resolved>(&st))
                o.result = r->value;
            else if (is_terminal(st))
                o.error = integrator_.describe_failure(rec.result).message;
            paths[e.id] = rec.resolved_paths.value_or(root_fallback());
        } else {
            const auto& s = sync_calls_.at(e.id);
            o.status = s.status;
            o.result = s.result;
            o.error = s.error;
            paths[e.id] = s.paths;
        }
        if (auto it = exec_times_.find(e.id); it != exec_times_.end()) {
            o.start = it->second.first;
            o.end = it->second.second;
            trace_.dag.nodes[e.id] = it->second.second - it->second.first;
        }
        trace_.calls.push_back(std::move(o));
    }

    auto executed = [&](const std::string& id) { return trace_.dag.nodes.contains(id); };
    for (std::size_t j = 0; j < emitted_.size(); ++j) {
        const auto& b = emitted_[j];
        if (!executed(b.id))
            continue;
        for (const auto* set : {&b.sources, &b.required})
            for (const auto& s : *set)
                if (s != b.id && executed(s))
                    trace_.dag.edges.emplace(s, b.id);
        for (std::size_t i = 0; i < j; ++i) {
            const auto& a = emitted_[i];
            if (!executed(a.id))
                continue;
            if (config_.mode == RunMode::sync_parallel && a.turn == b.turn)
                continue;
            bool edge = a.session_write && (b.session_read || b.session_write);
            for (const auto& x : paths[a.id]) {
                for (const auto& y : paths[b.id])
                    if (conflicts(x, y)) {
                        edge = true;
                        break;
                    }
                if (edge)
                    break;
            }
            if (edge)
                trace_.dag.edges.emplace(a.id, b.id);
        }
    }

    trace_.final_state = Value::object();
    for (const auto& [k, v] : state_)
        trace_.final_state[k] = v;
}

}  // namespace

RunTrace run_conversation(const WorkloadSpec& spec, const RunConfig& config, Decoder& decoder,
                          const ToolRegistry& tools) {
    Runner runner(spec, config, decoder, tools);
    return runner.run();
}

RunTrace run_conversation(const WorkloadSpec& spec, const RunConfig& config) {
    ScriptedDecoder decoder(spec, config.mode);
    auto tools = make_tool_registry(spec);
    return run_conversation(spec, config, decoder, tools);
}

}  // namespace futurecall

// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <sstream>

#include "futurecall/thinking.hpp"
#include "helpers.hpp"

using namespace futurecall;

namespace {

const RunMode kSS = RunMode::sync_sequential;
const RunMode kSP = RunMode::sync_parallel;
const RunMode kAS = RunMode::async_sequential;
const RunMode kAP = RunMode::async_parallel;

WorkloadSpec parse(const char* text) { return parse_workload(Value::parse(text)); }

const TraceEvent* find_event(const RunTrace& t, const std::string& kind, const std::string& id) {
    for (const auto& e : t.events)
        if (e.kind == kind && e.id == id)
            return &e;
    return nullptr;
}

std::string dump(const RunTrace& t) {
    std::stringstream s;
    write_jsonl(s, t);
    return s.str() + context_json(t).dump();
}

// Two tools with latencies 8 and 10, both emitted in the first turn.
const char* kTwoTools = R"({
  "tools": [
    {"schema": {"name": "a", "description": "", "parameters": {}}, "annotation": {}, "latency": 8},
    {"schema": {"name": "b", "description": "", "parameters": {}}, "annotation": {}, "latency": 10}
  ],
  "script": [
    {"emit": [{"id": "A", "name": "a", "args": {}}, {"id": "B", "name": "b", "args": {}}], "decode_time": 1},
    {"emit": [{"id": "W", "name": "await_future", "args": {"future_ids": ["@A", "@B"]}}], "decode_time": 1},
    {"emit": {"final": "{@A} {@B}"}, "decode_time": 1}
  ]
})";

}  // namespace

TEST_CASE("run modes parse and print") {
    for (auto m : all_run_modes())
        CHECK(parse_run_mode(to_string(m)) == m);
    CHECK_THROWS_AS(parse_run_mode("turbo"), std::invalid_argument);
}

TEST_CASE("end-to-end latencies of the shipped fixtures") {
    struct Row {
        const char* fixture;
        Time ss, sp, as, ap;
    };
    for (const Row& r : {Row{"fig1.json", 19, 13, 13, 12}, Row{"vehicle.json", 15, 8, 10, 10},
                         Row{"diamond.json", 16, 12, 10, 10}, Row{"fail-chain.json", 14, 9, 7, 7},
                         Row{"thinking.json", 15, 8, 9, 8}, Row{"sweep.json", 25, 13, 10, 8}}) {
        CAPTURE(r.fixture);
        CHECK(testing::run(r.fixture, kSS).end_to_end == r.ss);
        CHECK(testing::run(r.fixture, kSP).end_to_end == r.sp);
        CHECK(testing::run(r.fixture, kAS).end_to_end == r.as);
        CHECK(testing::run(r.fixture, kAP).end_to_end == r.ap);
    }
}

TEST_CASE("fig1 timeline") {
    auto t = testing::run("fig1.json", kAS);
    const auto* f3 = find_event(t, "exec", "F3");
    REQUIRE(f3);
    CHECK(f3->t0 == 7);
    CHECK(f3->t1 == 12);
    CHECK(t.decode_turns == 4);
    CHECK(t.dag.edges.contains({"F2", "F3"}));
    auto sync = testing::run("fig1.json", kSS);
    CHECK(sync.final_state == t.final_state);
    CHECK(sync.final_answer == t.final_answer);
}

TEST_CASE("zero-call workload is a single decode") {
    auto spec = parse(R"({"tools": [], "script": [{"emit": {"final": "hello"}, "decode_time": 2}]})");
    for (auto m : all_run_modes()) {
        auto t = testing::run(spec, m);
        REQUIRE(t.events.size() == 1);
        CHECK(t.events[0].kind == "decode");
        CHECK(t.events[0].t0 == 0);
        CHECK(t.events[0].t1 == 2);
        CHECK(t.end_to_end == 2);
        CHECK(t.final_answer == "hello");
    }
}

TEST_CASE("integrator bindings and failures") {
    FutureStore store;
    std::map<FutureId, std::string> calls;
    Integrator in(store, [&](const FutureId& f) { return calls.at(f.base_id()); });
    auto f0 = store.create(FutureKind::result);
    auto f1 = store.create(FutureKind::result);
    auto f2 = store.create(FutureKind::result);
    calls = {{f0, "F1"}, {f1, "F2"}, {f2, "F3"}};
    for (const auto& f : {f0, f1, f2})
        in.expose(f);

    CHECK_FALSE(in.integrate_boundary());
    store.register_field(f0.field("x"));
    store.resolve(f0, Value{{"x", 42}});
    auto b = in.integrate_boundary();
    REQUIRE(b);
    CHECK(b->message.role == Role::user);
    CHECK(b->message.bound_futures == Value{{"fut_0", {{"x", 42}}}, {"fut_0.x", 42}});
    CHECK(b->message.content.at("type") == "future_bindings");
    CHECK_FALSE(in.integrate_boundary());

    store.fail(f1, ErrorInfo{ErrorKind::execution_error, "gateway timeout", "F2"});
    store.cancel(f2, f1);
    CHECK_FALSE(in.integrate_boundary());  // failures are not bindings
    auto fail = in.inject_failures();
    REQUIRE(fail);
    const auto& list = fail->message.content.at("failures");
    REQUIRE(list.size() == 2);
    CHECK(list[0].at("call") == "F2");
    CHECK(list[0].at("kind") == "execution-error");
    CHECK(list[0].at("message") == "gateway timeout");
    CHECK(list[1].at("call") == "F3");
    CHECK(list[1].at("kind") == "cancelled-dependency");
    CHECK(list[1].at("origin") == "F2");
    CHECK_FALSE(in.inject_failures());
}

TEST_CASE("failure chain with recovery") {
    auto t = testing::run("fail-chain.json", kAP);
    CHECK(t.outcome("F1")->status == "done");
    CHECK(t.outcome("F2")->status == "failed");
    CHECK(t.outcome("F3")->status == "cancelled");
    CHECK(t.outcome("F4")->status == "cancelled");
    CHECK(t.recovery_turns == 1);
    CHECK(t.final_answer.find("Reservation failed") == 0);
    CHECK_FALSE(find_event(t, "exec", "F3"));
    bool reported = false;
    for (const auto& m : t.context)
        if (m.role == Role::user && m.content.is_object() && m.content.value("type", "") == "future_failures")
            reported = true;
    CHECK(reported);

    auto s = testing::run("fail-chain.json", kSS);
    CHECK(s.outcome("F3")->status == "cancelled");
    CHECK(s.outcome("F3")->error.find("depends on failed call F2") != std::string::npos);
}

TEST_CASE("strict cancel policy") {
    RunConfig cfg;
    cfg.mode = kAP;
    cfg.policy = CancelPolicy::strict;
    auto t = run_conversation(load_workload(testing::fixture("fail-chain.json")), cfg);
    CHECK(t.outcome("F3")->status == "cancelled");
    CHECK(t.outcome("F1")->status == "done");
}

TEST_CASE("await returns at the latest resolution") {
    auto t = testing::run(parse(kTwoTools), kAP);
    const auto* w = find_event(t, "await", "W");
    REQUIRE(w);
    CHECK(w->t0 == 2);
    CHECK(w->t1 == 11);
    CHECK(t.end_to_end == 12);
    const Message* reply = nullptr;
    for (const auto& m : t.context)
        if (m.role == Role::tool && m.tool_call_id == "W")
            reply = &m;
    REQUIRE(reply);
    CHECK(reply->content.size() == 2);
    CHECK(reply->content.contains("fut_0"));
    CHECK(reply->content.contains("fut_1"));
}

TEST_CASE("await is dropped in sync modes") {
    auto t = testing::run(parse(kTwoTools), kSS);
    CHECK(t.end_to_end == 1 + 8 + 1 + 10 + 1);
    CHECK_FALSE(find_event(t, "await", "W"));
}

TEST_CASE("await decode ends at argument parse") {
    const char* text = R"J({
      "tools": [{"schema": {"name": "a", "description": "", "parameters": {}}, "annotation": {}, "latency": 1}],
      "script": [
        {"emit": [{"id": "A", "name": "a", "args": {}}], "decode_time": 1},
        {"emit": [{"id": "W", "name": "await_future", "args": {"future_ids": ["@A"]}}], "decode_time": 3,
         "tokens": [["await_", 0.5], ["future", 1.0], ["({\"future_ids\": [\"fut_0\"", 1.5], ["]})", 2.0], ["<eos>", 3.0]]},
        {"emit": {"final": "{@A}"}, "decode_time": 1}
      ]
    })J";
    auto timing = locate_await(parse(text).script[1].tokens, 3);
    CHECK(timing.detect == 1.0);
    CHECK(timing.parse == 2.0);
    CHECK(locate_await({}, 3).parse == 3);

    auto early = testing::run(parse(text), kAP);
    // Decode runs [1, 3]; A resolved at 2, so the value returns at 3.
    CHECK(find_event(early, "decode", "W")->t1 == 3);
    CHECK(find_event(early, "await", "W")->t1 == 3);
    CHECK(early.end_to_end == 4);

    auto spec = parse(text);
    spec.script[1].tokens.clear();
    auto full = testing::run(spec, kAP);
    CHECK(full.end_to_end == 5);
}

TEST_CASE("await edge cases") {
    const char* text = R"({
      "tools": [{"schema": {"name": "a", "description": "", "parameters": {}}, "annotation": {}, "latency": 4}],
      "script": [
        {"emit": [{"id": "A", "name": "a", "args": {}}], "decode_time": 1},
        {"emit": [{"id": "E", "name": "await_future", "args": {"future_ids": []}}], "decode_time": 1},
        {"emit": [{"id": "U", "name": "await_future", "args": {"future_ids": ["fut_99"]}}], "decode_time": 1},
        {"when": {"resolved": ["@A"]}, "emit": {"final": "done"}, "decode_time": 1}
      ]
    })";
    auto t = testing::run(parse(text), kAP);
    std::map<std::string, Value> replies;
    for (const auto& m : t.context)
        if (m.role == Role::tool)
            replies[m.tool_call_id] = m.content;
    CHECK(replies.at("E") == Value::object());
    CHECK(replies.at("U").at("error").get<std::string>().find("fut_99") != std::string::npos);
    CHECK(find_event(t, "decode", "E")->t1 == 2);
    // The unsatisfied trigger shows up as an implicit wait.
    const auto* wait = find_event(t, "await", "trigger");
    REQUIRE(wait);
    CHECK(wait->t0 == 3);
    CHECK(wait->t1 == 5);
    CHECK(t.end_to_end == 6);
}

TEST_CASE("thinking tools") {
    auto par = testing::run("thinking.json", kAP);
    auto t1 = find_event(par, "exec", "T1"), t2 = find_event(par, "exec", "T2");
    REQUIRE(t1);
    REQUIRE(t2);
    CHECK(t1->t0 == t2->t0);  // overlap: completion at the max, not the sum
    CHECK(par.end_to_end == 1 + 6 + 1);
    CHECK(par.final_answer.find("6650 km") != std::string::npos);

    const char* gated = R"({
      "tools": [{"schema": {"name": "think", "description": "",
                            "parameters": {"subquery": {"type": "string"}, "context": {"type": "string"}}},
                 "delegate": {"answers": {}}, "latency": 6}],
      "script": [
        {"emit": [{"id": "T1", "name": "think", "args": {"subquery": "first"}}], "decode_time": 1},
        {"emit": [{"id": "T2", "name": "think", "args": {"subquery": "second", "context": "@T1"}}], "decode_time": 1},
        {"when": {"resolved": ["@T2"]}, "emit": {"final": "{@T2}"}, "decode_time": 1}
      ]
    })";
    auto g = testing::run(parse(gated), kAP);
    CHECK(find_event(g, "exec", "T2")->t0 == find_event(g, "exec", "T1")->t1);
    CHECK(g.dag.edges.contains({"T1", "T2"}));
    CHECK(g.end_to_end == 1 + 6 + 6 + 1);
}

TEST_CASE("thinking delegate errors surface as execution errors") {
    auto b = thinking_tool("think", [](const std::string&, const std::string&) -> std::string {
        throw std::runtime_error("no model");
    });
    ToolState st;
    auto out = b.behavior(Value{{"subquery", "q"}}, 0, st);
    REQUIRE(out.error);
    CHECK(*out.error == "delegate failed: no model");
    auto ok = thinking_tool("think", [](const std::string& q, const std::string&) { return "re: " + q; });
    CHECK(*ok.behavior(Value{{"subquery", "q"}}, 0, st).value == "re: q");
}

TEST_CASE("virtual runs are byte-identical") {
    for (const char* f : {"fig1.json", "fail-chain.json", "diamond.json", "vehicle.json"})
        for (auto m : all_run_modes())
            CHECK(dump(testing::run(f, m)) == dump(testing::run(f, m)));
}

TEST_CASE("async final state equals sync-sequential and the bound holds") {
    for (const char* f : {"fig1.json", "vehicle.json", "diamond.json", "thinking.json", "sweep.json"}) {
        CAPTURE(f);
        auto base = testing::run(f, kSS);
        for (auto m : all_run_modes()) {
            auto t = testing::run(f, m);
            CHECK(t.final_state == base.final_state);
            auto in = trace_to_inputs(t);
            CHECK(t.end_to_end >= std::max(in.t_llm, in.t_cp) - 1e-9);
        }
    }
}

TEST_CASE("wall clock keeps the virtual event order") {
    auto spec = load_workload(testing::fixture("fig1.json"));
    RunConfig v;
    v.mode = kAP;
    RunConfig w = v;
    w.clock = ClockKind::wall;
    w.seconds_per_unit = 0.004;
    auto a = run_conversation(spec, v);
    auto b = run_conversation(spec, w);
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        CHECK(a.events[i].kind == b.events[i].kind);
        CHECK(a.events[i].id == b.events[i].id);
    }
    CHECK(b.end_to_end == doctest::Approx(a.end_to_end).epsilon(0.5));
    CHECK(a.final_state == b.final_state);
}

TEST_CASE("context budget") {
    RunConfig cfg;
    cfg.mode = kAP;
    cfg.context_budget = 4;
    CHECK_THROWS_AS(run_conversation(load_workload(testing::fixture("fig1.json")), cfg), ContextOverflow);
}

TEST_CASE("script that can never progress") {
    auto spec = parse(R"({
      "tools": [{"schema": {"name": "bad", "description": "", "parameters": {}}, "annotation": {},
                 "fail_on": [0], "latency": 1}],
      "script": [
        {"emit": [{"id": "A", "name": "bad", "args": {}}], "decode_time": 1},
        {"emit": [{"id": "B", "name": "bad", "args": {}}], "decode_time": 1},
        {"when": {"resolved": ["@A"]}, "emit": {"final": "x"}, "decode_time": 1}
      ]
    })");
    // A fails; the failure counts as observed, so the run completes.
    auto t = testing::run(spec, kAP);
    CHECK(t.outcome("A")->status == "failed");

    RunConfig cfg;
    cfg.mode = kAP;
    auto ok = parse(R"({"tools": [], "script": [{"emit": {"final": "x"}}]})");
    ok.script.clear();
    CHECK_THROWS_AS(run_conversation(ok, cfg), ScriptExhausted);
}

// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "futurecall/scheduler.hpp"

using namespace futurecall;

namespace {

DependencyAnnotation ann(std::vector<PathSpec> reads, std::vector<PathSpec> writes, bool sr = false,
                         bool sw = false) {
    DependencyAnnotation a;
    a.reads = std::move(reads);
    a.writes = std::move(writes);
    a.session_read = sr;
    a.session_write = sw;
    return a;
}

CallRecord make_call(FutureStore& store, std::string id, std::optional<DependencyAnnotation> a,
                     Value args = Value::object()) {
    CallRecord c;
    c.id = std::move(id);
    c.tool = "t";
    c.args = std::move(args);
    c.annotation = std::move(a);
    c.result = store.create(FutureKind::result);
    return c;
}

Access acc(const char* p, AccessMode m, bool subtree = false) {
    return Access{ResourcePath::parse(p), m, subtree};
}

void finish(FutureStore& store, Scheduler& s, const std::string& id) {
    auto& c = s.call(id);
    c.status = CallStatus::done;
    store.resolve(c.result, Value::object());
    s.release(id);
}

}  // namespace

TEST_CASE("resource paths") {
    auto p = ResourcePath::parse("/a/b/c");
    CHECK(p.str() == "/a/b/c");
    CHECK(ResourcePath::parse("/").is_root());
    CHECK(ResourcePath::parse("/").str() == "/");
    CHECK(ResourcePath::parse("/a").is_ancestor_of(p));
    CHECK_FALSE(p.is_ancestor_of(p));
    CHECK_FALSE(ResourcePath::parse("/a/x").is_ancestor_of(p));
    CHECK_THROWS_AS(ResourcePath::parse("a/b"), std::invalid_argument);
    CHECK_THROWS_AS(ResourcePath::parse("/a//b"), std::invalid_argument);
}

TEST_CASE("conflict rule") {
    CHECK(conflicts(acc("/vehicle/drive", AccessMode::write), acc("/vehicle/drive", AccessMode::read)));
    CHECK_FALSE(conflicts(acc("/a", AccessMode::read), acc("/a", AccessMode::read)));
    CHECK(conflicts(acc("/", AccessMode::write, true), acc("/vehicle/fuel", AccessMode::read)));
    CHECK_FALSE(conflicts(acc("/vehicle", AccessMode::write), acc("/vehicle/fuel", AccessMode::read)));
    CHECK_FALSE(conflicts(acc("/a", AccessMode::write), acc("/b", AccessMode::write)));
}

TEST_CASE("conflict rule matches a segment-prefix oracle") {
    // Oracle: compare rendered strings with an explicit prefix test.
    auto oracle = [](const Access& a, const Access& b) {
        if (a.mode == AccessMode::read && b.mode == AccessMode::read)
            return false;
        auto sa = a.path.segments(), sb = b.path.segments();
        auto prefix = [](const std::vector<std::string>& x, const std::vector<std::string>& y) {
            return x.size() < y.size() && std::equal(x.begin(), x.end(), y.begin());
        };
        return sa == sb || (prefix(sa, sb) && a.subtree) || (prefix(sb, sa) && b.subtree);
    };
    std::mt19937 rng(7);
    auto rand_access = [&] {
        std::vector<std::string> segs;
        int n = static_cast<int>(rng() % 4);
        for (int i = 0; i < n; ++i)
            segs.push_back(std::string(1, static_cast<char>('a' + rng() % 2)));
        return Access{ResourcePath(segs), rng() % 2 ? AccessMode::read : AccessMode::write, rng() % 2 == 0};
    };
    for (int i = 0; i < 3000; ++i) {
        auto a = rand_access(), b = rand_access();
        CHECK(conflicts(a, b) == oracle(a, b));
        CHECK(conflicts(a, b) == conflicts(b, a));
    }
}

TEST_CASE("root fallback covers everything") {
    auto f = root_fallback();
    REQUIRE(f.size() == 2);
    CHECK(conflicts(f[0], acc("/x/y", AccessMode::write)));
    CHECK(conflicts(f[1], acc("/x/y", AccessMode::read)));
}

TEST_CASE("resolve_paths") {
    FutureStore store;
    SessionState session;
    auto a = ann({{"/files/{name}", false}}, {});
    auto r = resolve_paths(a, Value{{"name", "a.txt"}}, session, store);
    REQUIRE(std::holds_alternative<std::vector<Access>>(r));
    CHECK(std::get<0>(r).front().path.str() == "/files/a.txt");

    auto fixed = resolve_paths(ann({}, {{"/x", false}}), Value::object(), session, store);
    REQUIRE(std::holds_alternative<std::vector<Access>>(fixed));
    CHECK(std::get<0>(fixed).front() == acc("/x", AccessMode::write));

    auto f = store.create(FutureKind::result);
    auto pending = resolve_paths(a, Value{{"name", f.str()}}, session, store);
    CHECK(std::holds_alternative<NotYetResolvable>(pending));
    store.resolve(f, "b.txt");
    auto done = resolve_paths(a, Value{{"name", f.str()}}, session, store);
    REQUIRE(std::holds_alternative<std::vector<Access>>(done));
    CHECK(std::get<0>(done).front().path.str() == "/files/b.txt");

    auto g = store.create(FutureKind::result);
    store.fail(g, ErrorInfo{ErrorKind::execution_error, "boom", "X"});
    auto doomed = resolve_paths(a, Value{{"name", g.str()}}, session, store);
    REQUIRE(std::holds_alternative<Unresolvable>(doomed));
    CHECK(std::get<Unresolvable>(doomed).cause == g);

    CHECK_THROWS_AS(resolve_paths(a, Value::object(), session, store), BadPathTemplate);
    CHECK_THROWS_AS(resolve_paths(a, Value{{"name", Value::array()}}, session, store), BadPathTemplate);

    auto none = resolve_paths(std::nullopt, Value::object(), session, store);
    CHECK(std::get<0>(none) == root_fallback());
}

TEST_CASE("session-relative paths") {
    FutureStore store;
    SessionState session;
    session.bindings["cwd"] = "/home/u";
    auto a = ann({{"$session/cwd/{f}", false}}, {});
    auto r = resolve_paths(a, Value{{"f", "notes"}}, session, store);
    CHECK(std::get<0>(r).front().path.str() == "/home/u/notes");

    session.version = 1;  // a session write in flight
    CHECK(std::holds_alternative<NotYetResolvable>(resolve_paths(a, Value{{"f", "n"}}, session, store)));
    session.finished.insert(1);
    CHECK(std::holds_alternative<std::vector<Access>>(resolve_paths(a, Value{{"f", "n"}}, session, store)));
    CHECK_THROWS_AS(resolve_paths(ann({{"$session/nope", false}}, {}), Value::object(), session, store),
                    BadPathTemplate);
}

TEST_CASE("expand_template") {
    CHECK(expand_template("/a/{x}/b", Value{{"x", "q"}}).str() == "/a/q/b");
    CHECK(expand_template("/n/{x}", Value{{"x", 3}}).str() == "/n/3");
    CHECK_THROWS_AS(expand_template("/a/{missing}", Value::object()), BadPathTemplate);
}

TEST_CASE("submit is FIFO and returns the pending future") {
    FutureStore store;
    Scheduler s(store);
    auto c1 = make_call(store, "F1", ann({}, {{"/a", false}}));
    auto expect = c1.result;
    auto f = s.submit(c1);
    CHECK(f == expect);
    CHECK(std::holds_alternative<Pending>(store.state_of(f)));
    s.submit(make_call(store, "F2", ann({{"/b", false}}, {})));
    CHECK(std::vector<std::string>(s.queue().begin(), s.queue().end()) ==
          std::vector<std::string>{"F1", "F2"});
    CHECK_THROWS_AS(s.submit(make_call(store, "F1", std::nullopt)), DuplicateCallId);
}

TEST_CASE("try_admit") {
    FutureStore store;
    Scheduler s(store);
    CHECK(s.try_admit().empty());

    std::vector<std::string> ready;
    s.on_ready([&](const std::string& id) { ready.push_back(id); });
    s.submit(make_call(store, "F1", ann({}, {{"/a", false}})));
    s.submit(make_call(store, "F2", ann({{"/b", false}}, {})));
    CHECK(s.try_admit() == std::vector<std::string>{"F1", "F2"});
    CHECK(ready == std::vector<std::string>{"F1", "F2"});
    CHECK(s.call("F2").blocking_gates.empty());
}

TEST_CASE("head-of-line blocking") {
    FutureStore store;
    Scheduler s(store);
    auto pending = store.create(FutureKind::result);
    s.submit(make_call(store, "F1", ann({{"/files/{n}", false}}, {}), Value{{"n", pending.str()}}));
    s.submit(make_call(store, "F2", ann({{"/b", false}}, {})));
    CHECK(s.try_admit().empty());
    CHECK(s.call("F2").status == CallStatus::queued);
    store.resolve(pending, "x");
    CHECK(s.try_admit() == std::vector<std::string>{"F1", "F2"});
    CHECK(s.call("F1").resolved_paths->front().path.str() == "/files/x");
}

TEST_CASE("unresolvable head is reported and skipped") {
    FutureStore store;
    Scheduler s(store);
    std::vector<std::string> doomed;
    s.on_unresolvable([&](const std::string& id, const FutureId&) { doomed.push_back(id); });
    auto f = store.create(FutureKind::result);
    store.fail(f, ErrorInfo{});
    s.submit(make_call(store, "F1", ann({{"/f/{n}", false}}, {}), Value{{"n", f.str()}}));
    s.submit(make_call(store, "F2", ann({{"/b", false}}, {})));
    CHECK(s.try_admit() == std::vector<std::string>{"F2"});
    CHECK(doomed == std::vector<std::string>{"F1"});
}

TEST_CASE("blocking gates and release") {
    FutureStore store;
    Scheduler s(store);
    std::vector<std::string> ready;
    s.on_ready([&](const std::string& id) { ready.push_back(id); });
    s.submit(make_call(store, "F1", ann({}, {{"/a", false}})));
    s.submit(make_call(store, "F2", ann({{"/a", false}}, {})));
    s.submit(make_call(store, "F3", ann({{"/b", false}}, {})));
    s.try_admit();
    auto gate = *s.call("F1").label_gate;
    CHECK(s.call("F2").blocking_gates == std::set<FutureId>{gate});
    CHECK(s.call("F3").blocking_gates.empty());
    CHECK(ready == std::vector<std::string>{"F1", "F3"});
    REQUIRE(s.call("F2").gate_edges.size() == 1);
    CHECK(s.call("F2").gate_edges[0].owner == "F1");
    CHECK(s.call("F2").gate_edges[0].consuming);

    CHECK_THROWS_AS(s.release("F1"), NotTerminal);
    finish(store, s, "F1");
    CHECK(std::holds_alternative<Resolved>(store.state_of(gate)));
    CHECK(ready == std::vector<std::string>{"F1", "F3", "F2"});
    CHECK(s.state_tree().size() == 2);  // F2 and F3 labels remain

    // A failed call still releases its gates.
    s.call("F3").status = CallStatus::failed;
    store.fail(s.call("F3").result, ErrorInfo{});
    s.release("F3");
    CHECK(std::holds_alternative<Resolved>(store.state_of(*s.call("F3").label_gate)));
}

TEST_CASE("release of a call without labels") {
    FutureStore store;
    Scheduler s(store);
    s.submit(make_call(store, "F1", ann({}, {})));
    s.try_admit();
    CHECK_FALSE(s.call("F1").label_gate.has_value());
    finish(store, s, "F1");
    CHECK(s.call("F1").released);
    CHECK(s.state_tree().size() == 0);
}

TEST_CASE("session ordering") {
    FutureStore store;
    Scheduler s(store);
    s.submit(make_call(store, "W", ann({}, {}, false, true)));
    s.submit(make_call(store, "R1", ann({}, {}, true, false)));
    s.submit(make_call(store, "R2", ann({}, {}, true, false)));
    s.try_admit();
    CHECK(s.session().version == 1);
    auto g1 = s.session().version_gates.at(1);
    CHECK(s.call("R1").blocking_gates == std::set<FutureId>{g1});
    CHECK(s.call("R2").blocking_gates == std::set<FutureId>{g1});  // reads commute with each other

    auto& w = s.call("W");
    w.status = CallStatus::done;
    store.resolve(w.result, Value{{"cwd", "/tmp"}});
    s.release("W");
    CHECK(s.session().settled());
    CHECK(s.session().bindings.at("cwd") == "/tmp");
}

TEST_CASE("session write waits on the previous version") {
    FutureStore store;
    Scheduler s(store);
    s.submit(make_call(store, "W1", ann({}, {}, false, true)));
    s.submit(make_call(store, "W2", ann({}, {}, false, true)));
    s.try_admit();
    CHECK(s.session().version == 2);
    CHECK(s.call("W2").blocking_gates == std::set<FutureId>{s.session().version_gates.at(1)});
    CHECK(s.call("W2").session_version == 2u);
}

TEST_CASE("unannotated calls chain in decode order") {
    FutureStore store;
    Scheduler s(store);
    for (int i = 0; i < 5; ++i)
        s.submit(make_call(store, "C" + std::to_string(i), std::nullopt));
    s.try_admit();
    for (int i = 1; i < 5; ++i) {
        const auto& c = s.call("C" + std::to_string(i));
        // Every earlier unreleased call conflicts, the immediate predecessor included.
        CHECK(c.blocking_gates.contains(*s.call("C" + std::to_string(i - 1)).label_gate));
        CHECK(c.blocking_gates.size() == static_cast<std::size_t>(i));
    }
}

TEST_CASE("state tree conflicting matches a linear scan") {
    std::mt19937 rng(11);
    FutureStore store;
    auto rand_access = [&] {
        std::vector<std::string> segs;
        int n = static_cast<int>(rng() % 3);
        for (int i = 0; i < n; ++i)
            segs.push_back(std::string(1, static_cast<char>('a' + rng() % 2)));
        return Access{ResourcePath(segs), rng() % 2 ? AccessMode::read : AccessMode::write, rng() % 2 == 0};
    };
    for (int round = 0; round < 200; ++round) {
        StateTree tree;
        std::vector<StateTree::Label> all;
        int n = 1 + static_cast<int>(rng() % 6);
        for (int i = 0; i < n; ++i) {
            StateTree::Label l{rand_access(), "o" + std::to_string(i), store.create(FutureKind::access_label)};
            tree.insert(l);
            all.push_back(l);
        }
        auto probe = rand_access();
        std::multiset<std::string> expect, got;
        for (const auto& l : all)
            if (conflicts(probe, l.access))
                expect.insert(l.owner);
        for (const auto& l : tree.conflicting(probe))
            got.insert(l.owner);
        CHECK(expect == got);
        tree.remove_owner("o0");
        CHECK(tree.size() == all.size() - 1);
    }
}

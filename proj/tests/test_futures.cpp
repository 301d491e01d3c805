// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <set>

#include "futurecall/clock.hpp"
#include "futurecall/futures.hpp"

using namespace futurecall;

TEST_SUITE("futures") {

TEST_CASE("ids are sequential from zero") {
    FutureStore store;
    auto a = store.create(FutureKind::result);
    auto b = store.create(FutureKind::result);
    CHECK(a.str() == "fut_0");
    CHECK(b.str() == "fut_1");
    CHECK(std::holds_alternative<Pending>(store.state_of(a)));
}

TEST_CASE("hundred ids are distinct") {
    FutureStore store;
    std::set<std::string> ids;
    for (int i = 0; i < 100; ++i)
        ids.insert(store.create(FutureKind::access_label).str());
    CHECK(ids.size() == 100);
}

TEST_CASE("id parsing") {
    CHECK(FutureId::parse("fut_3.fuelLevel")->str() == "fut_3.fuelLevel");
    CHECK(FutureId::parse("fut_12")->number() == 12);
    CHECK(FutureId::parse("fut_3.a.b")->field_path() == std::vector<std::string>{"a", "b"});
    CHECK_FALSE(FutureId::parse("fut_"));
    CHECK_FALSE(FutureId::parse("fut_01"));
    CHECK_FALSE(FutureId::parse("fut_1."));
    CHECK_FALSE(FutureId::parse("fut_1..a"));
    CHECK_FALSE(FutureId::parse("future_1"));
    CHECK_FALSE(FutureId::parse("xfut_1"));
}

TEST_CASE("resolve and field lookup") {
    FutureStore store;
    auto f = store.create(FutureKind::result);
    store.resolve(f, 42);
    CHECK(store.state_of(f) == FutureState{Resolved{42}});

    auto g = store.create(FutureKind::result);
    store.resolve(g, Value{{"fuelLevel", 0.5}, {"xs", {1, 2}}});
    CHECK(store.state_of(g.field("fuelLevel")) == FutureState{Resolved{0.5}});
    CHECK(store.state_of(*FutureId::parse(g.str() + ".xs.1")) == FutureState{Resolved{2}});

    auto missing = store.state_of(g.field("engineState"));
    REQUIRE(std::holds_alternative<Failed>(missing));
    CHECK(std::get<Failed>(missing).error.message.find("path not found") != std::string::npos);
}

TEST_CASE("terminal states are final") {
    FutureStore store;
    auto f = store.create(FutureKind::result);
    store.resolve(f, 1);
    CHECK_THROWS_AS(store.resolve(f, 2), AlreadyTerminal);
    CHECK_THROWS_AS(store.cancel(f, f), AlreadyTerminal);
    CHECK_THROWS_AS(store.fail(f, ErrorInfo{}), AlreadyTerminal);
    CHECK(store.transition_count(f) == 1);
    CHECK_THROWS_AS(store.resolve(FutureId::base(99), 1), UnknownFuture);
}

TEST_CASE("fail and cancel") {
    FutureStore store;
    auto f1 = store.create(FutureKind::result);
    auto f2 = store.create(FutureKind::result);
    ErrorInfo timeout{ErrorKind::execution_error, "timeout", "F1"};
    store.fail(f1, timeout);
    store.cancel(f2, f1);
    CHECK(store.state_of(f1) == FutureState{Failed{timeout}});
    CHECK(store.state_of(f2) == FutureState{Cancelled{f1}});
}

TEST_CASE("waiters fire exactly once") {
    FutureStore store;
    auto f = store.create(FutureKind::result);
    int fired = 0;
    store.on_terminal(f, [&] { ++fired; });
    store.on_terminal(f, [&] { ++fired; });
    store.resolve(f, 1);
    CHECK(fired == 2);
    CHECK_THROWS(store.resolve(f, 1));
    CHECK(fired == 2);
}

TEST_CASE("wait_for on the virtual clock") {
    EventLoop loop;
    FutureStore store;
    store.set_poster([&](FutureStore::Continuation k) { loop.schedule(0, std::move(k)); });
    store.set_clock([&] { return loop.now(); });

    SUBCASE("empty") {
        bool done = false;
        store.wait_for({}, [&](auto states) {
            CHECK(states.empty());
            done = true;
        });
        loop.advance();
        CHECK(done);
        CHECK(loop.now() == 0);
    }
    SUBCASE("returns at the latest resolution") {
        auto a = store.create(FutureKind::result);
        auto b = store.create(FutureKind::result);
        loop.schedule(3, [&] { store.resolve(a, 1); });
        loop.schedule(7, [&] { store.resolve(b, 2); });
        Time returned = -1;
        store.wait_for({a, b}, [&](auto states) {
            returned = loop.now();
            CHECK(states.size() == 2);
        });
        while (!loop.empty())
            loop.advance();
        CHECK(returned == 7);
        CHECK(*store.resolution_time(a) == 3);
        CHECK(*store.resolution_time(b) == 7);
    }
    SUBCASE("unknown id") {
        CHECK_THROWS_AS(store.wait_for({FutureId::base(5)}, [](auto) {}), UnknownFuture);
    }
    SUBCASE("field futures") {
        auto a = store.create(FutureKind::result);
        loop.schedule(5, [&] { store.resolve(a, Value{{"x", 9}}); });
        Value got;
        store.wait_for({a.field("x")}, [&](auto states) { got = std::get<Resolved>(states.begin()->second).value; });
        while (!loop.empty())
            loop.advance();
        CHECK(got == 9);
    }
}

TEST_CASE("settling a field future directly is rejected") {
    FutureStore store;
    auto a = store.create(FutureKind::result);
    CHECK_THROWS_AS(store.resolve(a.field("x"), 1), std::invalid_argument);
}

}

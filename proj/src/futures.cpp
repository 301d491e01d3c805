// SPDX-License-Identifier: Apache-2.0
#include "futurecall/futures.hpp"

#include <algorithm>
#include <charconv>
#include <memory>

namespace futurecall {

namespace {

constexpr std::string_view kPrefix = "fut_";

}  // namespace

FutureId FutureId::base(std::uint64_t n) {
    FutureId id;
    id.number_ = n;
    return id;
}

std::optional<FutureId> FutureId::parse(std::string_view text) {
    if (!text.starts_with(kPrefix))
        return std::nullopt;
    text.remove_prefix(kPrefix.size());

    auto dot = text.find('.');
    auto digits = text.substr(0, dot);
    if (digits.empty() || (digits.size() > 1 && digits.front() == '0'))
        return std::nullopt;
    std::uint64_t n = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec != std::errc{} || ptr != digits.data() + digits.size())
        return std::nullopt;

    FutureId id = base(n);
    if (dot == std::string_view::npos)
        return id;

    auto rest = text.substr(dot + 1);
    while (true) {
        auto next = rest.find('.');
        auto segment = rest.substr(0, next);
        if (segment.empty())
            return std::nullopt;
        id.fields_.emplace_back(segment);
        if (next == std::string_view::npos)
            break;
        rest.remove_prefix(next + 1);
    }
    return id;
}

FutureId FutureId::field(std::string_view segment) const {
    FutureId id = *this;
    id.fields_.emplace_back(segment);
    return id;
}

std::string FutureId::str() const {
    std::string out(kPrefix);
    out += std::to_string(number_);
    for (const auto& f : fields_) {
        out += '.';
        out += f;
    }
    return out;
}

std::string_view to_string(FutureKind kind) {
    switch (kind) {
    case FutureKind::result: return "result";
    case FutureKind::access_label: return "access-label";
    case FutureKind::session_version: return "session-version";
    }
    return "?";
}

std::string_view to_string(ErrorKind kind) {
    return kind == ErrorKind::execution_error ? "execution-error" : "cancelled-dependency";
}

std::optional<Value> extract_path(const Value& value, const std::vector<std::string>& path) {
    const Value* cur = &value;
    for (const auto& seg : path) {
        if (cur->is_object()) {
            auto it = cur->find(seg);
            if (it == cur->end())
                return std::nullopt;
            cur = &*it;
        } else if (cur->is_array()) {
            std::size_t idx = 0;
            auto [ptr, ec] = std::from_chars(seg.data(), seg.data() + seg.size(), idx);
            if (ec != std::errc{} || ptr != seg.data() + seg.size() || idx >= cur->size())
                return std::nullopt;
            cur = &(*cur)[idx];
        } else {
            return std::nullopt;
        }
    }
    return std::optional<Value>(std::in_place, *cur);
}

FutureStore::FutureStore()
    : post_([](Continuation k) { k(); }), clock_([] { return Time{0}; }) {}

FutureId FutureStore::create(FutureKind kind) {
    auto id = FutureId::base(next_++);
    records_.emplace(id.number(), Record{kind, Pending{}, clock_(), std::nullopt, 0, {}});
    return id;
}

FutureStore::Record& FutureStore::record(const FutureId& id) {
    auto it = records_.find(id.number());
    if (it == records_.end())
        throw UnknownFuture(id.str());
    return it->second;
}

const FutureStore::Record& FutureStore::record(const FutureId& id) const {
    auto it = records_.find(id.number());
    if (it == records_.end())
        throw UnknownFuture(id.str());
    return it->second;
}

void FutureStore::finish(const FutureId& id, FutureState state) {
    if (id.is_field())
        throw std::invalid_argument("field futures settle through their base: " + id.str());
    auto& rec = record(id);
    if (is_terminal(rec.state))
        throw AlreadyTerminal(id.str());
    rec.state = std::move(state);
    rec.resolved_at = clock_();
    ++rec.transitions;
    auto waiters = std::move(rec.waiters);
    rec.waiters.clear();
    for (auto& w : waiters)
        post_(std::move(w));
}

void FutureStore::resolve(const FutureId& id, Value value) {
    finish(id, Resolved{std::move(value)});
}

void FutureStore::fail(const FutureId& id, ErrorInfo error) {
    finish(id, Failed{std::move(error)});
}

void FutureStore::cancel(const FutureId& id, const FutureId& cause) {
    finish(id, Cancelled{cause});
}

bool FutureStore::contains(const FutureId& id) const {
    return records_.contains(id.number());
}

bool FutureStore::contains(std::string_view text) const {
    auto id = FutureId::parse(text);
    return id && contains(*id);
}

FutureState FutureStore::state_of(const FutureId& id) const {
    const auto& rec = record(id);
    if (!id.is_field())
        return rec.state;
    if (const auto* r = std::get_if<Resolved>(&rec.state)) {
        if (auto v = extract_path(r->value, id.field_path()))
            return Resolved{*v};
        return Failed{ErrorInfo{ErrorKind::execution_error, "path not found: " + id.str(), {}}};
    }
    return rec.state;
}

FutureKind FutureStore::kind_of(const FutureId& id) const { return record(id).kind; }

Time FutureStore::creation_time(const FutureId& id) const { return record(id).created; }

std::optional<Time> FutureStore::resolution_time(const FutureId& id) const {
    return record(id).resolved_at;
}

std::size_t FutureStore::transition_count(const FutureId& id) const {
    return record(id).transitions;
}

void FutureStore::register_field(const FutureId& id) {
    if (!contains(id))
        throw UnknownFuture(id.str());
    if (id.is_field())
        fields_.insert(id);
}

std::vector<FutureId> FutureStore::fields_of(const FutureId& base) const {
    std::vector<FutureId> out;
    for (const auto& f : fields_)
        if (f.number() == base.number())
            out.push_back(f);
    return out;
}

void FutureStore::on_terminal(const FutureId& id, Continuation k) {
    auto& rec = record(id);
    if (is_terminal(rec.state))
        post_(std::move(k));
    else
        rec.waiters.push_back(std::move(k));
}

void FutureStore::wait_for(const std::vector<FutureId>& ids,
                           std::function<void(std::map<FutureId, FutureState>)> k) {
    for (const auto& id : ids)
        record(id);  // UnknownFuture before suspending anything

    auto deliver = [this, ids, k = std::move(k)] {
        std::map<FutureId, FutureState> out;
        for (const auto& id : ids)
            out.emplace(id, state_of(id));
        k(std::move(out));
    };

    std::set<std::uint64_t> open;
    for (const auto& id : ids)
        if (!is_terminal(record(id).state))
            open.insert(id.number());
    if (open.empty()) {
        post_(std::move(deliver));
        return;
    }

    auto remaining = std::make_shared<std::size_t>(open.size());
    auto done = std::make_shared<std::function<void()>>(std::move(deliver));
    for (auto n : open) {
        record(FutureId::base(n)).waiters.push_back([remaining, done] {
            if (--*remaining == 0)
                (*done)();
        });
    }
}

std::vector<FutureId> FutureStore::pending() const {
    std::vector<FutureId> out;
    for (const auto& [n, rec] : records_)
        if (!is_terminal(rec.state))
            out.push_back(FutureId::base(n));
    return out;
}

}  // namespace futurecall

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace futurecall {

using Value = nlohmann::json;
using Time = double;

/// Symbolic placeholder identifier: `fut_<n>` optionally followed by a dotted
/// field path (`fut_3.fuelLevel`).
class FutureId {
public:
    FutureId() = default;

    static FutureId base(std::uint64_t n);
    /// Parses the canonical text form; nullopt when the text is not an id.
    static std::optional<FutureId> parse(std::string_view text);

    std::uint64_t number() const { return number_; }
    const std::vector<std::string>& field_path() const { return fields_; }
    bool is_field() const { return !fields_.empty(); }
    FutureId base_id() const { return base(number_); }
    FutureId field(std::string_view segment) const;

    std::string str() const;

    friend bool operator==(const FutureId&, const FutureId&) = default;
    friend auto operator<=>(const FutureId&, const FutureId&) = default;

private:
    std::uint64_t number_ = 0;
    std::vector<std::string> fields_;
};

enum class FutureKind { result, access_label, session_version };

std::string_view to_string(FutureKind kind);

enum class ErrorKind { execution_error, cancelled_dependency };

std::string_view to_string(ErrorKind kind);

struct ErrorInfo {
    ErrorKind kind = ErrorKind::execution_error;
    std::string message;
    std::string origin_call;

    friend bool operator==(const ErrorInfo&, const ErrorInfo&) = default;
};

struct Pending {
    friend bool operator==(const Pending&, const Pending&) = default;
};
struct Resolved {
    Value value;
    friend bool operator==(const Resolved&, const Resolved&) = default;
};
struct Failed {
    ErrorInfo error;
    friend bool operator==(const Failed&, const Failed&) = default;
};
struct Cancelled {
    FutureId cause;
    friend bool operator==(const Cancelled&, const Cancelled&) = default;
};

using FutureState = std::variant<Pending, Resolved, Failed, Cancelled>;

inline bool is_terminal(const FutureState& s) { return !std::holds_alternative<Pending>(s); }

class UnknownFuture : public std::runtime_error {
public:
    explicit UnknownFuture(const std::string& id) : std::runtime_error("unknown future: " + id) {}
};

class AlreadyTerminal : public std::runtime_error {
public:
    explicit AlreadyTerminal(const std::string& id)
        : std::runtime_error("future already terminal: " + id) {}
};

/// Extracts `path` from a structured value; nullopt if any segment is missing.
/// Numeric segments index into arrays.
std::optional<Value> extract_path(const Value& value, const std::vector<std::string>& path);

/// Owns every future of one conversation run.
///
/// Waiters are continuations. They are never run from inside resolve/fail/
/// cancel directly; they are handed to the poster (by default an immediate
/// call) so the owner of the event loop can defer them.
class FutureStore {
public:
    using Continuation = std::function<void()>;
    using Poster = std::function<void(Continuation)>;
    using ClockFn = std::function<Time()>;

    FutureStore();

    void set_poster(Poster poster) { post_ = std::move(poster); }
    void set_clock(ClockFn clock) { clock_ = std::move(clock); }

    FutureId create(FutureKind kind);

    void resolve(const FutureId& id, Value value);
    void fail(const FutureId& id, ErrorInfo error);
    void cancel(const FutureId& id, const FutureId& cause);

    /// True for registered base futures and for well-formed field ids whose
    /// base is registered.
    bool contains(const FutureId& id) const;
    bool contains(std::string_view text) const;

    /// Field futures derive their state from the base: path-not-found on a
    /// resolved base yields Failed.
    FutureState state_of(const FutureId& id) const;
    FutureKind kind_of(const FutureId& id) const;
    Time creation_time(const FutureId& id) const;
    std::optional<Time> resolution_time(const FutureId& id) const;
    std::size_t transition_count(const FutureId& id) const;

    /// Registers a field future explicitly (lazy creation on first reference).
    void register_field(const FutureId& id);
    const std::set<FutureId>& registered_fields() const { return fields_; }
    std::vector<FutureId> fields_of(const FutureId& base) const;

    /// Runs `k` once `id` is terminal (immediately posted if it already is).
    void on_terminal(const FutureId& id, Continuation k);

    /// Calls `k` with the terminal states of every id once all are terminal.
    void wait_for(const std::vector<FutureId>& ids,
                  std::function<void(std::map<FutureId, FutureState>)> k);

    std::vector<FutureId> pending() const;
    std::size_t size() const { return records_.size(); }

private:
    struct Record {
        FutureKind kind;
        FutureState state;
        Time created = 0;
        std::optional<Time> resolved_at;
        std::size_t transitions = 0;
        std::vector<Continuation> waiters;
    };

    Record& record(const FutureId& id);
    const Record& record(const FutureId& id) const;
    void finish(const FutureId& id, FutureState state);

    std::uint64_t next_ = 0;
    std::map<std::uint64_t, Record> records_;
    std::set<FutureId> fields_;
    Poster post_;
    ClockFn clock_;
};

}  // namespace futurecall

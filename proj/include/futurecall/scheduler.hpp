// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "futurecall/futures.hpp"
#include "futurecall/schema.hpp"

namespace futurecall {

/// Hierarchical state address. The root has no segments and renders as `/`.
class ResourcePath {
public:
    ResourcePath() = default;
    explicit ResourcePath(std::vector<std::string> segments);

    /// Throws std::invalid_argument on relative paths or empty segments.
    static ResourcePath parse(std::string_view text);

    const std::vector<std::string>& segments() const { return segments_; }
    bool is_root() const { return segments_.empty(); }
    /// Proper-prefix test.
    bool is_ancestor_of(const ResourcePath& other) const;
    std::string str() const;

    friend bool operator==(const ResourcePath&, const ResourcePath&) = default;
    friend auto operator<=>(const ResourcePath&, const ResourcePath&) = default;

private:
    std::vector<std::string> segments_;
};

enum class AccessMode { read, write };

struct Access {
    ResourcePath path;
    AccessMode mode = AccessMode::read;
    bool subtree = false;

    friend bool operator==(const Access&, const Access&) = default;
};

/// Regions overlap when equal, or when one is an ancestor of the other and
/// the ancestor side covers its subtree.
bool overlaps(const Access& a, const Access& b);
/// At least one write over overlapping regions.
bool conflicts(const Access& a, const Access& b);

/// Accesses used for calls without annotation: read and write the whole tree.
std::vector<Access> root_fallback();

class BadPathTemplate : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SessionState {
    std::uint64_t version = 0;  // admitted session writes
    std::set<std::uint64_t> finished;
    std::map<std::uint64_t, FutureId> version_gates;
    std::map<std::uint64_t, std::string> writers;
    std::map<std::string, Value> bindings;

    /// Every admitted session write has finished.
    bool settled() const { return finished.size() == version; }
};

struct NotYetResolvable {
    std::string reason;
};
/// A needed value terminated without resolving; the call can never run.
struct Unresolvable {
    FutureId cause;
};

using PathResolution = std::variant<std::vector<Access>, NotYetResolvable, Unresolvable>;

/// Expands `{param}` segments from `args` (futures must be resolved) and
/// `$session/<key>/...` prefixes from session bindings. A missing annotation
/// yields the root fallback. Throws BadPathTemplate.
PathResolution resolve_paths(const std::optional<DependencyAnnotation>& annotation,
                             const Value& args, const SessionState& session,
                             const FutureStore& store);

/// Template expansion against concrete arguments only (no futures, no session).
ResourcePath expand_template(std::string_view tmpl, const Value& args);

enum class CallStatus { queued, admitted, dispatched, running, done, failed, cancelled };

std::string_view to_string(CallStatus s);
inline bool is_terminal(CallStatus s) {
    return s == CallStatus::done || s == CallStatus::failed || s == CallStatus::cancelled;
}

/// Why a call waits on an earlier one. Consuming edges carry the earlier call's
/// effect into this one (read-after-write, session order, argument use).
struct GateEdge {
    std::string owner;
    bool consuming = false;
};

struct CallRecord {
    std::string id;
    std::string tool;
    Value args;
    std::optional<DependencyAnnotation> annotation;
    FutureId result;
    CallStatus status = CallStatus::queued;
    std::set<FutureId> blocking_gates;
    std::set<FutureId> argument_futures;
    std::optional<std::vector<Access>> resolved_paths;

    std::size_t invocation = 0;  // per-tool index in decode order
    int turn = 0;
    std::size_t admission_index = 0;
    std::optional<FutureId> label_gate;
    std::optional<std::uint64_t> session_version;
    std::vector<GateEdge> gate_edges;
    std::set<FutureId> path_futures;  // futures consumed by path templates
    bool released = false;
};

class DuplicateCallId : public std::runtime_error {
public:
    explicit DuplicateCallId(const std::string& id) : std::runtime_error("duplicate call id: " + id) {}
};

class NotTerminal : public std::runtime_error {
public:
    explicit NotTerminal(const std::string& id)
        : std::runtime_error("release of non-terminal call: " + id) {}
};

/// Registry of live access labels keyed by path segments.
class StateTree {
public:
    struct Label {
        Access access;
        std::string owner;
        FutureId gate;
    };

    StateTree();
    ~StateTree();
    StateTree(StateTree&&) noexcept;
    StateTree& operator=(StateTree&&) noexcept;

    void insert(Label label);
    void remove_owner(const std::string& owner);
    /// Live labels that conflict with `access`.
    std::vector<Label> conflicting(const Access& access) const;
    std::size_t size() const { return count_; }

private:
    struct Node;
    std::unique_ptr<Node> root_;
    std::map<std::string, std::vector<ResourcePath>> by_owner_;
    std::size_t count_ = 0;
};

/// Queue, admission barrier, and conflict analysis.
///
/// Calls are admitted strictly in submission order; a head whose paths are not
/// yet resolvable blocks everything behind it.
class Scheduler {
public:
    using CallHandler = std::function<void(const std::string& call_id)>;
    using DoomHandler = std::function<void(const std::string& call_id, const FutureId& cause)>;
    using ErrorHandler = std::function<void(const std::string& call_id, const std::string& message)>;

    explicit Scheduler(FutureStore& store);

    /// Fired once an admitted call's blocking gates have all terminated.
    void on_ready(CallHandler h) { on_ready_ = std::move(h); }
    /// Head call whose paths depend on a failed or cancelled future.
    void on_unresolvable(DoomHandler h) { on_unresolvable_ = std::move(h); }
    /// Head call with a malformed path template.
    void on_bad_template(ErrorHandler h) { on_bad_template_ = std::move(h); }

    FutureId submit(CallRecord call);
    std::vector<std::string> try_admit();
    void release(const std::string& call_id);

    /// Removes a not-yet-admitted call from the queue.
    void drop_queued(const std::string& call_id);

    /// Gates of live conflicting labels plus the preceding session gate.
    std::set<FutureId> blocking_gates(const std::vector<Access>& accesses, bool session_read,
                                      bool session_write,
                                      std::vector<GateEdge>* edges = nullptr) const;

    CallRecord& call(const std::string& id);
    const CallRecord& call(const std::string& id) const;
    bool has_call(const std::string& id) const { return calls_.contains(id); }
    const std::vector<std::string>& submission_order() const { return order_; }
    const std::deque<std::string>& queue() const { return queue_; }
    const StateTree& state_tree() const { return tree_; }
    const SessionState& session() const { return session_; }
    std::map<std::string, CallRecord>& calls() { return calls_; }

    /// Applied to a session writer's resolved value; default merges object keys.
    using SessionReducer = std::function<void(std::map<std::string, Value>&, const Value&)>;
    void set_session_reducer(SessionReducer r) { reducer_ = std::move(r); }

private:
    void admit(CallRecord& call, std::vector<Access> accesses);
    void arm(CallRecord& call);

    FutureStore& store_;
    std::map<std::string, CallRecord> calls_;
    std::vector<std::string> order_;
    std::deque<std::string> queue_;
    StateTree tree_;
    SessionState session_;
    std::size_t admitted_ = 0;
    SessionReducer reducer_;

    CallHandler on_ready_;
    DoomHandler on_unresolvable_;
    ErrorHandler on_bad_template_;
};

/// Merges the keys of an object result into the bindings.
void merge_session_bindings(std::map<std::string, Value>& bindings, const Value& result);

}  // namespace futurecall

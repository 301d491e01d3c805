// SPDX-License-Identifier: Apache-2.0
#include "futurecall/scheduler.hpp"

#include <algorithm>

namespace futurecall {

// ---------------------------------------------------------------- paths

ResourcePath::ResourcePath(std::vector<std::string> segments) : segments_(std::move(segments)) {
    for (const auto& s : segments_)
        if (s.empty() || s.find('/') != std::string::npos)
            throw std::invalid_argument("invalid path segment '" + s + "'");
}

ResourcePath ResourcePath::parse(std::string_view text) {
    if (!text.starts_with('/'))
        throw std::invalid_argument("resource path must start with '/': " + std::string(text));
    std::vector<std::string> segs;
    text.remove_prefix(1);
    while (!text.empty()) {
        auto slash = text.find('/');
        auto seg = text.substr(0, slash);
        if (seg.empty())
            throw std::invalid_argument("empty path segment");
        segs.emplace_back(seg);
        if (slash == std::string_view::npos)
            break;
        text.remove_prefix(slash + 1);
        if (text.empty())
            throw std::invalid_argument("trailing '/' in path");
    }
    return ResourcePath(std::move(segs));
}

bool ResourcePath::is_ancestor_of(const ResourcePath& other) const {
    return segments_.size() < other.segments_.size() &&
           std::equal(segments_.begin(), segments_.end(), other.segments_.begin());
}

std::string ResourcePath::str() const {
    if (segments_.empty())
        return "/";
    std::string out;
    for (const auto& s : segments_)
        out += "/" + s;
    return out;
}

bool overlaps(const Access& a, const Access& b) {
    if (a.path == b.path)
        return true;
    if (a.path.is_ancestor_of(b.path))
        return a.subtree;
    if (b.path.is_ancestor_of(a.path))
        return b.subtree;
    return false;
}

bool conflicts(const Access& a, const Access& b) {
    if (a.mode == AccessMode::read && b.mode == AccessMode::read)
        return false;
    return overlaps(a, b);
}

std::vector<Access> root_fallback() {
    return {Access{ResourcePath{}, AccessMode::read, true},
            Access{ResourcePath{}, AccessMode::write, true}};
}

namespace {

std::string scalar_segment(const Value& v, std::string_view param) {
    if (v.is_string())
        return v.get<std::string>();
    if (v.is_boolean())
        return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer())
        return v.dump();
    if (v.is_number())
        return v.dump();
    throw BadPathTemplate("non-scalar value for path parameter {" + std::string(param) + "}");
}

struct Expansion {
    std::string text;
    std::optional<NotYetResolvable> wait;
    std::optional<Unresolvable> doomed;
};

// Replaces every `{name}` in `segment`. Future-valued arguments are looked up
// in `store` when provided.
Expansion expand_segment(const std::string& segment, const Value& args, const FutureStore* store) {
    Expansion out;
    std::size_t pos = 0;
    while (pos < segment.size()) {
        auto open = segment.find('{', pos);
        if (open == std::string::npos) {
            out.text += segment.substr(pos);
            break;
        }
        auto close = segment.find('}', open);
        if (close == std::string::npos)
            throw BadPathTemplate("unterminated parameter in '" + segment + "'");
        out.text += segment.substr(pos, open - pos);
        auto name = segment.substr(open + 1, close - open - 1);
        if (!args.is_object() || !args.contains(name))
            throw BadPathTemplate("unknown path parameter {" + name + "}");
        Value v = args.at(name);
        if (store && v.is_string()) {
            if (auto id = FutureId::parse(v.get<std::string>()); id && store->contains(*id)) {
                auto state = store->state_of(*id);
                if (std::holds_alternative<Pending>(state)) {
                    out.wait = NotYetResolvable{"argument " + name + " awaits " + id->str()};
                    return out;
                }
                if (auto* c = std::get_if<Cancelled>(&state)) {
                    out.doomed = Unresolvable{c->cause};
                    return out;
                }
                if (std::holds_alternative<Failed>(state)) {
                    out.doomed = Unresolvable{*id};
                    return out;
                }
                v = std::get<Resolved>(state).value;
            }
        }
        out.text += scalar_segment(v, name);
        pos = close + 1;
    }
    return out;
}

std::vector<std::string> split_segments(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto slash = text.find('/', pos);
        auto seg = text.substr(pos, slash == std::string_view::npos ? std::string_view::npos : slash - pos);
        out.emplace_back(seg);
        if (slash == std::string_view::npos)
            break;
        pos = slash + 1;
    }
    return out;
}

using Expanded = std::variant<ResourcePath, NotYetResolvable, Unresolvable>;

Expanded expand(std::string_view tmpl, const Value& args, const SessionState* session,
                const FutureStore* store) {
    std::vector<std::string> segs;
    std::string_view rest = tmpl;
    bool relative = false;
    if (rest.starts_with("$session")) {
        if (!session)
            throw BadPathTemplate("session-relative path outside a session: " + std::string(tmpl));
        rest.remove_prefix(std::string_view("$session").size());
        if (!rest.starts_with('/') || rest.size() < 2)
            throw BadPathTemplate("session path needs a binding key: " + std::string(tmpl));
        relative = true;
    } else if (!rest.starts_with('/')) {
        throw BadPathTemplate("path template must be absolute: " + std::string(tmpl));
    }
    rest.remove_prefix(1);

    std::vector<std::string> raw = rest.empty() ? std::vector<std::string>{} : split_segments(rest);
    for (const auto& r : raw) {
        auto e = expand_segment(r, args, store);
        if (e.wait)
            return *e.wait;
        if (e.doomed)
            return *e.doomed;
        for (auto& piece : split_segments(e.text)) {
            if (piece.empty())
                throw BadPathTemplate("empty segment expanding '" + std::string(tmpl) + "'");
            segs.push_back(std::move(piece));
        }
    }

    if (relative) {
        if (!session->settled())
            return NotYetResolvable{"session version " + std::to_string(session->version) + " pending"};
        const auto& key = segs.front();
        auto it = session->bindings.find(key);
        if (it == session->bindings.end() || !it->second.is_string())
            throw BadPathTemplate("no session binding for '" + key + "'");
        auto base = ResourcePath::parse(it->second.get<std::string>()).segments();
        base.insert(base.end(), segs.begin() + 1, segs.end());
        segs = std::move(base);
    }
    return ResourcePath(std::move(segs));
}

}  // namespace

PathResolution resolve_paths(const std::optional<DependencyAnnotation>& annotation,
                             const Value& args, const SessionState& session,
                             const FutureStore& store) {
    if (!annotation)
        return root_fallback();

    std::vector<Access> out;
    auto add = [&](const std::vector<PathSpec>& specs, AccessMode mode) -> std::optional<PathResolution> {
        for (const auto& spec : specs) {
            auto e = expand(spec.path, args, &session, &store);
            if (auto* w = std::get_if<NotYetResolvable>(&e))
                return *w;
            if (auto* d = std::get_if<Unresolvable>(&e))
                return *d;
            out.push_back(Access{std::get<ResourcePath>(e), mode, spec.subtree});
        }
        return std::nullopt;
    };
    if (auto r = add(annotation->reads, AccessMode::read))
        return *r;
    if (auto r = add(annotation->writes, AccessMode::write))
        return *r;
    return out;
}

ResourcePath expand_template(std::string_view tmpl, const Value& args) {
    auto e = expand(tmpl, args, nullptr, nullptr);
    return std::get<ResourcePath>(e);
}

std::string_view to_string(CallStatus s) {
    switch (s) {
    case CallStatus::queued: return "queued";
    case CallStatus::admitted: return "admitted";
    case CallStatus::dispatched: return "dispatched";
    case CallStatus::running: return "running";
    case CallStatus::done: return "done";
    case CallStatus::failed: return "failed";
    case CallStatus::cancelled: return "cancelled";
    }
    return "?";
}

// ---------------------------------------------------------------- state tree

struct StateTree::Node {
    std::map<std::string, std::unique_ptr<Node>> children;
    std::vector<Label> labels;
};

StateTree::StateTree() : root_(std::make_unique<Node>()) {}
StateTree::~StateTree() = default;
StateTree::StateTree(StateTree&&) noexcept = default;
StateTree& StateTree::operator=(StateTree&&) noexcept = default;

void StateTree::insert(Label label) {
    Node* node = root_.get();
    for (const auto& seg : label.access.path.segments()) {
        auto& child = node->children[seg];
        if (!child)
            child = std::make_unique<Node>();
        node = child.get();
    }
    by_owner_[label.owner].push_back(label.access.path);
    node->labels.push_back(std::move(label));
    ++count_;
}

void StateTree::remove_owner(const std::string& owner) {
    auto it = by_owner_.find(owner);
    if (it == by_owner_.end())
        return;
    for (const auto& path : it->second) {
        Node* node = root_.get();
        for (const auto& seg : path.segments()) {
            node = node->children.at(seg).get();
        }
        auto before = node->labels.size();
        std::erase_if(node->labels, [&](const Label& l) { return l.owner == owner; });
        count_ -= before - node->labels.size();
    }
    by_owner_.erase(it);
}

std::vector<StateTree::Label> StateTree::conflicting(const Access& access) const {
    std::vector<Label> out;
    auto take = [&](const Label& l) {
        if (conflicts(access, l.access))
            out.push_back(l);
    };

    const Node* node = root_.get();
    for (const auto& seg : access.path.segments()) {
        for (const auto& l : node->labels)
            if (l.access.subtree)
                take(l);
        auto it = node->children.find(seg);
        if (it == node->children.end())
            return out;
        node = it->second.get();
    }
    for (const auto& l : node->labels)
        take(l);
    if (access.subtree) {
        std::vector<const Node*> stack;
        for (const auto& [_, c] : node->children)
            stack.push_back(c.get());
        while (!stack.empty()) {
            const Node* n = stack.back();
            stack.pop_back();
            for (const auto& l : n->labels)
                take(l);
            for (const auto& [_, c] : n->children)
                stack.push_back(c.get());
        }
    }
    return out;
}

// ---------------------------------------------------------------- scheduler

void merge_session_bindings(std::map<std::string, Value>& bindings, const Value& result) {
    if (!result.is_object())
        return;
    for (const auto& [k, v] : result.items())
        bindings[k] = v;
}

Scheduler::Scheduler(FutureStore& store) : store_(store), reducer_(merge_session_bindings) {}

CallRecord& Scheduler::call(const std::string& id) {
    auto it = calls_.find(id);
    if (it == calls_.end())
        throw std::out_of_range("unknown call: " + id);
    return it->second;
}

const CallRecord& Scheduler::call(const std::string& id) const {
    auto it = calls_.find(id);
    if (it == calls_.end())
        throw std::out_of_range("unknown call: " + id);
    return it->second;
}

namespace {

void collect_template_futures(const std::vector<PathSpec>& specs, const Value& args,
                              const FutureStore& store, std::set<FutureId>& out) {
    for (const auto& spec : specs) {
        std::size_t pos = 0;
        while ((pos = spec.path.find('{', pos)) != std::string::npos) {
            auto close = spec.path.find('}', pos);
            if (close == std::string::npos)
                break;
            auto name = spec.path.substr(pos + 1, close - pos - 1);
            if (args.is_object() && args.contains(name) && args.at(name).is_string())
                if (auto id = FutureId::parse(args.at(name).get<std::string>()); id && store.contains(*id))
                    out.insert(*id);
            pos = close + 1;
        }
    }
}

}  // namespace

FutureId Scheduler::submit(CallRecord call) {
    if (calls_.contains(call.id))
        throw DuplicateCallId(call.id);
    if (!std::holds_alternative<Pending>(store_.state_of(call.result)))
        throw std::invalid_argument("submitted call needs a pending result future");

    call.status = CallStatus::queued;
    for (const auto& ref : scan_future_refs(call.args, store_))
        call.argument_futures.insert(ref.id);
    if (call.annotation) {
        collect_template_futures(call.annotation->reads, call.args, store_, call.path_futures);
        collect_template_futures(call.annotation->writes, call.args, store_, call.path_futures);
    }

    auto result = call.result;
    queue_.push_back(call.id);
    order_.push_back(call.id);
    calls_.emplace(call.id, std::move(call));
    return result;
}

void Scheduler::drop_queued(const std::string& call_id) {
    std::erase(queue_, call_id);
}

std::set<FutureId> Scheduler::blocking_gates(const std::vector<Access>& accesses, bool session_read,
                                             bool session_write, std::vector<GateEdge>* edges) const {
    std::set<FutureId> gates;
    std::map<std::string, bool> owners;
    for (const auto& a : accesses) {
        for (const auto& label : tree_.conflicting(a)) {
            gates.insert(label.gate);
            bool raw = a.mode == AccessMode::read && label.access.mode == AccessMode::write;
            owners[label.owner] = owners[label.owner] || raw;
        }
    }
    if ((session_read || session_write) && session_.version > 0) {
        const auto& gate = session_.version_gates.at(session_.version);
        if (!is_terminal(store_.state_of(gate))) {
            gates.insert(gate);
            owners[session_.writers.at(session_.version)] = true;
        }
    }
    if (edges)
        for (const auto& [owner, consuming] : owners)
            edges->push_back(GateEdge{owner, consuming});
    return gates;
}

void Scheduler::admit(CallRecord& call, std::vector<Access> accesses) {
    call.status = CallStatus::admitted;
    call.admission_index = admitted_++;

    bool sr = call.annotation && call.annotation->session_read;
    bool sw = call.annotation && call.annotation->session_write;
    call.gate_edges.clear();
    call.blocking_gates = blocking_gates(accesses, sr, sw, &call.gate_edges);

    for (const auto& e : call.gate_edges) {
        const auto& owner = calls_.at(e.owner);
        if (owner.status == CallStatus::queued || owner.admission_index >= call.admission_index)
            throw std::logic_error("gate cycle: " + call.id + " waits on later call " + e.owner);
    }

    if (sw) {
        auto v = ++session_.version;
        auto gate = store_.create(FutureKind::session_version);
        session_.version_gates[v] = gate;
        session_.writers[v] = call.id;
        call.session_version = v;
    }
    if (!accesses.empty()) {
        auto gate = store_.create(FutureKind::access_label);
        call.label_gate = gate;
        for (const auto& a : accesses)
            tree_.insert(StateTree::Label{a, call.id, gate});
    }
    call.resolved_paths = std::move(accesses);
    arm(call);
}

void Scheduler::arm(CallRecord& call) {
    std::vector<FutureId> gates(call.blocking_gates.begin(), call.blocking_gates.end());
    store_.wait_for(gates, [this, id = call.id](const std::map<FutureId, FutureState>&) {
        auto& c = calls_.at(id);
        if (c.status == CallStatus::admitted && on_ready_)
            on_ready_(id);
    });
}

std::vector<std::string> Scheduler::try_admit() {
    std::vector<std::string> admitted;
    while (!queue_.empty()) {
        auto id = queue_.front();
        auto& c = calls_.at(id);
        if (c.status != CallStatus::queued) {
            queue_.pop_front();
            continue;
        }

        PathResolution r;
        try {
            r = resolve_paths(c.annotation, c.args, session_, store_);
        } catch (const BadPathTemplate& e) {
            queue_.pop_front();
            if (on_bad_template_)
                on_bad_template_(id, e.what());
            continue;
        }
        if (std::holds_alternative<NotYetResolvable>(r))
            break;
        queue_.pop_front();
        if (auto* d = std::get_if<Unresolvable>(&r)) {
            if (on_unresolvable_)
                on_unresolvable_(id, d->cause);
            continue;
        }
        admit(c, std::move(std::get<std::vector<Access>>(r)));
        admitted.push_back(id);
    }
    return admitted;
}

void Scheduler::release(const std::string& call_id) {
    auto& c = call(call_id);
    if (!is_terminal(c.status))
        throw NotTerminal(call_id);
    if (c.released)
        return;
    c.released = true;

    if (c.label_gate) {
        tree_.remove_owner(c.id);
        store_.resolve(*c.label_gate, nullptr);
    }
    if (c.session_version) {
        if (c.status == CallStatus::done) {
            auto state = store_.state_of(c.result);
            if (auto* r = std::get_if<Resolved>(&state))
                reducer_(session_.bindings, r->value);
        }
        session_.finished.insert(*c.session_version);
        store_.resolve(session_.version_gates.at(*c.session_version), nullptr);
    }
}

}  // namespace futurecall

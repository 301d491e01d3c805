// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "futurecall/clock.hpp"
#include "futurecall/executor.hpp"
#include "futurecall/trace.hpp"
#include "futurecall/workload.hpp"

namespace futurecall {

enum class RunMode { sync_sequential, sync_parallel, async_sequential, async_parallel };

std::string_view to_string(RunMode m);
/// Accepts `sync-sequential`, `async-parallel`, ...; throws std::invalid_argument.
RunMode parse_run_mode(std::string_view text);
inline bool is_async(RunMode m) { return m == RunMode::async_sequential || m == RunMode::async_parallel; }
inline bool is_parallel(RunMode m) { return m == RunMode::sync_parallel || m == RunMode::async_parallel; }
std::vector<RunMode> all_run_modes();

class ContextOverflow : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ScriptExhausted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LeakedFuture : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Offsets into a decode interval: when the await_future name is complete and
/// when its argument array is closed.
struct AwaitTiming {
    Time detect = 0;
    Time parse = 0;
};

/// Without a token timeline both offsets are the full duration.
AwaitTiming locate_await(const std::vector<std::pair<std::string, Time>>& tokens, Time duration);

/// What the model has observed so far.
struct ModelView {
    RunMode mode = RunMode::async_parallel;
    const std::vector<Message>* context = nullptr;
    std::map<std::string, Value> observed;      // call id -> integrated value
    std::map<std::string, ErrorInfo> failures;  // call id -> reported failure
    std::map<std::string, std::string> handles;  // call id -> result future id

    bool knows(const std::string& call) const { return observed.contains(call) || failures.contains(call); }
};

struct DecodedTurn {
    std::vector<ToolCall> calls;
    std::map<std::string, std::set<std::string>> sources;  // call id -> referenced call ids
    std::optional<std::string> final_text;
    std::vector<std::string> trigger;  // calls the turn had to observe
};

/// Produces assistant turns. `start_turn` must arrange for `done` to run on
/// the loop once decoding ends.
class Decoder {
public:
    virtual ~Decoder() = default;
    virtual bool ready(const ModelView& view) const = 0;
    virtual bool exhausted() const = 0;
    virtual void start_turn(const ModelView& view, EventLoop& loop, std::function<void(DecodedTurn)> done) = 0;
    /// Switches to recovery after a failure arrives past the final answer.
    virtual void begin_recovery() = 0;
};

/// Replays a workload script. Sequential modes split multi-call entries into
/// one turn per call; sync modes drop await_future turns.
class ScriptedDecoder : public Decoder {
public:
    ScriptedDecoder(const WorkloadSpec& spec, RunMode mode);

    bool ready(const ModelView& view) const override;
    bool exhausted() const override;
    void start_turn(const ModelView& view, EventLoop& loop, std::function<void(DecodedTurn)> done) override;
    void begin_recovery() override;

    const std::vector<ScriptTurn>& turns() const { return turns_; }

private:
    std::vector<ScriptTurn> expand(const std::vector<ScriptTurn>& in) const;

    RunMode mode_;
    std::vector<ScriptTurn> turns_;
    std::vector<ScriptTurn> recovery_;
    std::optional<ScriptTurn> last_final_;
    std::size_t next_ = 0;
};

/// Tracks which result futures the model holds and which of their outcomes
/// it has been told about.
class Integrator {
public:
    struct Batch {
        Message message;
        std::vector<FutureId> futures;
    };
    using CallOf = std::function<std::string(const FutureId&)>;

    Integrator(const FutureStore& store, CallOf call_of);

    void expose(const FutureId& base);
    /// Bindings of every exposed future resolved since the last boundary
    /// (base ids and their registered fields), as one user message.
    std::optional<Batch> integrate_boundary();
    /// Failed or cancelled exposed futures not yet reported, as one user message.
    std::optional<Batch> inject_failures();
    void mark_integrated(const FutureId& base) { integrated_.insert(base); }
    void mark_reported(const FutureId& base) { reported_.insert(base); }
    bool integrated(const FutureId& base) const { return integrated_.contains(base); }
    bool reported(const FutureId& base) const { return reported_.contains(base); }
    ErrorInfo describe_failure(const FutureId& base) const;

private:
    const FutureStore& store_;
    CallOf call_of_;
    std::vector<FutureId> exposed_;
    std::set<FutureId> integrated_;
    std::set<FutureId> reported_;
};

struct RunConfig {
    RunMode mode = RunMode::async_parallel;
    ClockKind clock = ClockKind::virtual_time;
    /// Wall seconds per time unit; defaults to the workload's delay_scale.
    std::optional<double> seconds_per_unit;
    CancelPolicy policy = CancelPolicy::consuming;
    std::optional<int> context_budget;
};

/// Runs the workload's script against its mock tools.
RunTrace run_conversation(const WorkloadSpec& spec, const RunConfig& config);
/// Runs with a caller-supplied decoder and tool bindings; `spec` supplies the
/// prompt, tool metadata, and budget.
RunTrace run_conversation(const WorkloadSpec& spec, const RunConfig& config, Decoder& decoder,
                          const ToolRegistry& tools);

}  // namespace futurecall

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <queue>
#include <stdexcept>
#include <vector>

#include "futurecall/futures.hpp"

namespace futurecall {

class EmptyQueue : public std::runtime_error {
public:
    EmptyQueue() : std::runtime_error("advance on an empty event queue") {}
};

enum class ClockKind { virtual_time, wall };

/// Discrete-event clock. Events fire in (time, insertion sequence) order and
/// time never decreases.
///
/// In wall mode the same logical schedule is paced against the monotonic
/// clock: `advance` sleeps until the event's logical time (in units scaled by
/// `seconds_per_unit`) has elapsed, and `stamp()` reports measured elapsed
/// units instead of the logical time. Threads other than the loop owner may
/// only call `post_external`.
class EventLoop {
public:
    using Event = std::function<void()>;

    explicit EventLoop(ClockKind kind = ClockKind::virtual_time, double seconds_per_unit = 1.0);

    ClockKind kind() const { return kind_; }

    /// Logical time of the event being processed.
    Time now() const { return now_; }
    /// Timestamp for traces: logical time in virtual mode, measured in wall mode.
    Time stamp() const;

    void schedule(Time delay, Event event);
    /// Thread-safe; the event fires at the current (measured) time.
    void post_external(Event event);

    bool empty() const;
    std::size_t size() const { return queue_.size(); }
    /// Fire time of the earliest queued event.
    Time next_time() const;

    /// Pops and runs the earliest event. Throws EmptyQueue.
    void advance();

    /// Blocks for an external event when the queue is empty and `expect` is set.
    /// Returns false once nothing can ever arrive.
    bool wait_external();
    void expect_external(int delta);

private:
    struct Entry {
        Time at;
        std::uint64_t seq;
        Event event;
    };
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const {
            return a.at != b.at ? a.at > b.at : a.seq > b.seq;
        }
    };

    Time measured() const;
    void drain_inbox_locked();

    ClockKind kind_;
    double seconds_per_unit_;
    Time now_ = 0;
    std::uint64_t seq_ = 0;
    std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
    std::chrono::steady_clock::time_point origin_;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Event> inbox_;
    int outstanding_external_ = 0;
};

}  // namespace futurecall

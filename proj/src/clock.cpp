// SPDX-License-Identifier: Apache-2.0
#include "futurecall/clock.hpp"

#include <algorithm>
#include <thread>

namespace futurecall {

EventLoop::EventLoop(ClockKind kind, double seconds_per_unit)
    : kind_(kind), seconds_per_unit_(seconds_per_unit), origin_(std::chrono::steady_clock::now()) {
    if (!(seconds_per_unit > 0))
        throw std::invalid_argument("seconds_per_unit must be positive");
}

Time EventLoop::measured() const {
    std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - origin_;
    return elapsed.count() / seconds_per_unit_;
}

Time EventLoop::stamp() const { return kind_ == ClockKind::wall ? measured() : now_; }

void EventLoop::schedule(Time delay, Event event) {
    if (delay < 0)
        throw std::invalid_argument("negative delay");
    queue_.push(Entry{now_ + delay, seq_++, std::move(event)});
}

void EventLoop::post_external(Event event) {
    {
        std::lock_guard lock(mu_);
        inbox_.push_back(std::move(event));
    }
    cv_.notify_all();
}

void EventLoop::expect_external(int delta) {
    std::lock_guard lock(mu_);
    outstanding_external_ += delta;
}

void EventLoop::drain_inbox_locked() {
    Time at = std::max(now_, kind_ == ClockKind::wall ? measured() : now_);
    while (!inbox_.empty()) {
        queue_.push(Entry{at, seq_++, std::move(inbox_.front())});
        inbox_.pop_front();
        --outstanding_external_;
    }
}

bool EventLoop::empty() const {
    std::lock_guard lock(mu_);
    return queue_.empty() && inbox_.empty();
}

Time EventLoop::next_time() const {
    if (queue_.empty())
        throw EmptyQueue();
    return queue_.top().at;
}

bool EventLoop::wait_external() {
    std::unique_lock lock(mu_);
    if (!queue_.empty() || !inbox_.empty()) {
        drain_inbox_locked();
        return true;
    }
    if (outstanding_external_ <= 0)
        return false;
    cv_.wait(lock, [this] { return !inbox_.empty(); });
    drain_inbox_locked();
    return true;
}

void EventLoop::advance() {
    {
        std::unique_lock lock(mu_);
        drain_inbox_locked();
        if (queue_.empty())
            throw EmptyQueue();
        if (kind_ == ClockKind::wall) {
            // Sleep until the head is due, but wake for external arrivals.
            while (true) {
                Time due = queue_.top().at;
                Time now = measured();
                if (now >= due)
                    break;
                auto wait = std::chrono::duration<double>((due - now) * seconds_per_unit_);
                if (cv_.wait_for(lock, wait, [this] { return !inbox_.empty(); })) {
                    drain_inbox_locked();
                    continue;
                }
            }
        }
    }
    Entry e = queue_.top();
    queue_.pop();
    now_ = std::max(now_, e.at);
    e.event();
}

}  // namespace futurecall

#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "accelshape/model.hpp"

namespace accelshape {

/// Deterministic event loop. Events at equal timestamps run in the order
/// they were scheduled.
class EventQueue {
public:
    using Action = std::function<void()>;

    SimTime now() const { return now_; }

    void schedule(SimTime at, Action action) {
        if (at < now_) at = now_;
        heap_.push(Entry{at, next_seq_++, std::move(action)});
    }

    /// Runs every event with timestamp <= `until`; leaves now() at `until`.
    void run_until(SimTime until) {
        while (!heap_.empty() && heap_.top().at <= until) {
            Entry e = std::move(const_cast<Entry&>(heap_.top()));
            heap_.pop();
            now_ = e.at;
            ++executed_;
            e.action();
        }
        if (until > now_) now_ = until;
    }

    bool empty() const { return heap_.empty(); }
    std::uint64_t executed() const { return executed_; }

private:
    struct Entry {
        SimTime at;
        std::uint64_t seq;
        Action action;
    };
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const {
            return a.at != b.at ? a.at > b.at : a.seq > b.seq;
        }
    };

    std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
    SimTime now_ = 0;
    std::uint64_t next_seq_ = 0;
    std::uint64_t executed_ = 0;
};

}  // namespace accelshape

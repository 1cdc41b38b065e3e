#pragma once

#include <cstdint>
#include <deque>
#include <optional>

#include "accelshape/model.hpp"

namespace accelshape {

enum class BufferRelease { AtServiceStart, AtCompletion };

struct EngineJob {
    int tenant = 0;
    std::uint64_t msg_bytes = 0;
    SimTime arrival = 0;
    std::uint64_t tag = 0;
};

struct ServiceResult {
    EngineJob job;
    SimTime start = 0;
    SimTime completion = 0;
    std::uint64_t egress_bytes = 0;
};

/// One accelerator pipeline: a bounded byte buffer in front of a single
/// FIFO server whose speed comes from the profile curve.
class AccelEngine {
public:
    explicit AccelEngine(const AcceleratorProfile& profile,
                         std::uint64_t buffer_capacity = 262144,
                         BufferRelease release = BufferRelease::AtServiceStart);

    const AcceleratorProfile& profile() const { return profile_; }
    std::uint64_t capacity() const { return capacity_; }
    std::uint64_t occupancy() const { return occupancy_; }
    SimTime busy_until() const { return busy_until_; }
    bool empty() const { return buffer_.empty(); }
    std::size_t queued() const { return buffer_.size(); }

    /// False (BufferFull) when the message does not fit in the free bytes.
    bool try_enqueue(int tenant, std::uint64_t msg_bytes, SimTime now, std::uint64_t tag = 0);

    /// Pops the head and computes when it finishes. Requires !empty().
    ServiceResult service_next(SimTime now);

    /// Releases buffer bytes held until completion (AtCompletion mode only).
    void complete(const ServiceResult& r);

    SimTime service_time(std::uint64_t msg_bytes) const;

    std::uint64_t enqueued_bytes() const { return enqueued_; }
    std::uint64_t freed_bytes() const { return freed_; }

private:
    AcceleratorProfile profile_;
    std::uint64_t capacity_;
    BufferRelease release_;
    std::deque<EngineJob> buffer_;
    std::uint64_t occupancy_ = 0;
    SimTime busy_until_ = 0;
    std::uint64_t enqueued_ = 0;
    std::uint64_t freed_ = 0;
};

}  // namespace accelshape

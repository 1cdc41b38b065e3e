#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "accelshape/model.hpp"

namespace accelshape {

enum class Opcode { AccelInvoke, DmaRead, DmaWrite };
enum class ProtocolMode { Push, Pull };

struct Descriptor {
    int tenant = 0;
    int qp = 0;
    Opcode opcode = Opcode::DmaWrite;
    std::uint64_t msg_bytes = 1;
    /// Engine index for AccelInvoke.
    int accel = -1;
    std::uint64_t dma_buffer = 0;
    std::uint64_t seq = 0;
    SimTime submitted = 0;
};

struct CompletionRecord {
    std::uint64_t seq = 0;
    int tenant = 0;
    int qp = 0;
    SimTime submitted = 0;
    SimTime completed = 0;
    bool denied = false;
};

enum class SubmitResult { Accepted, SqFull };
enum class PostResult { Posted, CqFull };

/// One queue pair's submission and completion rings plus its doorbell.
class RingPair {
public:
    RingPair(std::size_t sq_depth, std::size_t cq_depth);

    /// Appends to the SQ and rings the doorbell; assigns the sequence number.
    SubmitResult submit(Descriptor d);
    /// Device side: removes up to `batch` descriptors in order.
    std::vector<Descriptor> fetch(std::size_t batch);
    const Descriptor* head() const { return sq_.empty() ? nullptr : &sq_.front(); }

    PostResult post_completion(const CompletionRecord& r);
    std::optional<CompletionRecord> drain_completion();

    std::size_t sq_depth() const { return sq_depth_; }
    std::size_t cq_depth() const { return cq_depth_; }
    std::size_t sq_occupancy() const { return sq_.size(); }
    std::size_t cq_occupancy() const { return cq_.size(); }
    /// Doorbell rings not yet consumed by a fetch.
    std::size_t doorbell() const { return doorbell_; }

private:
    std::size_t sq_depth_;
    std::size_t cq_depth_;
    std::deque<Descriptor> sq_;
    std::deque<CompletionRecord> cq_;
    std::size_t doorbell_ = 0;
    std::uint64_t next_seq_ = 0;
};

}  // namespace accelshape

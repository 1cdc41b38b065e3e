#include "accelshape/ring.hpp"

#include <algorithm>

namespace accelshape {

RingPair::RingPair(std::size_t sq_depth, std::size_t cq_depth)
    : sq_depth_(sq_depth), cq_depth_(cq_depth) {
    if (sq_depth < 1) throw ConfigError("ring.sq_depth", "must be >= 1");
    if (cq_depth < 1) throw ConfigError("ring.cq_depth", "must be >= 1");
}

SubmitResult RingPair::submit(Descriptor d) {
    if (sq_.size() >= sq_depth_) return SubmitResult::SqFull;
    if (d.msg_bytes < 1) throw std::invalid_argument("descriptor msg_bytes must be >= 1");
    d.seq = next_seq_++;
    sq_.push_back(d);
    ++doorbell_;
    return SubmitResult::Accepted;
}

std::vector<Descriptor> RingPair::fetch(std::size_t batch) {
    const std::size_t n = std::min(batch, sq_.size());
    std::vector<Descriptor> out(sq_.begin(), sq_.begin() + static_cast<std::ptrdiff_t>(n));
    sq_.erase(sq_.begin(), sq_.begin() + static_cast<std::ptrdiff_t>(n));
    doorbell_ -= std::min(doorbell_, n);
    return out;
}

PostResult RingPair::post_completion(const CompletionRecord& r) {
    if (cq_.size() >= cq_depth_) return PostResult::CqFull;
    cq_.push_back(r);
    return PostResult::Posted;
}

std::optional<CompletionRecord> RingPair::drain_completion() {
    if (cq_.empty()) return std::nullopt;
    auto r = cq_.front();
    cq_.pop_front();
    return r;
}

}  // namespace accelshape

#include "accelshape/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace accelshape {

AccelEngine::AccelEngine(const AcceleratorProfile& profile, std::uint64_t buffer_capacity,
                         BufferRelease release)
    : profile_(profile), capacity_(buffer_capacity), release_(release) {
    profile_.validate();
    if (capacity_ < 1) throw ConfigError("engine.buffer_bytes", "must be >= 1");
}

bool AccelEngine::try_enqueue(int tenant, std::uint64_t msg_bytes, SimTime now,
                              std::uint64_t tag) {
    if (msg_bytes < 1) throw std::invalid_argument("engine message must be >= 1 byte");
    if (occupancy_ + msg_bytes > capacity_) return false;
    occupancy_ += msg_bytes;
    enqueued_ += msg_bytes;
    buffer_.push_back(EngineJob{tenant, msg_bytes, now, tag});
    return true;
}

SimTime AccelEngine::service_time(std::uint64_t msg_bytes) const {
    const Gbps t = interpolate_throughput(profile_, MessageSize(msg_bytes, ~std::uint64_t{0}));
    const double compute_ps = static_cast<double>(msg_bytes) * 8.0 * kPsPerNs / t;
    return from_ns(profile_.fixed_latency_ns) + static_cast<SimTime>(std::llround(compute_ps));
}

ServiceResult AccelEngine::service_next(SimTime now) {
    if (buffer_.empty()) throw std::logic_error("service_next on an empty engine");
    ServiceResult r;
    r.job = buffer_.front();
    buffer_.pop_front();
    r.start = std::max(now, busy_until_);
    r.completion = r.start + service_time(r.job.msg_bytes);
    r.egress_bytes = egress_size(profile_.egress, MessageSize(r.job.msg_bytes, ~std::uint64_t{0}))
                         .bytes();
    busy_until_ = r.completion;
    if (release_ == BufferRelease::AtServiceStart) {
        occupancy_ -= r.job.msg_bytes;
        freed_ += r.job.msg_bytes;
    }
    return r;
}

void AccelEngine::complete(const ServiceResult& r) {
    if (release_ != BufferRelease::AtCompletion) return;
    occupancy_ -= r.job.msg_bytes;
    freed_ += r.job.msg_bytes;
}

}  // namespace accelshape

#include "accelshape/shaper_runtime.hpp"

#include <algorithm>
#include <limits>

namespace accelshape {

ShaperRuntime::ShaperRuntime(EventQueue& events, Device& device, RuntimeOptions options)
    : ev_(events), dev_(device), opt_(options) {}

ShaperRuntime::Tenant& ShaperRuntime::slot(int tenant) {
    const auto t = static_cast<std::size_t>(tenant);
    if (tenants_.size() <= t) tenants_.resize(t + 1);
    return tenants_[t];
}

void ShaperRuntime::configure(int tenant, const ShaperConfig& cfg) {
    Tenant& t = slot(tenant);
    t.configured = true;
    if (cfg.min_bucket) t.min.emplace(*cfg.min_bucket, ev_.now());
    if (cfg.max_bucket) {
        t.max.emplace(*cfg.max_bucket, ev_.now());
    } else if (opt_.safety_rate > 0) {
        t.max.emplace(TokenBucketSpec{RateMetric::Gbps, opt_.safety_rate,
                                      static_cast<double>(opt_.excess_window_bytes) * 8.0},
                      ev_.now());
    }
    t.resize = cfg.resize;
    t.floor = cfg.small_msg_floor;
}

std::uint64_t ShaperRuntime::wire_bytes(int tenant, std::uint64_t msg_bytes) const {
    const auto idx = static_cast<std::size_t>(tenant);
    if (idx >= tenants_.size()) return msg_bytes;
    const Tenant& t = tenants_[idx];
    if (t.floor > 0 && msg_bytes < t.floor) {
        const auto v = police_small(msg_bytes, t.floor, t.resize);
        // A denied op still costs the device a fetch and a completion.
        if (v.verdict == PoliceVerdict::Deny) return t.floor;
    }
    if (const auto* pad = std::get_if<PadTo>(&t.resize)) return std::max(msg_bytes, pad->bytes);
    return msg_bytes;
}

double ShaperRuntime::cost(const TokenBucket& b, std::uint64_t wire) const {
    return b.spec().metric == RateMetric::Iops ? 1.0 : static_cast<double>(wire) * 8.0;
}

void ShaperRuntime::on_doorbell(int tenant) {
    Tenant& t = slot(tenant);
    if (!t.configured) {
        while (dev_.pull(tenant, ~std::size_t{0}) > 0) {
        }
        return;
    }
    request_eval();
}

void ShaperRuntime::on_progress() { request_eval(); }

void ShaperRuntime::on_complete(int tenant, std::uint64_t wire_bytes) {
    Tenant& t = slot(tenant);
    t.outstanding -= std::min(t.outstanding, wire_bytes);
    request_eval();
}

std::uint64_t ShaperRuntime::outstanding(int tenant) const {
    return tenants_.at(static_cast<std::size_t>(tenant)).outstanding;
}
std::uint64_t ShaperRuntime::guaranteed_pulls(int tenant) const {
    return tenants_.at(static_cast<std::size_t>(tenant)).guaranteed;
}
std::uint64_t ShaperRuntime::excess_pulls(int tenant) const {
    return tenants_.at(static_cast<std::size_t>(tenant)).excess;
}

void ShaperRuntime::request_eval() {
    if (eval_pending_) return;
    eval_pending_ = true;
    ev_.schedule(ev_.now(), [this] {
        eval_pending_ = false;
        evaluate();
    });
}

void ShaperRuntime::take(int tenant, std::uint64_t wire) {
    tenants_[static_cast<std::size_t>(tenant)].outstanding += wire;
    dev_.pull(tenant, 1);
}

bool ShaperRuntime::try_guaranteed(int tenant, SimTime& wake) {
    Tenant& t = tenants_[static_cast<std::size_t>(tenant)];
    if (!t.min) return false;
    const Descriptor* head = dev_.peek(tenant);
    if (!head) return false;
    const auto wire = wire_bytes(tenant, head->msg_bytes);
    const SimTime now = ev_.now();
    SimTime ready = t.min->ready_at(cost(*t.min, wire), now);
    if (t.max) ready = std::max(ready, t.max->ready_at(cost(*t.max, wire), now));
    if (ready > now) {
        wake = std::min(wake, ready);
        return false;
    }
    t.min->admit(cost(*t.min, wire), now);
    if (t.max) t.max->admit(cost(*t.max, wire), now);
    ++t.guaranteed;
    take(tenant, wire);
    return true;
}

bool ShaperRuntime::try_excess(int tenant, SimTime& wake) {
    Tenant& t = tenants_[static_cast<std::size_t>(tenant)];
    if (!t.configured) return false;
    if (t.outstanding >= opt_.excess_window_bytes) return false;  // woken by on_complete
    const Descriptor* head = dev_.peek(tenant);
    if (!head) return false;
    const auto wire = wire_bytes(tenant, head->msg_bytes);
    const SimTime now = ev_.now();
    if (t.max) {
        const SimTime ready = t.max->ready_at(cost(*t.max, wire), now);
        if (ready > now) {
            wake = std::min(wake, ready);
            return false;
        }
        t.max->admit(cost(*t.max, wire), now);
    }
    ++t.excess;
    take(tenant, wire);
    return true;
}

void ShaperRuntime::evaluate() {
    SimTime wake = std::numeric_limits<SimTime>::max();
    const std::size_t n = tenants_.size();
    for (std::size_t i = 0; i < n; ++i) {
        while (try_guaranteed(static_cast<int>(i), wake)) {
        }
    }
    if (opt_.excess && n > 0) {
        // One grant per tenant per round until nobody can take more.
        bool granted = true;
        while (granted) {
            granted = false;
            const std::size_t start = cursor_;
            for (std::size_t k = 0; k < n; ++k) {
                const std::size_t i = (start + k) % n;
                if (try_excess(static_cast<int>(i), wake)) {
                    granted = true;
                    cursor_ = (i + 1) % n;
                }
            }
        }
    }
    if (wake == std::numeric_limits<SimTime>::max()) return;
    if (wake_at_ != kNever && wake_at_ <= wake && wake_at_ > ev_.now()) return;
    wake_at_ = wake;
    ev_.schedule(wake, [this] {
        if (ev_.now() >= wake_at_) wake_at_ = kNever;
        evaluate();
    });
}

}  // namespace accelshape

// Pull-mode controller: decides, per tenant, when the device may fetch the
// next descriptor. Guaranteed pulls are paced by the min bucket; spare
// capacity is handed out round-robin to backlogged tenants, each limited to
// a bounded amount of outstanding work so that no tenant can flood the
// queues a paced tenant has to cross.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "accelshape/device.hpp"
#include "accelshape/event_queue.hpp"
#include "accelshape/shaper.hpp"

namespace accelshape {

struct RuntimeOptions {
    /// Outstanding bytes a tenant may hold through excess grants.
    std::uint64_t excess_window_bytes = 65536;
    bool excess = true;
    /// Ceiling applied to tenants without a max bucket, bits per second.
    double safety_rate = 0;
};

class ShaperRuntime final : public PullController {
public:
    ShaperRuntime(EventQueue& events, Device& device, RuntimeOptions options = {});

    /// Registers a tenant's shaping parameters. Tenants never registered are
    /// pulled as soon as their doorbell rings.
    void configure(int tenant, const ShaperConfig& cfg);

    void on_doorbell(int tenant) override;
    void on_progress() override;
    /// Called by the owner when a request of `tenant` has fully completed.
    void on_complete(int tenant, std::uint64_t wire_bytes);

    std::uint64_t outstanding(int tenant) const;
    std::uint64_t guaranteed_pulls(int tenant) const;
    std::uint64_t excess_pulls(int tenant) const;

    /// Bytes the device will put on the wire for a descriptor of `tenant`.
    std::uint64_t wire_bytes(int tenant, std::uint64_t msg_bytes) const;

private:
    struct Tenant {
        bool configured = false;
        std::optional<TokenBucket> min;
        std::optional<TokenBucket> max;
        ResizePolicy resize = NoResize{};
        std::uint64_t floor = 0;
        std::uint64_t outstanding = 0;
        std::uint64_t guaranteed = 0;
        std::uint64_t excess = 0;
    };

    Tenant& slot(int tenant);
    double cost(const TokenBucket& b, std::uint64_t wire) const;
    void request_eval();
    void evaluate();
    bool try_guaranteed(int tenant, SimTime& wake);
    bool try_excess(int tenant, SimTime& wake);
    void take(int tenant, std::uint64_t wire);

    EventQueue& ev_;
    Device& dev_;
    RuntimeOptions opt_;
    std::vector<Tenant> tenants_;
    std::size_t cursor_ = 0;
    bool eval_pending_ = false;
    SimTime wake_at_ = kNever;
};

}  // namespace accelshape

// Device side of the host/accelerator ring protocol. Descriptors are
// fetched from each QP's SQ (on doorbell in push mode, when the pull
// controller says so in pull mode), their payload is moved over the fabric,
// optionally through an accelerator, and a completion record is written
// back to the CQ.
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "accelshape/engine.hpp"
#include "accelshape/event_queue.hpp"
#include "accelshape/fabric.hpp"
#include "accelshape/ring.hpp"
#include "accelshape/shaper.hpp"

namespace accelshape {

struct RingConfig {
    std::size_t sq_depth = 128;
    std::size_t cq_depth = 128;
    std::size_t fetch_batch = 8;
    std::uint32_t descriptor_bytes = 64;
    std::uint32_t completion_bytes = 16;
    /// Descriptor fetches and completion writes travel over the fabric.
    bool on_fabric = true;
    std::int64_t doorbell_ns = 0;
    std::int64_t host_poll_ns = 0;
    /// Per-descriptor processing cost in the device's command processor.
    std::int64_t descriptor_process_ns = 2;

    void validate(const std::string& path = "ring") const;
};

constexpr SimTime kNever = -1;

/// Per-request timeline; kNever marks stages the request does not have.
struct StageTimes {
    SimTime submitted = kNever;
    SimTime fetched = kNever;
    SimTime read_done = kNever;
    SimTime compute_done = kNever;
    SimTime write_done = kNever;
    SimTime completed = kNever;
};

struct CompletionInfo {
    int tenant = 0;
    int qp = 0;
    std::uint64_t seq = 0;
    Opcode opcode = Opcode::DmaWrite;
    std::uint64_t user_bytes = 0;
    /// What the user gets back: accelerator output, or the moved bytes.
    std::uint64_t egress_bytes = 0;
    std::uint64_t padding = 0;
    bool denied = false;
    StageTimes t;
};

/// Decides when a tenant's descriptors are pulled (pull mode).
class PullController {
public:
    virtual ~PullController() = default;
    virtual void on_doorbell(int tenant) = 0;
    /// Some queued work moved on; backlog-gated grants may be possible.
    virtual void on_progress() = 0;
};

struct TenantPolicy {
    ResizePolicy resize = NoResize{};
    std::uint64_t small_msg_floor = 0;
};

class Device {
public:
    Device(EventQueue& events, Fabric* fabric, RingConfig ring, ProtocolMode mode,
           BufferRelease release = BufferRelease::AtServiceStart,
           std::uint64_t engine_buffer = 262144);
    Device(const Device&) = delete;
    Device& operator=(const Device&) = delete;

    int add_engine(const AcceleratorProfile& profile);
    int add_qp(int tenant);

    void set_controller(PullController* c) { controller_ = c; }
    void set_policy(int tenant, TenantPolicy p);
    void on_completion(std::function<void(const CompletionInfo&)> hook) {
        completion_hook_ = std::move(hook);
    }
    /// Observes every descriptor-fetch DMA issue (qp, descriptors, time).
    void on_fetch(std::function<void(int, std::size_t, SimTime)> hook) {
        fetch_hook_ = std::move(hook);
    }

    SubmitResult submit(int qp, Descriptor d);

    // Pull-controller interface.
    const Descriptor* peek(int tenant) const;
    std::size_t pull(int tenant, std::size_t count);
    /// Bytes on their way into (or waiting in) an engine.
    std::uint64_t engine_backlog(int engine) const;
    const AccelEngine& engine(int idx) const { return engines_.at(static_cast<std::size_t>(idx))->engine; }
    std::size_t engine_count() const { return engines_.size(); }
    Fabric* fabric() const { return fabric_; }
    const TenantPolicy& policy(int tenant) const;

    const RingPair& ring(int qp) const { return rings_.at(static_cast<std::size_t>(qp)); }
    ProtocolMode mode() const { return mode_; }
    std::size_t requests_in_flight() const { return requests_.size(); }
    /// Descriptors fetched whose completion the host has not yet consumed.
    std::uint64_t in_pipeline() const { return fetched_ - retired_; }
    std::uint64_t policed(int tenant) const;

private:
    struct Request {
        Descriptor d;
        int pieces = 0;
        std::uint64_t egress = 0;
        std::uint64_t padding = 0;
        bool denied = false;
        StageTimes t;
    };
    struct Wire {
        std::vector<std::uint64_t> members;
        std::vector<std::uint64_t> member_bytes;
        std::uint64_t bytes = 0;
        int qp = 0;
        int tenant = 0;
        Opcode opcode = Opcode::DmaWrite;
        int accel = -1;
    };
    struct EngineSlot {
        explicit EngineSlot(AccelEngine e) : engine(std::move(e)) {}
        AccelEngine engine;
        std::deque<std::uint64_t> waiting;
        bool serving = false;
        std::uint64_t committed = 0;
    };

    void ring_doorbell(int qp);
    void fetch_descriptors(int qp, std::size_t batch);
    void process(const Descriptor& d, SimTime fetched);
    void launch(Wire w);
    void dma(int qp, bool write, std::uint64_t bytes, bool metadata, Fabric::Done done);
    void engine_enqueue(std::uint64_t wire);
    void engine_serve(int idx);
    void finish_wire(std::uint64_t wire, std::uint64_t egress, SimTime at);
    void complete(std::uint64_t req);
    void land(std::uint64_t req, SimTime at);
    void host_drain(int qp);
    void flush_batch(int tenant);
    void progress();

    EventQueue& ev_;
    Fabric* fabric_;
    RingConfig cfg_;
    ProtocolMode mode_;
    BufferRelease release_;
    std::uint64_t engine_buffer_;
    PullController* controller_ = nullptr;
    std::vector<RingPair> rings_;
    std::vector<int> qp_tenant_;
    std::vector<std::vector<int>> tenant_qps_;
    std::vector<std::size_t> tenant_cursor_;
    std::vector<TenantPolicy> policies_;
    std::vector<std::unique_ptr<Batcher>> batchers_;
    std::vector<std::vector<std::uint64_t>> batch_members_;
    std::vector<std::uint64_t> policed_;
    std::vector<std::unique_ptr<EngineSlot>> engines_;
    std::unordered_map<std::uint64_t, Request> requests_;
    std::unordered_map<std::uint64_t, Wire> wires_;
    std::vector<std::deque<std::uint64_t>> cq_stalled_;
    /// Requests whose records sit in each CQ, in ring order.
    std::vector<std::deque<std::uint64_t>> cq_posted_;
    std::uint64_t next_req_ = 1;
    std::uint64_t next_wire_ = 1;
    SimTime processor_free_ = 0;
    std::uint64_t fetched_ = 0;
    std::uint64_t retired_ = 0;
    std::function<void(const CompletionInfo&)> completion_hook_;
    std::function<void(int, std::size_t, SimTime)> fetch_hook_;
};

}  // namespace accelshape

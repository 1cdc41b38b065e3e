// Interface-resident traffic shaping: token buckets pacing each tenant's
// descriptor pulls, message re-sizing around the PCIe MTU, small-message
// policing and the planner that turns SLAs into shaper parameters.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "accelshape/fabric.hpp"
#include "accelshape/model.hpp"

namespace accelshape {

struct TokenBucketSpec {
    RateMetric metric = RateMetric::Gbps;
    /// Tokens per second: bits for Gbps buckets, operations for Iops.
    double rate = kUnbounded;
    double capacity = 0;
};

struct Granted {
    double amount;
    SimTime at;
};
struct Deferred {
    SimTime until;
};
using AdmitResult = std::variant<Granted, Deferred>;

/// Linear-refill bucket. A request larger than the burst capacity waits
/// until its full cost has accrued, so every grant is a whole message.
class TokenBucket {
public:
    TokenBucket() = default;
    explicit TokenBucket(TokenBucketSpec spec, SimTime start = 0);

    const TokenBucketSpec& spec() const { return spec_; }
    bool unbounded() const { return spec_.rate == kUnbounded; }
    double level(SimTime now) const;

    AdmitResult admit(double cost, SimTime now);
    /// Earliest time `cost` could be granted, without debiting.
    SimTime ready_at(double cost, SimTime now) const;

private:
    double refilled(double cost, SimTime now) const;

    TokenBucketSpec spec_;
    double level_ = 0;
    SimTime last_update_ = 0;
};

struct NoResize {};
struct SplitTo {
    std::uint64_t bytes;
};
struct PadTo {
    std::uint64_t bytes;
};
struct BatchTo {
    std::uint64_t bytes;
    std::int64_t max_delay_ns;
};
using ResizePolicy = std::variant<NoResize, SplitTo, PadTo, BatchTo>;

std::string describe(const ResizePolicy& p);
void validate(const ResizePolicy& p, const std::string& path);

struct Normalized {
    std::vector<std::uint64_t> pieces;
    std::uint64_t padding = 0;
};

/// Stateless re-sizing of one message. BatchTo needs a stream; a lone
/// message passes through unchanged (see Batcher).
Normalized normalize(std::uint64_t msg_bytes, const ResizePolicy& policy);

/// Coalesces a stream of small messages into batches of at least `bytes`,
/// or whatever has accumulated once the oldest member is `max_delay` old.
class Batcher {
public:
    struct Batch {
        std::vector<std::uint64_t> members;
        std::uint64_t bytes = 0;
        SimTime emitted = 0;
    };

    explicit Batcher(BatchTo policy) : policy_(policy) {}

    /// Adds a message; returns a batch if this one filled it.
    std::optional<Batch> add(std::uint64_t msg_bytes, SimTime now);
    /// Deadline of the open batch, if any.
    std::optional<SimTime> deadline() const;
    /// Emits the open batch when its deadline has passed.
    std::optional<Batch> flush(SimTime now);
    bool empty() const { return open_.members.empty(); }

private:
    BatchTo policy_;
    Batch open_;
    SimTime opened_ = 0;
};

enum class PoliceVerdict { Pass, Reshape, Deny };

struct PoliceResult {
    PoliceVerdict verdict;
    /// Size after reshaping (PadTo) or the batch target (BatchTo).
    std::uint64_t bytes;
};

PoliceResult police_small(std::uint64_t msg_bytes, std::uint64_t floor, const ResizePolicy& policy);

enum class ExcessSharing { RoundRobin, Weighted };

struct ShaperConfig {
    std::string tenant_id;
    /// Guaranteed pull pace; absent for best-effort tenants.
    std::optional<TokenBucketSpec> min_bucket;
    std::optional<TokenBucketSpec> max_bucket;
    ResizePolicy resize = NoResize{};
    int qp_count = 1;
    std::uint64_t small_msg_floor = 64;
    /// Planned ingress requirement (Gbps) and the wire size it was computed at.
    Gbps ingress_rate = 0;
    std::uint64_t wire_size = 0;

    void validate(const std::string& path = "shaper") const;
};

struct PlanOptions {
    std::uint64_t small_msg_floor = 64;
    int burst_messages = 4;
};

/// Fractions of each resource not yet promised to other tenants.
struct ResourceBudget {
    double up = 1.0;
    double down = 1.0;
    double accel = 1.0;
};

/// What a planned tenant takes out of a ResourceBudget.
struct ResourceUse {
    double up = 0;
    double down = 0;
    double accel = 0;
};

/// Plans one tenant against what is left of the shared resources. Throws
/// InfeasibleSla naming the binding constraint.
ShaperConfig plan_shaping(const Sla& sla, const FlowSpec& flow, const AcceleratorProfile* profile,
                          const PcieConfig& cfg, const PlanOptions& options = {},
                          const ResourceBudget& budget = {}, ResourceUse* use = nullptr);

/// Largest-remainder apportionment of `total` QPs by weight; every tenant
/// keeps at least one QP when total allows.
std::vector<int> allocate_qps(std::span<const double> weights, int total);

struct TenantPlan {
    std::string tenant_id;
    std::optional<ShaperConfig> config;
    bool feasible = true;
    BindingConstraint binding = BindingConstraint::None;
    std::string detail;
};

struct AdmissionPlan {
    std::vector<TenantPlan> tenants;
    bool all_feasible() const;
};

/// Plans every tenant that has an SLA, reserving link goodput in order and
/// sharing `qp_pool` QPs by min-rate weight.
AdmissionPlan plan_admission(std::span<const FlowSpec> flows, std::span<const Sla> slas,
                             std::span<const AcceleratorProfile> profiles, const PcieConfig& cfg,
                             int qp_pool, const PlanOptions& options = {});

void print_admission_report(std::ostream& os, const AdmissionPlan& plan);

}  // namespace accelshape

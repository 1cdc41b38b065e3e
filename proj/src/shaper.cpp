#include "accelshape/shaper.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

namespace accelshape {

namespace {
constexpr double kPsPerSecond = 1e12;
constexpr double kTokenSlack = 1e-6;
}  // namespace

TokenBucket::TokenBucket(TokenBucketSpec spec, SimTime start)
    : spec_(spec), level_(spec.capacity), last_update_(start) {
    if (!(spec_.rate > 0)) throw ConfigError("bucket.rate", "must be > 0");
    if (spec_.capacity < 0) throw ConfigError("bucket.capacity", "must be >= 0");
}

double TokenBucket::refilled(double cost, SimTime now) const {
    const double cap = std::max(spec_.capacity, cost);
    const double dt = static_cast<double>(std::max<SimTime>(0, now - last_update_));
    return std::min(cap, level_ + spec_.rate * dt / kPsPerSecond);
}

double TokenBucket::level(SimTime now) const {
    if (unbounded()) return kUnbounded;
    return refilled(spec_.capacity, now);
}

SimTime TokenBucket::ready_at(double cost, SimTime now) const {
    if (unbounded()) return now;
    const double have = refilled(cost, now);
    if (have + kTokenSlack >= cost) return now;
    return now + static_cast<SimTime>(std::ceil((cost - have) / spec_.rate * kPsPerSecond));
}

AdmitResult TokenBucket::admit(double cost, SimTime now) {
    if (unbounded()) return Granted{cost, now};
    level_ = refilled(cost, now);
    last_update_ = std::max(last_update_, now);
    if (level_ + kTokenSlack >= cost) {
        level_ = std::max(0.0, level_ - cost);
        return Granted{cost, now};
    }
    return Deferred{now + static_cast<SimTime>(
                              std::ceil((cost - level_) / spec_.rate * kPsPerSecond))};
}

std::string describe(const ResizePolicy& p) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, NoResize>) return "none";
            if constexpr (std::is_same_v<T, SplitTo>) return "split_to(" + std::to_string(v.bytes) + ")";
            if constexpr (std::is_same_v<T, PadTo>) return "pad_to(" + std::to_string(v.bytes) + ")";
            if constexpr (std::is_same_v<T, BatchTo>)
                return "batch_to(" + std::to_string(v.bytes) + ", " +
                       std::to_string(v.max_delay_ns) + "ns)";
        },
        p);
}

void validate(const ResizePolicy& p, const std::string& path) {
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (!std::is_same_v<T, NoResize>) {
                if (v.bytes < 1) throw ConfigError(path, "target bytes must be >= 1");
            }
            if constexpr (std::is_same_v<T, BatchTo>) {
                if (v.max_delay_ns < 0) throw ConfigError(path, "max_delay_ns must be >= 0");
            }
        },
        p);
}

Normalized normalize(std::uint64_t msg_bytes, const ResizePolicy& policy) {
    Normalized out;
    if (const auto* s = std::get_if<SplitTo>(&policy)) {
        for (std::uint64_t off = 0; off < msg_bytes; off += s->bytes)
            out.pieces.push_back(std::min(s->bytes, msg_bytes - off));
    } else if (const auto* p = std::get_if<PadTo>(&policy)) {
        out.pieces.push_back(std::max(msg_bytes, p->bytes));
        out.padding = out.pieces.back() - msg_bytes;
    } else {
        out.pieces.push_back(msg_bytes);
    }
    return out;
}

std::optional<Batcher::Batch> Batcher::add(std::uint64_t msg_bytes, SimTime now) {
    if (open_.members.empty()) opened_ = now;
    open_.members.push_back(msg_bytes);
    open_.bytes += msg_bytes;
    if (open_.bytes < policy_.bytes) return std::nullopt;
    Batch done = std::move(open_);
    done.emitted = now;
    open_ = Batch{};
    return done;
}

std::optional<SimTime> Batcher::deadline() const {
    if (open_.members.empty()) return std::nullopt;
    return opened_ + from_ns(policy_.max_delay_ns);
}

std::optional<Batcher::Batch> Batcher::flush(SimTime now) {
    auto d = deadline();
    if (!d || now < *d) return std::nullopt;
    Batch done = std::move(open_);
    done.emitted = now;
    open_ = Batch{};
    return done;
}

PoliceResult police_small(std::uint64_t msg_bytes, std::uint64_t floor,
                          const ResizePolicy& policy) {
    if (msg_bytes >= floor) return {PoliceVerdict::Pass, msg_bytes};
    if (const auto* p = std::get_if<PadTo>(&policy)) {
        const auto padded = std::max(msg_bytes, p->bytes);
        if (padded >= floor) return {PoliceVerdict::Reshape, padded};
    }
    if (const auto* b = std::get_if<BatchTo>(&policy); b && b->bytes >= floor)
        return {PoliceVerdict::Reshape, b->bytes};
    return {PoliceVerdict::Deny, msg_bytes};
}

void ShaperConfig::validate(const std::string& path) const {
    if (qp_count < 1) throw ConfigError(path + ".qp_count", "must be >= 1");
    accelshape::validate(resize, path + ".resize");
    if (min_bucket && max_bucket && min_bucket->metric == max_bucket->metric &&
        min_bucket->rate > max_bucket->rate)
        throw ConfigError(path + ".max_bucket", "max rate below min rate");
}

namespace {

bool reads_host(const FlowSpec& flow) {
    return flow.accelerator.has_value() || flow.direction == Direction::HostToAccel;
}

std::vector<std::uint64_t> distribution_sizes(const SizeDistribution& d) {
    if (const auto* f = std::get_if<FixedSize>(&d)) return {f->bytes};
    return std::get<UniformChoice>(d).sizes;
}

}  // namespace

ShaperConfig plan_shaping(const Sla& sla, const FlowSpec& flow, const AcceleratorProfile* profile,
                          const PcieConfig& cfg, const PlanOptions& options,
                          const ResourceBudget& budget, ResourceUse* use) {
    if (sla.tenant_id != flow.tenant_id)
        throw ConfigError("sla.tenant_id", "does not match flow tenant '" + flow.tenant_id + "'");
    sla.validate();

    ShaperConfig out;
    out.tenant_id = sla.tenant_id;
    out.qp_count = flow.qp_count;
    out.small_msg_floor = options.small_msg_floor;

    // Keep every wire message on one side of the MTU that governs this flow.
    const bool is_read = reads_host(flow);
    const std::uint64_t mtu = is_read ? cfg.max_read_req_size : cfg.max_payload_size;
    const auto lo = min_size(flow.size_dist);
    const auto hi = max_size(flow.size_dist);
    if (lo <= mtu && hi > mtu)
        out.resize = SplitTo{mtu};
    else if (lo < options.small_msg_floor)
        out.resize = PadTo{options.small_msg_floor};

    std::uint64_t piece_bytes = 0;
    std::uint64_t pieces = 0;
    std::uint64_t op_bytes = 0;
    const auto sizes = distribution_sizes(flow.size_dist);
    for (auto s : sizes) {
        const auto n = normalize(s, out.resize);
        for (auto p : n.pieces) piece_bytes += p;
        pieces += n.pieces.size();
        op_bytes += std::accumulate(n.pieces.begin(), n.pieces.end(), std::uint64_t{0});
    }
    out.wire_size = std::max<std::uint64_t>(1, (piece_bytes + pieces / 2) / pieces);
    const std::uint64_t per_op = std::max<std::uint64_t>(1, op_bytes / sizes.size());

    const MessageSize shaped(sla.metric == RateMetric::Iops ? per_op : out.wire_size,
                             ~std::uint64_t{0});
    const auto req = requirement_for(profile, sla, shaped);
    std::ostringstream detail;
    detail << "needs " << req.rate << " Gbps ingress at " << out.wire_size << "B wire size";
    if (!req.feasible) throw InfeasibleSla(sla.tenant_id, req.binding, detail.str());
    if (profile != nullptr &&
        req.rate > interpolate_throughput(*profile, MessageSize(out.wire_size, ~std::uint64_t{0})))
        throw InfeasibleSla(sla.tenant_id, BindingConstraint::Accelerator, detail.str());
    out.ingress_rate = req.rate;

    ResourceUse need;
    const MessageSize wire(out.wire_size, ~std::uint64_t{0});
    if (is_read) {
        need.down = req.rate / effective_peak(cfg, wire, DmaKind::Read);
    } else {
        need.up = req.rate / effective_peak(cfg, wire, DmaKind::Write);
    }
    if (profile != nullptr) {
        need.accel = req.rate / interpolate_throughput(*profile, wire);
        const auto out_bytes = egress_size(profile->egress, wire).bytes();
        const double egress_rate =
            req.rate * static_cast<double>(out_bytes) / static_cast<double>(out.wire_size);
        need.up = egress_rate /
                  effective_peak(cfg, MessageSize(out_bytes, ~std::uint64_t{0}), DmaKind::Write);
    }
    if (need.accel > budget.accel + 1e-12)
        throw InfeasibleSla(sla.tenant_id, BindingConstraint::Accelerator,
                            detail.str() + "; accelerator already committed");
    if (need.up > budget.up + 1e-12 || need.down > budget.down + 1e-12)
        throw InfeasibleSla(sla.tenant_id, BindingConstraint::Link,
                            detail.str() + "; exceeds remaining link goodput");
    if (use) *use = need;

    const double burst = options.burst_messages;
    if (sla.metric == RateMetric::Iops) {
        out.min_bucket = TokenBucketSpec{RateMetric::Iops, sla.min_rate, burst};
        if (sla.max_rate != kUnbounded)
            out.max_bucket = TokenBucketSpec{RateMetric::Iops, sla.max_rate, burst};
    } else {
        const double cap = burst * static_cast<double>(out.wire_size) * 8.0;
        out.min_bucket = TokenBucketSpec{RateMetric::Gbps, req.rate * 1e9, cap};
        if (sla.max_rate != kUnbounded)
            out.max_bucket = TokenBucketSpec{RateMetric::Gbps,
                                             req.rate * sla.max_rate / sla.min_rate * 1e9, cap};
    }
    return out;
}

std::vector<int> allocate_qps(std::span<const double> weights, int total) {
    const std::size_t n = weights.size();
    std::vector<int> out(n, 0);
    if (n == 0 || total <= 0) return out;
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<double> rem(n);
    int given = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double quota = sum > 0 ? total * weights[i] / sum : static_cast<double>(total) / n;
        out[i] = static_cast<int>(std::floor(quota));
        rem[i] = quota - out[i];
        given += out[i];
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; given < total; k = (k + 1) % n, ++given) ++out[order[k]];
    // Nobody is left without a queue if there are enough to go round.
    if (static_cast<std::size_t>(total) >= n) {
        for (std::size_t i = 0; i < n; ++i) {
            if (out[i] > 0) continue;
            auto donor = std::max_element(out.begin(), out.end());
            --*donor;
            out[i] = 1;
        }
    }
    return out;
}

bool AdmissionPlan::all_feasible() const {
    return std::all_of(tenants.begin(), tenants.end(),
                       [](const TenantPlan& t) { return t.feasible; });
}

AdmissionPlan plan_admission(std::span<const FlowSpec> flows, std::span<const Sla> slas,
                             std::span<const AcceleratorProfile> profiles, const PcieConfig& cfg,
                             int qp_pool, const PlanOptions& options) {
    AdmissionPlan plan;
    ResourceBudget link;
    std::map<std::string, double> accel_left;
    int requested_qps = 0;
    std::vector<double> weights;
    std::vector<std::size_t> admitted;

    for (std::size_t i = 0; i < slas.size(); ++i) {
        const auto& sla = slas[i];
        const auto path = "slas[" + std::to_string(i) + "]";
        auto flow = std::find_if(flows.begin(), flows.end(), [&](const FlowSpec& f) {
            return f.tenant_id == sla.tenant_id;
        });
        if (flow == flows.end())
            throw ConfigError(path + ".tenant_id", "no flow for tenant '" + sla.tenant_id + "'");
        const AcceleratorProfile* profile = nullptr;
        if (flow->accelerator) {
            auto p = std::find_if(profiles.begin(), profiles.end(), [&](const AcceleratorProfile& a) {
                return a.name == *flow->accelerator;
            });
            if (p == profiles.end())
                throw ConfigError(path, "unknown accelerator '" + *flow->accelerator + "'");
            profile = &*p;
        }
        TenantPlan tp;
        tp.tenant_id = sla.tenant_id;
        ResourceBudget budget = link;
        if (profile) budget.accel = accel_left.try_emplace(profile->name, 1.0).first->second;
        try {
            ResourceUse use;
            tp.config = plan_shaping(sla, *flow, profile, cfg, options, budget, &use);
            link.up -= use.up;
            link.down -= use.down;
            if (profile) accel_left[profile->name] -= use.accel;
            requested_qps += flow->qp_count;
            weights.push_back(tp.config->ingress_rate);
            admitted.push_back(plan.tenants.size());
        } catch (const InfeasibleSla& e) {
            tp.feasible = false;
            tp.binding = e.binding();
            tp.detail = e.what();
        }
        plan.tenants.push_back(std::move(tp));
    }

    const int pool = qp_pool > 0 ? qp_pool : requested_qps;
    const auto qps = allocate_qps(weights, pool);
    for (std::size_t k = 0; k < admitted.size(); ++k)
        plan.tenants[admitted[k]].config->qp_count = std::max(1, qps[k]);
    return plan;
}

void print_admission_report(std::ostream& os, const AdmissionPlan& plan) {
    os << std::left << std::setw(12) << "tenant" << std::setw(10) << "status" << std::setw(16)
       << "ingress_gbps" << std::setw(22) << "min_bucket" << std::setw(22) << "resize"
       << std::setw(6) << "qps" << "\n";
    for (const auto& t : plan.tenants) {
        os << std::left << std::setw(12) << t.tenant_id;
        if (!t.feasible) {
            os << std::setw(10) << "REJECT" << t.detail << "\n";
            continue;
        }
        const auto& c = *t.config;
        std::ostringstream bucket;
        if (c.min_bucket->metric == RateMetric::Gbps)
            bucket << std::setprecision(4) << c.min_bucket->rate / 1e9 << " Gbps";
        else
            bucket << std::setprecision(4) << c.min_bucket->rate << " ops/s";
        std::ostringstream rate;
        rate << std::setprecision(4) << c.ingress_rate;
        os << std::setw(10) << "admit" << std::setw(16) << rate.str() << std::setw(22)
           << bucket.str() << std::setw(22) << describe(c.resize) << std::setw(6) << c.qp_count
           << "\n";
    }
}

}  // namespace accelshape

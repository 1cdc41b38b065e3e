#include "accelshape/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <memory>

#include "accelshape/rng.hpp"
#include "accelshape/shaper_runtime.hpp"

namespace accelshape {

AdmissionPlan plan_for(const Scenario& s) {
    PlanOptions opts;
    opts.small_msg_floor = s.shaper.small_msg_floor;
    opts.burst_messages = s.shaper.burst_messages;
    return plan_admission(s.flows, s.slas, s.profiles, s.pcie, s.shaper.qp_pool, opts);
}

namespace {

const TenantPlan* find_plan(const AdmissionPlan& plan, const std::string& tenant) {
    for (const auto& t : plan.tenants)
        if (t.tenant_id == tenant) return &t;
    return nullptr;
}

bool reads_host(const FlowSpec& f) {
    return f.direction == Direction::HostToAccel || f.accelerator.has_value();
}

}  // namespace

std::vector<int> effective_qp_counts(const Scenario& s, const AdmissionPlan* plan) {
    std::vector<int> out;
    for (const auto& f : s.flows) {
        if (!plan) {
            out.push_back(f.qp_count);
            continue;
        }
        const auto* tp = find_plan(*plan, f.tenant_id);
        // Tenants without a guarantee share the device on a single queue.
        out.push_back(tp && tp->config ? tp->config->qp_count : 1);
    }
    return out;
}

std::vector<ShaperConfig> shaper_configs(const Scenario& s, const AdmissionPlan& plan) {
    std::vector<ShaperConfig> out;
    for (const auto& f : s.flows) {
        const auto* tp = find_plan(plan, f.tenant_id);
        if (tp && tp->config) {
            out.push_back(*tp->config);
            continue;
        }
        ShaperConfig be;
        be.tenant_id = f.tenant_id;
        be.small_msg_floor = s.shaper.small_msg_floor;
        const std::uint64_t mtu =
            reads_host(f) ? s.pcie.max_read_req_size : s.pcie.max_payload_size;
        if (min_size(f.size_dist) <= mtu && max_size(f.size_dist) > mtu) be.resize = SplitTo{mtu};
        be.qp_count = 1;
        out.push_back(be);
    }
    return out;
}

namespace {

Opcode opcode_for(const FlowSpec& f) {
    if (f.accelerator) return Opcode::AccelInvoke;
    return f.direction == Direction::HostToAccel ? Opcode::DmaRead : Opcode::DmaWrite;
}

struct Generator {
    const FlowSpec* flow = nullptr;
    int tenant = 0;
    Opcode opcode = Opcode::DmaWrite;
    int accel = -1;
    std::vector<int> qps;
    std::vector<std::size_t> outstanding;
    std::size_t cursor = 0;
    std::deque<std::uint64_t> pending;  // paced arrivals waiting for a free slot
    TenantRng rng;
    std::function<void()> arrive;

    Generator(std::uint64_t seed, const FlowSpec& f) : flow(&f), rng(seed, f.tenant_id) {}

    std::uint64_t draw() {
        if (const auto* fixed = std::get_if<FixedSize>(&flow->size_dist)) return fixed->bytes;
        const auto& sizes = std::get<UniformChoice>(flow->size_dist).sizes;
        return sizes[rng.below(sizes.size())];
    }
};

struct Tally {
    std::uint64_t ops = 0;
    std::uint64_t user_bytes = 0;
    std::uint64_t ingress_bytes = 0;
    std::uint64_t padding = 0;
    std::vector<std::int64_t> latencies;
    std::vector<std::uint64_t> series_bytes;
    std::vector<std::uint64_t> series_ops;
};

}  // namespace

RunResult run(const Scenario& s, const Observers* obs) {
    s.validate();
    EventQueue ev;
    std::unique_ptr<Fabric> fabric;
    if (!s.fabric_bypass) fabric = std::make_unique<Fabric>(ev, s.pcie, s.arbitration);
    if (fabric && obs && obs->up_tlp) fabric->set_trace(obs->up_tlp);
    Device dev(ev, fabric.get(), s.ring, s.protocol_mode, s.engine.free_at, s.engine.buffer_bytes);

    std::map<std::string, int> engine_of;
    for (const auto& f : s.flows) {
        if (f.accelerator && !engine_of.count(*f.accelerator))
            engine_of[*f.accelerator] = dev.add_engine(*s.profile(*f.accelerator));
    }

    RunResult result;
    result.scenario = s.name;
    std::unique_ptr<ShaperRuntime> shaper;
    std::vector<int> qp_counts;
    std::vector<ShaperConfig> configs;
    if (s.shaping_enabled) {
        result.plan = plan_for(s);
        for (const auto& t : result.plan->tenants) {
            if (!t.feasible) throw InfeasibleSla(t.tenant_id, t.binding, t.detail);
        }
        qp_counts = effective_qp_counts(s, &*result.plan);
        configs = shaper_configs(s, *result.plan);
        RuntimeOptions ro;
        ro.excess = s.shaper.excess;
        ro.excess_window_bytes = s.shaper.excess_window_bytes;
        ro.safety_rate = (s.shaper.safety_gbps > 0 ? s.shaper.safety_gbps : s.pcie.link_rate) * 1e9;
        shaper = std::make_unique<ShaperRuntime>(ev, dev, ro);
        dev.set_controller(shaper.get());
    } else {
        qp_counts = effective_qp_counts(s, nullptr);
    }

    const std::size_t n = s.flows.size();
    std::vector<Generator> gens;
    gens.reserve(n);
    std::vector<int> qp_owner;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& f = s.flows[i];
        Generator g(s.seed, f);
        g.tenant = static_cast<int>(i);
        g.opcode = opcode_for(f);
        if (f.accelerator) g.accel = engine_of.at(*f.accelerator);
        for (int q = 0; q < qp_counts[i]; ++q) {
            g.qps.push_back(dev.add_qp(g.tenant));
            qp_owner.push_back(g.tenant);
        }
        g.outstanding.assign(g.qps.size(), 0);
        gens.push_back(std::move(g));
        if (shaper) {
            shaper->configure(static_cast<int>(i), configs[i]);
            dev.set_policy(static_cast<int>(i), TenantPolicy{configs[i].resize,
                                                             configs[i].small_msg_floor});
        }
    }

    const SimTime end = from_ns(s.duration_ns);
    const auto warm = static_cast<SimTime>(std::llround(static_cast<double>(end) * s.warmup_fraction));
    const SimTime span = end - warm;
    const auto windows = static_cast<std::size_t>(s.series_windows);
    std::vector<Tally> tally(n);
    for (auto& t : tally) {
        t.series_bytes.assign(windows, 0);
        t.series_ops.assign(windows, 0);
    }

    bool stopped = false;
    std::uint64_t submitted_ops = 0, submitted_bytes = 0;
    std::uint64_t completed_ops = 0, completed_bytes = 0;

    auto submit_to = [&](Generator& g, std::size_t slot, std::uint64_t bytes) {
        Descriptor d;
        d.opcode = g.opcode;
        d.msg_bytes = bytes;
        d.accel = g.accel;
        d.dma_buffer = submitted_ops;
        if (dev.submit(g.qps[slot], d) != SubmitResult::Accepted)
            throw std::logic_error("generator overran its submission queue");
        ++g.outstanding[slot];
        ++submitted_ops;
        submitted_bytes += bytes;
    };
    // Paced flows: hand queued arrivals to any QP with room, round robin.
    auto drain_pending = [&](Generator& g) {
        while (!g.pending.empty()) {
            bool placed = false;
            for (std::size_t k = 0; k < g.qps.size(); ++k) {
                const std::size_t slot = (g.cursor + k) % g.qps.size();
                if (g.outstanding[slot] >= s.ring.sq_depth) continue;
                g.cursor = (slot + 1) % g.qps.size();
                submit_to(g, slot, g.pending.front());
                g.pending.pop_front();
                placed = true;
                break;
            }
            if (!placed) return;
        }
    };

    std::vector<std::size_t> qp_slot(qp_owner.size());
    for (auto& g : gens)
        for (std::size_t k = 0; k < g.qps.size(); ++k) qp_slot[static_cast<std::size_t>(g.qps[k])] = k;

    dev.on_completion([&](const CompletionInfo& c) {
        auto& g = gens[static_cast<std::size_t>(c.tenant)];
        const std::size_t slot = qp_slot[static_cast<std::size_t>(c.qp)];
        --g.outstanding[slot];
        ++completed_ops;
        completed_bytes += c.user_bytes;
        if (shaper) shaper->on_complete(c.tenant, shaper->wire_bytes(c.tenant, c.user_bytes));
        if (obs && obs->completion) obs->completion(c);

        const SimTime at = c.t.completed;
        if (!c.denied && at >= warm && at < end) {
            auto& t = tally[static_cast<std::size_t>(c.tenant)];
            const std::uint64_t user = g.opcode == Opcode::AccelInvoke ? c.egress_bytes : c.user_bytes;
            ++t.ops;
            t.user_bytes += user;
            t.ingress_bytes += c.user_bytes;
            t.padding += c.padding;
            t.latencies.push_back(c.t.completed - c.t.submitted);
            const auto w = static_cast<std::size_t>((at - warm) * static_cast<SimTime>(windows) / span);
            t.series_bytes[w] += user;
            ++t.series_ops[w];
        }
        if (stopped) return;
        if (g.flow->offered_rate == kUnbounded)
            submit_to(g, slot, g.draw());
        else
            drain_pending(g);
    });
    if (obs && obs->fetch) dev.on_fetch(obs->fetch);

    // Start every flow after its own jitter; the draw comes from the tenant's stream.
    for (auto& g : gens) {
        const SimTime start =
            s.start_jitter_ns > 0
                ? from_ns(static_cast<std::int64_t>(g.rng.below(static_cast<std::uint64_t>(s.start_jitter_ns) + 1)))
                : 0;
        Generator* gp = &g;
        if (g.flow->offered_rate == kUnbounded) {
            ev.schedule(start, [&, gp] {
                for (std::size_t k = 0; k < gp->qps.size(); ++k)
                    for (std::size_t i = 0; i < s.ring.sq_depth; ++i) submit_to(*gp, k, gp->draw());
            });
        } else {
            g.arrive = [&, gp] {
                if (stopped) return;
                const std::uint64_t bytes = gp->draw();
                gp->pending.push_back(bytes);
                drain_pending(*gp);
                const double gap_ps = static_cast<double>(bytes) * 8.0 / gp->flow->offered_rate * 1000.0;
                ev.schedule(ev.now() + std::max<SimTime>(1, static_cast<SimTime>(std::llround(gap_ps))),
                            [gp] { gp->arrive(); });
            };
            ev.schedule(start, [gp] { gp->arrive(); });
        }
    }

    ev.run_until(end);
    stopped = true;

    RunSummary& sum = result.summary;
    sum.events = ev.executed();
    sum.submitted_ops = submitted_ops;
    sum.completed_ops = completed_ops;
    sum.submitted_bytes = submitted_bytes;
    sum.completed_bytes = completed_bytes;
    sum.in_flight_bytes = submitted_bytes - completed_bytes;

    std::uint64_t queued = 0;
    for (std::size_t q = 0; q < qp_owner.size(); ++q) queued += dev.ring(static_cast<int>(q)).sq_occupancy();
    std::string violation;
    if (submitted_ops != completed_ops + queued + dev.in_pipeline())
        violation = "requests unaccounted for at end of run";

    const double seconds = static_cast<double>(span) / 1e12;
    const double window_seconds = seconds / static_cast<double>(windows);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& t = tally[i];
        TenantMetrics m;
        m.tenant_id = s.flows[i].tenant_id;
        m.gbps = static_cast<double>(t.user_bytes) * 8.0 / seconds / 1e9;
        m.ingress_gbps = static_cast<double>(t.ingress_bytes) * 8.0 / seconds / 1e9;
        m.iops = static_cast<double>(t.ops) / seconds;
        m.p50_ns = to_ns(percentile(t.latencies, 0.50));
        m.p99_ns = to_ns(percentile(t.latencies, 0.99));
        m.policed_ops = dev.policed(static_cast<int>(i));
        m.completed_ops = t.ops;
        m.padding_bytes = t.padding;
        for (std::size_t w = 0; w < windows; ++w) {
            SeriesPoint p;
            p.window_start_ns = static_cast<std::int64_t>(
                to_ns(warm + span * static_cast<SimTime>(w) / static_cast<SimTime>(windows)));
            p.gbps = static_cast<double>(t.series_bytes[w]) * 8.0 / window_seconds / 1e9;
            p.iops = static_cast<double>(t.series_ops[w]) / window_seconds;
            m.series.push_back(p);
        }
        result.tenants.push_back(std::move(m));
    }

    // Let everything in flight finish and check that nothing was lost.
    ev.run_until(end + std::max<SimTime>(end, from_ns(10'000'000)));
    if (violation.empty() && completed_ops != submitted_ops)
        violation = std::to_string(submitted_ops - completed_ops) + " requests never completed";
    if (violation.empty() && completed_bytes != submitted_bytes)
        violation = "completed bytes differ from submitted bytes";
    if (fabric) {
        const auto tot = fabric->totals();
        sum.fabric_submitted_bytes = tot.submitted_bytes;
        sum.fabric_delivered_bytes = tot.delivered_bytes;
        if (violation.empty() && tot.in_flight() != 0)
            violation = "fabric still holds " + std::to_string(tot.in_flight()) + " bytes";
    }
    for (std::size_t e = 0; e < dev.engine_count(); ++e) {
        sum.engine_enqueued_bytes += dev.engine(static_cast<int>(e)).enqueued_bytes();
        sum.engine_freed_bytes += dev.engine(static_cast<int>(e)).freed_bytes();
    }
    if (violation.empty() && sum.engine_enqueued_bytes != sum.engine_freed_bytes)
        violation = "engine buffer bytes not all released";
    if (violation.empty() && dev.requests_in_flight() != 0)
        violation = "device still tracks requests after drain";
    sum.conserved = violation.empty();
    sum.violation = violation;
    return result;
}

}  // namespace accelshape

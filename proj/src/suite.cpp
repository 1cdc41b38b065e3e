#include "accelshape/suite.hpp"

namespace accelshape {

namespace {

constexpr std::int64_t kDuration = 10'000'000;

FlowSpec flow(std::string tenant, Direction dir, SizeDistribution size, int qps = 1,
              std::optional<std::string> accel = std::nullopt) {
    FlowSpec f;
    f.tenant_id = std::move(tenant);
    f.direction = dir;
    f.size_dist = std::move(size);
    f.qp_count = qps;
    f.accelerator = std::move(accel);
    return f;
}

FlowSpec writes(std::string tenant, std::uint64_t bytes, int qps = 1) {
    return flow(std::move(tenant), Direction::AccelToHost, FixedSize{bytes}, qps);
}

FlowSpec reads(std::string tenant, std::uint64_t bytes, int qps = 1) {
    return flow(std::move(tenant), Direction::HostToAccel, FixedSize{bytes}, qps);
}

Scenario base(std::string name) {
    Scenario s;
    s.name = std::move(name);
    s.duration_ns = kDuration;
    return s;
}

/// Register-driven DMA characterization: descriptors and completions do not
/// share the data path.
Scenario dma_bench(std::string name) {
    Scenario s = base(std::move(name));
    s.ring.on_fabric = false;
    return s;
}

Sla gbps_sla(std::string tenant, double min_rate) {
    Sla s;
    s.tenant_id = std::move(tenant);
    s.min_rate = min_rate;
    return s;
}

BuiltinScenario profile_sweep() {
    BuiltinScenario b{"profile_sweep",
                      "Compute throughput across message sizes for AES (R=1), SHA (fixed 64B "
                      "output), compression (R<1) and a second AES implementation, engine only.",
                      {}};
    for (const auto& p : {aes_profile(), sha_profile(), compress_profile(), aes_lite_profile()}) {
        for (const auto& point : p.curve) {
            Scenario s = base("profile_sweep_" + p.name + "_" + std::to_string(point.size));
            s.duration_ns = 2'000'000;
            s.fabric_bypass = true;
            s.profiles = {p};
            s.flows = {flow("t0", Direction::HostToAccel, FixedSize{point.size}, 1, p.name)};
            b.cells.push_back(std::move(s));
        }
    }
    return b;
}

BuiltinScenario obs4_qp() {
    BuiltinScenario b{"obs4_qp",
                      "Two tenants with identical 4KB writes and unequal QP counts: throughput "
                      "splits in the ratio of their QP numbers.",
                      {}};
    for (auto [a, c] : {std::pair{2, 1}, {4, 2}, {8, 4}, {16, 4}}) {
        Scenario s = base("obs4_qp_" + std::to_string(a) + "v" + std::to_string(c));
        s.flows = {writes("A", 4096, a), writes("B", 4096, c)};
        b.cells.push_back(std::move(s));
    }
    return b;
}

BuiltinScenario obs5_mixture() {
    BuiltinScenario b{"obs5_mixture",
                      "A 4KB writer against a writer of another size on one QP each: the "
                      "throughput ratio moves non-linearly with the size mix, and larger "
                      "messages take more than their share.",
                      {}};
    for (std::uint64_t size : {256, 512, 1024, 2048, 4096, 8192}) {
        Scenario s = base("obs5_mixture_" + std::to_string(size));
        s.flows = {writes("A", 4096), writes("B", size)};
        b.cells.push_back(std::move(s));
    }
    return b;
}

BuiltinScenario obs6_direction() {
    BuiltinScenario b{"obs6_direction",
                      "Same-size tenants in the same and in opposite directions: same-direction "
                      "pairs split evenly, opposite pairs interfere only through read requests.",
                      {}};
    struct Cell {
        const char* name;
        Direction a, c;
    };
    for (auto cell : {Cell{"hta_hta", Direction::HostToAccel, Direction::HostToAccel},
                      Cell{"ath_ath", Direction::AccelToHost, Direction::AccelToHost},
                      Cell{"hta_ath", Direction::HostToAccel, Direction::AccelToHost}}) {
        Scenario s = base(std::string("obs6_direction_") + cell.name);
        s.flows = {flow("A", cell.a, FixedSize{4096}), flow("B", cell.c, FixedSize{4096})};
        b.cells.push_back(std::move(s));
    }
    return b;
}

BuiltinScenario obs7_metrics() {
    BuiltinScenario b{"obs7_metrics",
                      "Two read tenants: 512B+64B (both within the read request size) is IOPS "
                      "fair but Gbps unfair; 1KB+4KB (both above it) is Gbps fair but IOPS "
                      "unfair.",
                      {}};
    for (auto [a, c] : {std::pair<std::uint64_t, std::uint64_t>{512, 64}, {1024, 4096}}) {
        Scenario s = dma_bench("obs7_metrics_" + std::to_string(a) + "_" + std::to_string(c));
        s.flows = {reads("A", a), reads("B", c)};
        b.cells.push_back(std::move(s));
    }
    return b;
}

BuiltinScenario obs8_quadrants() {
    BuiltinScenario b{"obs8_quadrants",
                      "Read tenants on either side of a 256B MTU: fairness is predictable only "
                      "when both sizes sit on the same side.",
                      {}};
    for (auto [a, c] : {std::pair<std::uint64_t, std::uint64_t>{128, 128}, {128, 1024},
                        {1024, 128}, {1024, 1024}}) {
        Scenario s = dma_bench("obs8_quadrants_" + std::to_string(a) + "_" + std::to_string(c));
        s.pcie.max_payload_size = 256;
        s.pcie.max_read_req_size = 256;
        s.flows = {reads("A", a), reads("B", c)};
        b.cells.push_back(std::move(s));
    }
    return b;
}

BuiltinScenario obs9_duplex() {
    BuiltinScenario b{"obs9_duplex",
                      "A 4KB read tenant next to a write tenant of varying size: each direction "
                      "has its own channel, so both stay nearly constant.",
                      {}};
    for (std::uint64_t size : {256, 512, 1024, 2048, 4096}) {
        Scenario s = dma_bench("obs9_duplex_" + std::to_string(size));
        s.flows = {reads("R", 4096), writes("W", size)};
        b.cells.push_back(std::move(s));
    }
    return b;
}

BuiltinScenario obs10_tiny() {
    BuiltinScenario b{"obs10_tiny",
                      "4KB writes co-located with 64B, 32B or 16B writes: below a cache line the "
                      "small writes hold link credits and aggregate throughput collapses.",
                      {}};
    for (std::uint64_t size : {64, 32, 16}) {
        Scenario s = dma_bench("obs10_tiny_" + std::to_string(size));
        s.flows = {writes("A", 4096), writes("B", size)};
        b.cells.push_back(std::move(s));
    }
    return b;
}

BuiltinScenario shaping_ab() {
    BuiltinScenario b{"shaping_ab",
                      "A 20 Gbps SLA writer next to a 16-QP writer, unshaped and shaped: the "
                      "shaper restores the guaranteed rate.",
                      {}};
    for (bool on : {false, true}) {
        Scenario s = base(std::string("shaping_ab_") + (on ? "on" : "off"));
        s.flows = {writes("victim", 4096), writes("bully", 4096, 16)};
        s.slas = {gbps_sla("victim", 20)};
        s.shaping_enabled = on;
        s.protocol_mode = on ? ProtocolMode::Pull : ProtocolMode::Push;
        b.cells.push_back(std::move(s));
    }
    return b;
}

BuiltinScenario sla_adversarial() {
    BuiltinScenario b{"sla_adversarial",
                      "Three SLA tenants (writer, reader, AES user) against one adversary at a "
                      "time, unshaped and shaped: only shaping keeps every guarantee.",
                      {}};
    struct Adversary {
        const char* name;
        FlowSpec flow;
    };
    const std::vector<Adversary> adversaries = {
        {"qp_flood", writes("adv", 4096, 16)},
        {"tiny_writes", writes("adv", 16, 4)},
        {"mixed_reads", flow("adv", Direction::HostToAccel, UniformChoice{{64, 8192}}, 8)},
        {"accel_hog", flow("adv", Direction::HostToAccel, FixedSize{8192}, 8, "aes")},
    };
    for (const auto& adv : adversaries) {
        for (bool on : {false, true}) {
            Scenario s = base(std::string("sla_adversarial_") + adv.name + (on ? "_on" : "_off"));
            s.profiles = {aes_profile()};
            s.flows = {writes("v_write", 4096), reads("v_read", 2048),
                       flow("v_accel", Direction::HostToAccel, FixedSize{4096}, 1, "aes"),
                       adv.flow};
            s.slas = {gbps_sla("v_write", 15), gbps_sla("v_read", 10), gbps_sla("v_accel", 4)};
            s.shaping_enabled = on;
            s.protocol_mode = on ? ProtocolMode::Pull : ProtocolMode::Push;
            b.cells.push_back(std::move(s));
        }
    }
    return b;
}

}  // namespace

AcceleratorProfile aes_profile() {
    return {"aes", {{64, 2.5}, {256, 8}, {1024, 16}, {4096, 22}, {16384, 24}}, Proportional{1.0}, 0};
}

AcceleratorProfile aes_lite_profile() {
    return {"aes_lite", {{64, 1.2}, {256, 4}, {1024, 9}, {4096, 12}, {16384, 13}}, Proportional{1.0}, 0};
}

AcceleratorProfile sha_profile() {
    return {"sha", {{64, 1.5}, {256, 5}, {1024, 10}, {4096, 14}, {16384, 15}}, FixedOutput{64}, 0};
}

AcceleratorProfile compress_profile() {
    return {"compress", {{64, 0.8}, {256, 2.5}, {1024, 6}, {4096, 9}, {16384, 10}}, Proportional{0.5}, 0};
}

std::vector<BuiltinScenario> scenario_suite() {
    return {profile_sweep(), obs4_qp(),   obs5_mixture(), obs6_direction(), obs7_metrics(),
            obs8_quadrants(), obs9_duplex(), obs10_tiny(),  shaping_ab(),     sla_adversarial()};
}

std::optional<BuiltinScenario> find_builtin(const std::string& name) {
    for (auto& b : scenario_suite())
        if (b.name == name) return b;
    return std::nullopt;
}

}  // namespace accelshape

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "accelshape/simulator.hpp"

using namespace accelshape;

namespace {

FlowSpec writer(std::string id, std::uint64_t bytes, int qps = 1) {
    FlowSpec f;
    f.tenant_id = std::move(id);
    f.direction = Direction::AccelToHost;
    f.size_dist = FixedSize{bytes};
    f.qp_count = qps;
    return f;
}

FlowSpec reader(std::string id, std::uint64_t bytes, int qps = 1) {
    auto f = writer(std::move(id), bytes, qps);
    f.direction = Direction::HostToAccel;
    return f;
}

Scenario short_run(std::vector<FlowSpec> flows, std::int64_t ns = 1'000'000) {
    Scenario s;
    s.name = "prop";
    s.duration_ns = ns;
    s.flows = std::move(flows);
    return s;
}

double total_gbps(const RunResult& r) {
    double g = 0;
    for (const auto& t : r.tenants) g += t.gbps;
    return g;
}

}  // namespace

TEST_CASE("normalize conserves bytes for random sizes") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::uint64_t> size(1, 1 << 16);
    std::uniform_int_distribution<std::uint64_t> target(1, 8192);
    for (int i = 0; i < 2000; ++i) {
        const auto m = size(rng);
        const auto t = target(rng);

        const auto split = normalize(m, SplitTo{t});
        CHECK(std::accumulate(split.pieces.begin(), split.pieces.end(), std::uint64_t{0}) == m);
        CHECK(split.padding == 0);
        for (auto p : split.pieces) CHECK(p <= t);

        const auto pad = normalize(m, PadTo{t});
        REQUIRE(pad.pieces.size() == 1);
        CHECK(pad.pieces[0] == std::max(m, t));
        CHECK(pad.pieces[0] - pad.padding == m);
    }
}

TEST_CASE("bucket level stays in [0, capacity] and grants obey the envelope") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const double rate = std::uniform_real_distribution<double>(1e8, 5e10)(rng);
        const double cap = std::uniform_real_distribution<double>(1e3, 1e6)(rng);
        TokenBucket b({RateMetric::Gbps, rate, cap});
        std::uniform_real_distribution<double> cost(1, cap);
        std::vector<std::pair<SimTime, double>> grants;
        SimTime now = 0;
        for (int i = 0; i < 500; ++i) {
            now += std::uniform_int_distribution<SimTime>(0, from_ns(5000))(rng);
            const double c = cost(rng);
            const auto res = b.admit(c, now);
            if (auto g = std::get_if<Granted>(&res)) {
                grants.push_back({g->at, c});
            } else {
                const auto until = std::get<Deferred>(res).until;
                CHECK(until > now);
                now = until;
                const auto again = b.admit(c, now);
                REQUIRE(std::holds_alternative<Granted>(again));
                grants.push_back({now, c});
            }
            const double lv = b.level(now);
            CHECK(lv >= -1e-6);
            CHECK(lv <= cap + 1e-6);
        }
        // Any window [t0, t1]: granted <= rate * (t1 - t0) + capacity.
        for (std::size_t i = 0; i < grants.size(); i += 7) {
            double sum = 0;
            for (std::size_t j = i; j < grants.size(); ++j) {
                sum += grants[j].second;
                const double w = static_cast<double>(grants[j].first - grants[i].first) / 1e12;
                CHECK(sum <= rate * w + cap + 1e-6 * cap);
            }
        }
    }
}

TEST_CASE("completions on a QP retire in submission order") {
    auto s = short_run({writer("a", 4096, 3), reader("b", 2048, 2)}, 300'000);
    s.flows[0].size_dist = UniformChoice{{64, 300, 4096, 9000}};
    std::map<std::pair<int, int>, std::uint64_t> last;
    bool ordered = true;
    std::size_t seen = 0;
    Observers o;
    o.completion = [&](const CompletionInfo& c) {
        auto [it, fresh] = last.try_emplace({c.tenant, c.qp}, c.seq);
        if (!fresh) {
            if (c.seq <= it->second) ordered = false;
            it->second = c.seq;
        }
        ++seen;
    };
    const auto r = run(s, &o);
    CHECK(seen > 100);
    CHECK(ordered);
    CHECK(r.summary.conserved);
}

TEST_CASE("random scenarios conserve ops and bytes") {
    std::mt19937_64 rng(3);
    const std::vector<std::uint64_t> sizes{16, 64, 200, 256, 1024, 4096, 10000};
    for (int trial = 0; trial < 12; ++trial) {
        std::vector<FlowSpec> flows;
        const int n = std::uniform_int_distribution<int>(1, 4)(rng);
        for (int i = 0; i < n; ++i) {
            auto f = writer("t" + std::to_string(i), sizes[rng() % sizes.size()],
                            std::uniform_int_distribution<int>(1, 6)(rng));
            if (rng() % 2) f.direction = Direction::HostToAccel;
            if (rng() % 3 == 0) f.offered_rate = 5.0;
            flows.push_back(std::move(f));
        }
        auto s = short_run(std::move(flows), 200'000);
        s.seed = rng();
        if (rng() % 2) s.protocol_mode = ProtocolMode::Pull;
        if (rng() % 2) s.ring.on_fabric = false;
        const auto r = run(s);
        INFO("trial " << trial << ": " << r.summary.violation);
        CHECK(r.summary.conserved);
        CHECK(r.summary.submitted_ops >= r.summary.completed_ops);
    }
}

TEST_CASE("read throughput ignores traffic in the other direction") {
    auto alone = short_run({reader("r", 4096)});
    alone.ring.on_fabric = false;
    const double a = run(alone).tenant("r").gbps;
    for (std::uint64_t size : {256, 1024, 4096}) {
        auto both = alone;
        both.flows.push_back(writer("w", size));
        INFO("write size " << size);
        CHECK(run(both).tenant("r").gbps == doctest::Approx(a).epsilon(0.02));
    }
}

TEST_CASE("aggregate throughput falls as the small writer shrinks") {
    double prev = kUnbounded;
    for (std::uint64_t size : {256, 64, 32, 16, 8}) {
        auto s = short_run({writer("a", 4096), writer("b", size)});
        s.ring.on_fabric = false;
        const double g = total_gbps(run(s));
        INFO("size " << size);
        CHECK(g <= prev * 1.01);
        prev = g;
    }
}

TEST_CASE("pull mode without shaping matches push mode") {
    auto push = short_run({writer("a", 4096, 2), writer("b", 1024)});
    auto pull = push;
    pull.protocol_mode = ProtocolMode::Pull;
    const auto rp = run(push);
    const auto rq = run(pull);
    for (const auto* id : {"a", "b"})
        CHECK(rq.tenant(id).gbps == doctest::Approx(rp.tenant(id).gbps).epsilon(0.01));
}

TEST_CASE("shaping costs nothing without contention") {
    auto off = short_run({writer("a", 4096)});
    auto on = off;
    on.protocol_mode = ProtocolMode::Pull;
    on.shaping_enabled = true;
    Sla sla;
    sla.tenant_id = "a";
    sla.min_rate = 10;
    on.slas = {sla};
    CHECK(run(on).tenant("a").gbps == doctest::Approx(run(off).tenant("a").gbps).epsilon(0.01));
}

TEST_CASE("a max rate caps shaped throughput in every window") {
    auto s = short_run({writer("a", 4096), writer("b", 4096, 4)}, 2'000'000);
    s.protocol_mode = ProtocolMode::Pull;
    s.shaping_enabled = true;
    Sla sla;
    sla.tenant_id = "a";
    sla.min_rate = 8;
    sla.max_rate = 12;
    s.slas = {sla};
    const auto r = run(s);
    const auto& a = r.tenant("a");
    CHECK(a.gbps <= 12 * 1.02);
    CHECK(a.gbps >= 8 * 0.95);
    // Each window is 18us; the burst adds at most 4 messages on top.
    const double window_s = 0.9 * 2e-3 / 100;
    const double slack = 4 * 4096 * 8 / window_s / 1e9;
    for (const auto& p : a.series) CHECK(p.gbps <= 12 + slack);
}

TEST_CASE("steady-state series is stationary") {
    auto s = short_run({writer("a", 4096, 2), writer("b", 4096)}, 5'000'000);
    const auto r = run(s);
    for (const auto& t : r.tenants) {
        double mean = 0;
        for (const auto& p : t.series) mean += p.gbps;
        mean /= static_cast<double>(t.series.size());
        double var = 0;
        for (const auto& p : t.series) var += (p.gbps - mean) * (p.gbps - mean);
        const double cv = std::sqrt(var / static_cast<double>(t.series.size())) / mean;
        INFO(t.tenant_id);
        CHECK(cv < 0.05);
    }
}

TEST_CASE("QP shares follow QP counts for random counts") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 4; ++trial) {
        const int a = std::uniform_int_distribution<int>(1, 8)(rng);
        const int b = std::uniform_int_distribution<int>(1, 8)(rng);
        const auto r = run(short_run({writer("a", 4096, a), writer("b", 4096, b)}));
        INFO(a << " vs " << b);
        CHECK(ratio(r, "a", "b", MetricKind::Gbps) ==
              doctest::Approx(static_cast<double>(a) / b).epsilon(0.03));
    }
}

TEST_CASE("egress inversion recovers the ingress size") {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 2000; ++i) {
        const double r = std::uniform_real_distribution<double>(0.05, 8.0)(rng);
        const auto s = std::uniform_int_distribution<std::uint64_t>(64, 1 << 20)(rng);
        const auto out = egress_size(Proportional{r}, MessageSize(s)).bytes();
        CHECK(std::abs(static_cast<double>(out) / r - static_cast<double>(s)) <= 1.0 / r + 1.0);
    }
}

TEST_CASE("with ample credits a reader costs a writer only its read requests") {
    auto alone = short_run({writer("w", 4096)});
    alone.ring.on_fabric = false;
    alone.pcie.credit_headers = 4096;
    alone.pcie.credit_data_bytes = 1 << 24;
    auto both = alone;
    both.flows.push_back(reader("r", 4096));
    const auto r = run(both);
    const auto& c = alone.pcie;
    // Completion data rides the other channel; only the read requests share
    // the writer's channel.
    const double requests = r.tenant("r").gbps * c.read_request_bytes / c.max_read_req_size;
    const double expect = (c.link_rate - requests) * 256.0 / (256 + c.tlp_header_bytes);
    CHECK(run(alone).tenant("w").gbps == doctest::Approx(c.link_rate * 256.0 / 280).epsilon(0.01));
    CHECK(r.tenant("w").gbps == doctest::Approx(expect).epsilon(0.01));
}

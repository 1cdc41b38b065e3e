// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Expected values come from closed forms (effective_peak,
// interpolate_throughput, QP and size ratios), not from the simulator.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>

#include "accelshape/fabric.hpp"
#include "accelshape/simulator.hpp"
#include "accelshape/suite.hpp"

using namespace accelshape;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::printf("%s  %-28s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

bool within(double value, double expected, double rel) {
    return std::abs(value - expected) <= rel * std::abs(expected);
}

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct CellRun {
    RunResult result;
    double seconds = 0;
};

std::map<std::string, CellRun> runs;

const RunResult& get(const std::string& cell) { return runs.at(cell).result; }

double gbps_ratio(const std::string& cell, const char* a, const char* b) {
    return ratio(get(cell), a, b, MetricKind::Gbps);
}
double iops_ratio(const std::string& cell, const char* a, const char* b) {
    return ratio(get(cell), a, b, MetricKind::Iops);
}

void run_suite_twice() {
    bool ok = true;
    std::string detail;
    int cells = 0;
    for (const auto& b : scenario_suite()) {
        for (const auto& s : b.cells) {
            const auto t0 = std::chrono::steady_clock::now();
            auto first = run(s);
            const auto t1 = std::chrono::steady_clock::now();
            const auto second = run(s);
            ++cells;
            if (!first.summary.conserved) {
                ok = false;
                detail += " " + s.name + ": " + first.summary.violation;
            }
            if (csv_text(first) != csv_text(second) ||
                series_csv_text(first) != series_csv_text(second) ||
                first.summary.events != second.summary.events) {
                ok = false;
                detail += " " + s.name + ": not reproducible";
            }
            runs[s.name] = {std::move(first), std::chrono::duration<double>(t1 - t0).count()};
        }
    }
    report("conservation_determinism", ok, fmt("%d cells run twice", cells) + detail);
}

void qp_ratio_law() {
    bool ok = true;
    std::string detail;
    for (auto [a, b] : {std::pair{2, 1}, {4, 2}, {8, 4}, {16, 4}}) {
        const auto cell = "obs4_qp_" + std::to_string(a) + "v" + std::to_string(b);
        const double got = gbps_ratio(cell, "A", "B");
        const double want = static_cast<double>(a) / b;
        const double secs = runs.at(cell).seconds;
        ok = ok && within(got, want, 0.03) && secs < 60;
        detail += fmt(" %d:%d=%.3f(%.2fs)", a, b, got, secs);
    }
    report("qp_ratio_law", ok, detail);
}

void mtu_quadrants() {
    // Both at or below the 256B MTU.
    const double small_iops = iops_ratio("obs8_quadrants_128_128", "A", "B");
    const double small_gbps = gbps_ratio("obs8_quadrants_128_128", "A", "B");
    const double big_gbps = gbps_ratio("obs8_quadrants_1024_1024", "A", "B");
    const double big_iops = iops_ratio("obs8_quadrants_1024_1024", "A", "B");
    const bool mixed = get("obs8_quadrants_128_1024").summary.conserved &&
                       get("obs8_quadrants_1024_128").summary.conserved;
    // The built-in cells pair equal sizes, so the size ratios are also
    // probed with unequal pairs on the same side of the MTU.
    auto probe = [](std::uint64_t a, std::uint64_t b) {
        auto s = find_builtin("obs8_quadrants")->cells.front();
        s.name = "probe";
        s.duration_ns = 2'000'000;
        std::get<FixedSize>(s.flows[0].size_dist).bytes = a;
        std::get<FixedSize>(s.flows[1].size_dist).bytes = b;
        return run(s);
    };
    const auto lo = probe(64, 256);
    const auto hi = probe(512, 2048);
    const double lo_iops = ratio(lo, "A", "B", MetricKind::Iops);
    const double lo_gbps = ratio(lo, "B", "A", MetricKind::Gbps);
    const double hi_gbps = ratio(hi, "A", "B", MetricKind::Gbps);
    const double hi_iops = ratio(hi, "A", "B", MetricKind::Iops);
    const bool ok = within(small_iops, 1.0, 0.03) && within(small_gbps, 1.0, 0.05) &&
                    within(big_gbps, 1.0, 0.03) && within(big_iops, 1.0, 0.05) &&
                    within(lo_iops, 1.0, 0.03) && within(lo_gbps, 256.0 / 64, 0.05) &&
                    within(hi_gbps, 1.0, 0.03) && within(hi_iops, 2048.0 / 512, 0.05) &&
                    lo.summary.conserved && hi.summary.conserved && mixed;
    report("mtu_quadrants", ok,
           fmt("128+128 iops %.3f gbps %.3f; 1K+1K gbps %.3f iops %.3f; 64+256 iops %.3f gbps "
               "%.3f; 512+2K gbps %.3f iops %.3f; mixed conserved %d",
               small_iops, small_gbps, big_gbps, big_iops, lo_iops, lo_gbps, hi_gbps, hi_iops,
               mixed));
}

void ternary_fairness() {
    const double i1 = iops_ratio("obs7_metrics_512_64", "A", "B");
    const double g1 = gbps_ratio("obs7_metrics_512_64", "A", "B");
    const double g2 = gbps_ratio("obs7_metrics_1024_4096", "A", "B");
    const double i2 = iops_ratio("obs7_metrics_1024_4096", "A", "B");
    const bool ok = within(i1, 1.0, 0.03) && within(g1, 512.0 / 64, 0.10) && within(g2, 1.0, 0.03) &&
                    within(i2, 4096.0 / 1024, 0.10);
    report("ternary_fairness", ok,
           fmt("512+64 iops %.3f gbps %.3f; 1K+4K gbps %.3f iops %.3f", i1, g1, g2, i2));
}

void full_duplex() {
    std::vector<double> r, w;
    for (int size : {256, 512, 1024, 2048, 4096}) {
        const auto& res = get("obs9_duplex_" + std::to_string(size));
        r.push_back(res.tenant("R").gbps);
        w.push_back(res.tenant("W").gbps);
    }
    auto spread = [](const std::vector<double>& v) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        double mean = 0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        return (*hi - *lo) / mean;
    };
    const double sr = spread(r), sw = spread(w);
    report("full_duplex", sr < 0.02 && sw < 0.10,
           fmt("read spread %.2f%% write spread %.2f%%", 100 * sr, 100 * sw));
}

void tiny_collapse() {
    auto total = [](const std::string& cell) {
        double g = 0;
        for (const auto& t : get(cell).tenants) g += t.gbps;
        return g;
    };
    const double peak = effective_peak(default_pcie(), MessageSize(4096), DmaKind::Write);
    const double g64 = total("obs10_tiny_64");
    const double g16 = total("obs10_tiny_16");
    const double drop = 1.0 - g16 / g64;
    const bool ok = g64 >= 0.90 * peak && drop >= 0.50 && std::abs(drop - 0.85) <= 0.20;
    report("tiny_collapse", ok,
           fmt("64B %.2f Gbps = %.1f%% of %.2f; 16B %.2f Gbps, drop %.1f%% (target 85+-20)", g64,
               100 * g64 / peak, peak, g16, 100 * drop));
}

void shaping_isolation() {
    const auto adv = *find_builtin("sla_adversarial");
    bool shaped_ok = true, unshaped_violates = false;
    std::string worst;
    double worst_margin = kUnbounded;
    for (const auto& s : adv.cells) {
        const auto& r = get(s.name);
        for (const auto& sla : s.slas) {
            const double got = r.tenant(sla.tenant_id).gbps;
            const bool meets = got >= 0.95 * sla.min_rate;
            if (s.shaping_enabled) {
                shaped_ok = shaped_ok && meets;
                if (got / sla.min_rate < worst_margin) {
                    worst_margin = got / sla.min_rate;
                    worst = s.name + "/" + sla.tenant_id;
                }
            } else if (!meets) {
                unshaped_violates = true;
            }
        }
    }
    report("shaping_isolation", shaped_ok && unshaped_violates,
           fmt("worst shaped %.2fx min (", worst_margin) + worst +
               (unshaped_violates ? "); unshaped violates" : "); unshaped never violates"));
}

void sla_inversion() {
    bool ok = true;
    std::string detail;
    for (double r : {0.25, 0.5, 1.0, 2.0}) {
        Scenario s;
        s.name = "inversion";
        s.duration_ns = 5'000'000;
        s.protocol_mode = ProtocolMode::Pull;
        s.shaping_enabled = true;
        s.profiles = {{"flat", {{64, 40}, {16384, 40}}, Proportional{r}, 0}};
        FlowSpec f;
        f.tenant_id = "t";
        f.direction = Direction::HostToAccel;
        f.size_dist = FixedSize{4096};
        f.accelerator = "flat";
        FlowSpec other = f;
        other.tenant_id = "noise";
        other.qp_count = 4;
        s.flows = {f, other};
        Sla sla;
        sla.tenant_id = "t";
        sla.min_rate = 6;
        sla.max_rate = 6;
        s.slas = {sla};
        const auto res = run(s);
        const double egress = res.tenant("t").gbps;
        // Closed form: ingress X/r is what the shaper must admit.
        const double ingress = res.tenant("t").ingress_gbps;
        ok = ok && within(egress, sla.min_rate, 0.05) && within(ingress, sla.min_rate / r, 0.05);
        detail += fmt(" r=%.2f out %.2f in %.2f", r, egress, ingress);
    }
    report("sla_inversion", ok, detail);
}

void engine_fidelity() {
    bool ok = true;
    double worst = 0;
    std::string where;
    const auto sweep = *find_builtin("profile_sweep");
    for (const auto& s : sweep.cells) {
        const auto& p = s.profiles.front();
        const auto size = std::get<FixedSize>(s.flows.front().size_dist).bytes;
        const double want = interpolate_throughput(p, MessageSize(size));
        const double got = get(s.name).tenant("t0").ingress_gbps;
        const double err = std::abs(got - want) / want;
        ok = ok && err <= 0.02;
        if (err > worst) {
            worst = err;
            where = s.name;
        }
    }
    report("engine_fidelity", ok, fmt("worst error %.3f%% at ", 100 * worst) + where);
}

}  // namespace

int main() {
    try {
        run_suite_twice();
        qp_ratio_law();
        mtu_quadrants();
        ternary_fairness();
        full_duplex();
        tiny_collapse();
        shaping_isolation();
        sla_inversion();
        engine_fidelity();
    } catch (const std::exception& e) {
        std::printf("FAIL  %-28s %s\n", "exception", e.what());
        return 1;
    }
    std::printf("%s\n", failures == 0 ? "ALL PASS" : (std::to_string(failures) + " FAILED").c_str());
    return failures == 0 ? 0 : 1;
}

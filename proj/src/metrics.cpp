#include "accelshape/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace accelshape {

const TenantMetrics& RunResult::tenant(const std::string& id) const {
    for (const auto& t : tenants)
        if (t.tenant_id == id) return t;
    throw std::out_of_range("no tenant '" + id + "' in run " + scenario);
}

double ratio(const RunResult& r, const std::string& a, const std::string& b, MetricKind m) {
    const auto& ta = r.tenant(a);
    const auto& tb = r.tenant(b);
    const double va = m == MetricKind::Gbps ? ta.gbps : ta.iops;
    const double vb = m == MetricKind::Gbps ? tb.gbps : tb.iops;
    if (vb == 0) return std::numeric_limits<double>::infinity();
    return va / vb;
}

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string format_ratio(double v) {
    if (std::isinf(v)) return "inf";
    return fixed(v, 6);
}

std::int64_t percentile(std::vector<std::int64_t> sample, double q) {
    if (sample.empty()) return 0;
    const auto n = sample.size();
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    std::nth_element(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                     sample.end());
    return sample[rank - 1];
}

std::string csv_text(const RunResult& r) {
    std::string out = "scenario,tenant,gbps,iops,p50_ns,p99_ns,policed_ops\n";
    for (const auto& t : r.tenants) {
        out += r.scenario + "," + t.tenant_id + "," + fixed(t.gbps, 6) + "," + fixed(t.iops, 3) +
               "," + fixed(t.p50_ns, 3) + "," + fixed(t.p99_ns, 3) + "," +
               std::to_string(t.policed_ops) + "\n";
    }
    return out;
}

std::string series_csv_text(const RunResult& r) {
    std::string out = "window_start_ns,tenant,gbps,iops\n";
    if (r.tenants.empty()) return out;
    const auto windows = r.tenants.front().series.size();
    for (std::size_t w = 0; w < windows; ++w) {
        for (const auto& t : r.tenants) {
            const auto& p = t.series[w];
            out += std::to_string(p.window_start_ns) + "," + t.tenant_id + "," + fixed(p.gbps, 6) +
                   "," + fixed(p.iops, 3) + "\n";
        }
    }
    return out;
}

void emit_csv(const RunResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto write = [](const std::filesystem::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
        out << text;
        if (!out) throw std::runtime_error("write failed: " + p.string());
    };
    write(dir / (r.scenario + ".csv"), csv_text(r));
    write(dir / (r.scenario + ".series.csv"), series_csv_text(r));
}

}  // namespace accelshape

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "accelshape/model.hpp"
#include "accelshape/shaper.hpp"

namespace accelshape {

struct SeriesPoint {
    std::int64_t window_start_ns = 0;
    double gbps = 0;
    double iops = 0;
};

struct TenantMetrics {
    std::string tenant_id;
    /// User-level rate: accelerator output, or the bytes a DMA moved.
    double gbps = 0;
    double iops = 0;
    /// Rate of message bytes handed to the device.
    double ingress_gbps = 0;
    double p50_ns = 0;
    double p99_ns = 0;
    std::uint64_t policed_ops = 0;
    std::uint64_t completed_ops = 0;
    std::uint64_t padding_bytes = 0;
    std::vector<SeriesPoint> series;
};

struct RunSummary {
    std::uint64_t events = 0;
    std::uint64_t submitted_ops = 0;
    std::uint64_t completed_ops = 0;
    std::uint64_t submitted_bytes = 0;
    std::uint64_t completed_bytes = 0;
    /// Bytes still inside the system when the measured interval ended.
    std::uint64_t in_flight_bytes = 0;
    std::uint64_t fabric_submitted_bytes = 0;
    std::uint64_t fabric_delivered_bytes = 0;
    std::uint64_t engine_enqueued_bytes = 0;
    std::uint64_t engine_freed_bytes = 0;
    /// Every accounting identity held, both at the end of the measured
    /// interval and after draining.
    bool conserved = false;
    std::string violation;
};

struct RunResult {
    std::string scenario;
    std::vector<TenantMetrics> tenants;
    RunSummary summary;
    std::optional<AdmissionPlan> plan;

    const TenantMetrics& tenant(const std::string& id) const;
};

enum class MetricKind { Gbps, Iops };

/// a/b; infinity when b is zero.
double ratio(const RunResult& r, const std::string& a, const std::string& b, MetricKind m);
/// Formats a ratio, writing "inf" for the division-by-zero case.
std::string format_ratio(double v);

std::string csv_text(const RunResult& r);
std::string series_csv_text(const RunResult& r);
/// Writes <dir>/<name>.csv and <dir>/<name>.series.csv.
void emit_csv(const RunResult& r, const std::filesystem::path& dir);

/// Nearest-rank percentile of an unsorted sample, q in (0, 1].
std::int64_t percentile(std::vector<std::int64_t> sample, double q);

}  // namespace accelshape

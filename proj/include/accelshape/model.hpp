// Shared domain types for the accelerator I/O simulator and the pure
// functions over them: profile interpolation, egress sizing and the
// conversion of user-level SLAs into ingress rate requirements.
#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace accelshape {

/// Simulated time in picoseconds. Interfaces that talk about latency report
/// nanoseconds; picoseconds keep sub-nanosecond serialization exact.
using SimTime = std::int64_t;

constexpr SimTime kPsPerNs = 1000;
constexpr SimTime from_ns(std::int64_t ns) { return ns * kPsPerNs; }
constexpr double to_ns(SimTime t) { return static_cast<double>(t) / kPsPerNs; }

/// Gbps is bits per nanosecond.
using Gbps = double;

constexpr double kUnbounded = std::numeric_limits<double>::infinity();

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

constexpr std::uint64_t kDefaultMaxMessageBytes = std::uint64_t{1} << 22;

class MessageSize {
public:
    explicit MessageSize(std::uint64_t bytes, std::uint64_t cap = kDefaultMaxMessageBytes);
    std::uint64_t bytes() const { return bytes_; }
    std::uint64_t bits() const { return bytes_ * 8; }
    auto operator<=>(const MessageSize&) const = default;

private:
    std::uint64_t bytes_;
};

enum class Direction { HostToAccel, AccelToHost };
enum class RateMetric { Gbps, Iops };

std::string to_string(Direction d);
std::string to_string(RateMetric m);

/// Egress/ingress relation of an accelerator: R = egress/ingress, or a
/// size-independent output (hashes).
struct Proportional {
    double ratio;
};
struct FixedOutput {
    std::uint64_t bytes;
};
using EgressRule = std::variant<Proportional, FixedOutput>;

struct CurvePoint {
    std::uint64_t size;
    Gbps throughput;
};

struct AcceleratorProfile {
    std::string name;
    std::vector<CurvePoint> curve;
    EgressRule egress = Proportional{1.0};
    std::int64_t fixed_latency_ns = 500;

    /// Throws ConfigError if the curve is unsorted, has < 2 points or
    /// non-positive throughput.
    void validate(const std::string& path = "profile") const;
};

struct FixedSize {
    std::uint64_t bytes;
};
struct UniformChoice {
    std::vector<std::uint64_t> sizes;
};
using SizeDistribution = std::variant<FixedSize, UniformChoice>;

std::uint64_t min_size(const SizeDistribution& d);
std::uint64_t max_size(const SizeDistribution& d);
double mean_size(const SizeDistribution& d);

struct FlowSpec {
    std::string tenant_id;
    Direction direction = Direction::AccelToHost;
    SizeDistribution size_dist = FixedSize{4096};
    int qp_count = 1;
    Gbps offered_rate = kUnbounded;
    std::optional<std::string> accelerator;

    void validate(const std::string& path = "flow") const;
};

struct PcieConfig {
    Gbps link_rate = 63.0;
    std::uint32_t max_payload_size = 256;
    std::uint32_t max_read_req_size = 512;
    std::uint32_t tlp_header_bytes = 24;
    std::uint32_t read_request_bytes = 24;
    std::uint32_t credit_headers = 32;
    std::uint32_t credit_data_bytes = 16384;
    std::uint32_t completion_header_bytes = 24;
    // Receiver-side behaviour behind the credit pools.
    std::int64_t drain_latency_ns = 200;
    std::int64_t read_latency_ns = 500;
    std::uint32_t max_read_tags = 32;
    std::uint32_t cacheline_bytes = 64;
    std::int64_t partial_write_rmw_ns = 90;

    void validate(const std::string& path = "pcie") const;
};

/// Gen3 x8, the shipped default.
PcieConfig default_pcie();

enum class MeasuredAt { UserLevel, Ingress };

struct Sla {
    std::string tenant_id;
    RateMetric metric = RateMetric::Gbps;
    double min_rate = 0;
    double max_rate = kUnbounded;
    MeasuredAt measured_at = MeasuredAt::UserLevel;

    void validate(const std::string& path = "sla") const;
};

Gbps interpolate_throughput(const AcceleratorProfile& profile, MessageSize size);

MessageSize egress_size(const EgressRule& rule, MessageSize ingress);

enum class BindingConstraint { None, Link, Accelerator, Policy };
std::string to_string(BindingConstraint c);

struct IngressRequirement {
    Gbps rate = 0;
    bool feasible = true;
    BindingConstraint binding = BindingConstraint::None;
};

class InfeasibleSla : public std::runtime_error {
public:
    InfeasibleSla(std::string tenant, BindingConstraint binding, const std::string& detail);
    const std::string& tenant() const { return tenant_; }
    BindingConstraint binding() const { return binding_; }

private:
    std::string tenant_;
    BindingConstraint binding_;
};

/// Ingress data rate needed to meet `sla` when the shaper presents
/// `shaped_size` messages to the accelerator. A null profile means the flow
/// is plain DMA (identity relation, no compute bound).
IngressRequirement requirement_for(const AcceleratorProfile* profile, const Sla& sla,
                                   MessageSize shaped_size,
                                   Gbps ingress_budget = kUnbounded);

/// As requirement_for, but throws InfeasibleSla when the requirement cannot
/// be met.
IngressRequirement invert_sla(const AcceleratorProfile& profile, const Sla& sla,
                              MessageSize shaped_size, Gbps ingress_budget = kUnbounded);

// JSON forms. Unknown keys are ConfigErrors carrying the offending path.
AcceleratorProfile profile_from_json(const nlohmann::json& j, const std::string& path = "profile");
nlohmann::json to_json(const AcceleratorProfile& p);
AcceleratorProfile load_profile(const std::string& file);

}  // namespace accelshape

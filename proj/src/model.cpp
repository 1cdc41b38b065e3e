#include "accelshape/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "accelshape/json_util.hpp"

namespace accelshape {

MessageSize::MessageSize(std::uint64_t bytes, std::uint64_t cap) : bytes_(bytes) {
    if (bytes < 1 || bytes > cap)
        throw std::invalid_argument("message size " + std::to_string(bytes) +
                                    " outside [1, " + std::to_string(cap) + "]");
}

std::string to_string(Direction d) {
    return d == Direction::HostToAccel ? "HtA" : "AtH";
}

std::string to_string(RateMetric m) { return m == RateMetric::Gbps ? "gbps" : "iops"; }

std::string to_string(BindingConstraint c) {
    switch (c) {
        case BindingConstraint::None: return "none";
        case BindingConstraint::Link: return "link";
        case BindingConstraint::Accelerator: return "accelerator";
        case BindingConstraint::Policy: return "policy";
    }
    return "?";
}

InfeasibleSla::InfeasibleSla(std::string tenant, BindingConstraint binding,
                             const std::string& detail)
    : std::runtime_error("infeasible SLA for tenant '" + tenant + "' (" + to_string(binding) +
                         "): " + detail),
      tenant_(std::move(tenant)),
      binding_(binding) {}

void AcceleratorProfile::validate(const std::string& path) const {
    if (name.empty()) throw ConfigError(path + ".name", "must not be empty");
    if (curve.size() < 2) throw ConfigError(path + ".curve", "needs at least 2 points");
    for (std::size_t i = 0; i < curve.size(); ++i) {
        auto p = path + ".curve[" + std::to_string(i) + "]";
        if (curve[i].size < 1) throw ConfigError(p, "size must be >= 1");
        if (!(curve[i].throughput > 0)) throw ConfigError(p, "throughput must be > 0");
        if (i > 0 && curve[i].size <= curve[i - 1].size)
            throw ConfigError(p, "sizes must be strictly ascending");
    }
    if (const auto* p = std::get_if<Proportional>(&egress); p && !(p->ratio > 0))
        throw ConfigError(path + ".egress", "proportional ratio must be > 0");
    if (const auto* f = std::get_if<FixedOutput>(&egress); f && f->bytes < 1)
        throw ConfigError(path + ".egress", "fixed output must be >= 1 byte");
    if (fixed_latency_ns < 0) throw ConfigError(path + ".fixed_latency_ns", "must be >= 0");
}

std::uint64_t min_size(const SizeDistribution& d) {
    if (const auto* f = std::get_if<FixedSize>(&d)) return f->bytes;
    const auto& s = std::get<UniformChoice>(d).sizes;
    return *std::min_element(s.begin(), s.end());
}

std::uint64_t max_size(const SizeDistribution& d) {
    if (const auto* f = std::get_if<FixedSize>(&d)) return f->bytes;
    const auto& s = std::get<UniformChoice>(d).sizes;
    return *std::max_element(s.begin(), s.end());
}

double mean_size(const SizeDistribution& d) {
    if (const auto* f = std::get_if<FixedSize>(&d)) return static_cast<double>(f->bytes);
    const auto& s = std::get<UniformChoice>(d).sizes;
    return static_cast<double>(std::accumulate(s.begin(), s.end(), std::uint64_t{0})) /
           static_cast<double>(s.size());
}

void FlowSpec::validate(const std::string& path) const {
    if (tenant_id.empty()) throw ConfigError(path + ".tenant_id", "must not be empty");
    if (qp_count < 1) throw ConfigError(path + ".qp_count", "must be >= 1");
    if (!(offered_rate > 0)) throw ConfigError(path + ".offered_gbps", "must be > 0");
    auto check = [&](std::uint64_t b, const std::string& p) {
        if (b < 1 || b > kDefaultMaxMessageBytes)
            throw ConfigError(p, "message size out of [1, 4 MiB]");
    };
    if (const auto* f = std::get_if<FixedSize>(&size_dist)) {
        check(f->bytes, path + ".size.fixed");
    } else {
        const auto& s = std::get<UniformChoice>(size_dist).sizes;
        if (s.empty()) throw ConfigError(path + ".size.uniform", "must not be empty");
        for (std::size_t i = 0; i < s.size(); ++i)
            check(s[i], path + ".size.uniform[" + std::to_string(i) + "]");
    }
}

namespace {
bool pow2_in_range(std::uint32_t v) { return v >= 128 && v <= 4096 && (v & (v - 1)) == 0; }
}  // namespace

void PcieConfig::validate(const std::string& path) const {
    if (!(link_rate > 0)) throw ConfigError(path + ".link_rate_gbps", "must be > 0");
    if (!pow2_in_range(max_payload_size))
        throw ConfigError(path + ".max_payload_size", "must be a power of two in [128, 4096]");
    if (!pow2_in_range(max_read_req_size))
        throw ConfigError(path + ".max_read_req_size", "must be a power of two in [128, 4096]");
    auto pos = [&](std::uint64_t v, const char* key) {
        if (v < 1) throw ConfigError(path + "." + key, "must be >= 1");
    };
    pos(tlp_header_bytes, "tlp_header_bytes");
    pos(read_request_bytes, "read_request_bytes");
    pos(credit_headers, "credit_headers");
    pos(credit_data_bytes, "credit_data_bytes");
    pos(completion_header_bytes, "completion_header_bytes");
    pos(max_read_tags, "max_read_tags");
    pos(cacheline_bytes, "cacheline_bytes");
    if (credit_data_bytes < max_payload_size)
        throw ConfigError(path + ".credit_data_bytes", "must hold at least one max-size TLP");
    if (drain_latency_ns < 0) throw ConfigError(path + ".drain_latency_ns", "must be >= 0");
    if (read_latency_ns < 0) throw ConfigError(path + ".read_latency_ns", "must be >= 0");
    if (partial_write_rmw_ns < 0)
        throw ConfigError(path + ".partial_write_rmw_ns", "must be >= 0");
}

PcieConfig default_pcie() { return PcieConfig{}; }

void Sla::validate(const std::string& path) const {
    if (tenant_id.empty()) throw ConfigError(path + ".tenant_id", "must not be empty");
    if (!(min_rate > 0)) throw ConfigError(path + ".min_rate", "must be > 0");
    if (min_rate > max_rate) throw ConfigError(path + ".max_rate", "must be >= min_rate");
}

Gbps interpolate_throughput(const AcceleratorProfile& profile, MessageSize size) {
    const auto& c = profile.curve;
    const auto s = size.bytes();
    if (s <= c.front().size) return c.front().throughput;
    if (s >= c.back().size) return c.back().throughput;
    auto hi = std::lower_bound(c.begin(), c.end(), s,
                               [](const CurvePoint& p, std::uint64_t v) { return p.size < v; });
    if (hi->size == s) return hi->throughput;
    auto lo = hi - 1;
    const double x0 = std::log2(static_cast<double>(lo->size));
    const double x1 = std::log2(static_cast<double>(hi->size));
    const double t = (std::log2(static_cast<double>(s)) - x0) / (x1 - x0);
    return lo->throughput + t * (hi->throughput - lo->throughput);
}

MessageSize egress_size(const EgressRule& rule, MessageSize ingress) {
    if (const auto* f = std::get_if<FixedOutput>(&rule)) return MessageSize(f->bytes);
    const double r = std::get<Proportional>(rule).ratio;
    // round half up, floor at one byte
    const double scaled = std::floor(static_cast<double>(ingress.bytes()) * r + 0.5);
    return MessageSize(std::max<std::uint64_t>(1, static_cast<std::uint64_t>(scaled)),
                       std::numeric_limits<std::uint64_t>::max());
}

IngressRequirement requirement_for(const AcceleratorProfile* profile, const Sla& sla,
                                   MessageSize shaped_size, Gbps ingress_budget) {
    IngressRequirement req;
    if (sla.metric == RateMetric::Iops) {
        req.rate = sla.min_rate * static_cast<double>(shaped_size.bits()) / 1e9;
    } else if (sla.measured_at == MeasuredAt::Ingress || profile == nullptr) {
        req.rate = sla.min_rate;
    } else if (const auto* p = std::get_if<Proportional>(&profile->egress)) {
        req.rate = sla.min_rate / p->ratio;
    } else {
        // Fixed-size output: egress rate does not scale with what we feed in.
        req.rate = kUnbounded;
        req.feasible = false;
        req.binding = BindingConstraint::Policy;
        return req;
    }
    if (profile != nullptr && req.rate > interpolate_throughput(*profile, shaped_size)) {
        req.feasible = false;
        req.binding = BindingConstraint::Accelerator;
    } else if (req.rate > ingress_budget) {
        req.feasible = false;
        req.binding = BindingConstraint::Link;
    }
    return req;
}

IngressRequirement invert_sla(const AcceleratorProfile& profile, const Sla& sla,
                              MessageSize shaped_size, Gbps ingress_budget) {
    auto req = requirement_for(&profile, sla, shaped_size, ingress_budget);
    if (!req.feasible) {
        std::ostringstream os;
        os << "needs " << req.rate << " Gbps ingress at " << shaped_size.bytes() << "B";
        throw InfeasibleSla(sla.tenant_id, req.binding, os.str());
    }
    return req;
}

AcceleratorProfile profile_from_json(const nlohmann::json& j, const std::string& path) {
    using namespace json_util;
    reject_unknown(j, path, {"name", "curve", "egress", "fixed_latency_ns"});
    AcceleratorProfile p;
    p.name = get<std::string>(j, path, "name");
    const auto& curve = need(j, path, "curve");
    if (!curve.is_array()) throw ConfigError(path + ".curve", "expected an array");
    for (std::size_t i = 0; i < curve.size(); ++i) {
        auto cp = path + ".curve[" + std::to_string(i) + "]";
        if (!curve[i].is_array() || curve[i].size() != 2)
            throw ConfigError(cp, "expected [size, gbps]");
        p.curve.push_back({as<std::uint64_t>(curve[i][0], cp), as<double>(curve[i][1], cp)});
    }
    const auto& eg = need(j, path, "egress");
    reject_unknown(eg, path + ".egress", {"proportional", "fixed"});
    if (eg.size() != 1) throw ConfigError(path + ".egress", "exactly one of proportional|fixed");
    if (eg.contains("proportional"))
        p.egress = Proportional{get<double>(eg, path + ".egress", "proportional")};
    else
        p.egress = FixedOutput{get<std::uint64_t>(eg, path + ".egress", "fixed")};
    p.fixed_latency_ns = get_or<std::int64_t>(j, path, "fixed_latency_ns", 500);
    p.validate(path);
    return p;
}

nlohmann::json to_json(const AcceleratorProfile& p) {
    nlohmann::json j;
    j["name"] = p.name;
    j["curve"] = nlohmann::json::array();
    for (const auto& c : p.curve) j["curve"].push_back({c.size, c.throughput});
    if (const auto* r = std::get_if<Proportional>(&p.egress))
        j["egress"] = {{"proportional", r->ratio}};
    else
        j["egress"] = {{"fixed", std::get<FixedOutput>(p.egress).bytes}};
    j["fixed_latency_ns"] = p.fixed_latency_ns;
    return j;
}

AcceleratorProfile load_profile(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError(file, "cannot open profile");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(file, e.what());
    }
    return profile_from_json(j);
}

}  // namespace accelshape

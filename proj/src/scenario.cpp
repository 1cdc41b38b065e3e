#include "accelshape/scenario.hpp"

#include <fstream>
#include <set>

#include "accelshape/json_util.hpp"

namespace accelshape {

using namespace json_util;

namespace {

Direction parse_direction(const json& v, const std::string& path) {
    const auto s = as<std::string>(v, path);
    if (s == "HtA") return Direction::HostToAccel;
    if (s == "AtH") return Direction::AccelToHost;
    throw ConfigError(path, "expected HtA or AtH, got '" + s + "'");
}

const char* direction_name(Direction d) { return d == Direction::HostToAccel ? "HtA" : "AtH"; }

SizeDistribution parse_size(const json& v, const std::string& path) {
    reject_unknown(v, path, {"fixed", "uniform"});
    if (v.size() != 1) throw ConfigError(path, "exactly one of fixed|uniform");
    if (v.contains("fixed")) return FixedSize{get<std::uint64_t>(v, path, "fixed")};
    return UniformChoice{get<std::vector<std::uint64_t>>(v, path, "uniform")};
}

json size_json(const SizeDistribution& d) {
    if (const auto* f = std::get_if<FixedSize>(&d)) return {{"fixed", f->bytes}};
    return {{"uniform", std::get<UniformChoice>(d).sizes}};
}

FlowSpec parse_flow(const json& j, const std::string& path) {
    reject_unknown(j, path,
                   {"tenant_id", "direction", "size", "qp_count", "offered_gbps", "accelerator"});
    FlowSpec f;
    f.tenant_id = get<std::string>(j, path, "tenant_id");
    f.direction = parse_direction(need(j, path, "direction"), join(path, "direction"));
    f.size_dist = parse_size(need(j, path, "size"), join(path, "size"));
    f.qp_count = get_or<int>(j, path, "qp_count", 1);
    f.offered_rate = get_or<double>(j, path, "offered_gbps", kUnbounded);
    if (j.contains("accelerator") && !j["accelerator"].is_null())
        f.accelerator = get<std::string>(j, path, "accelerator");
    f.validate(path);
    return f;
}

Sla parse_sla(const json& j, const std::string& path) {
    reject_unknown(j, path, {"tenant_id", "metric", "min_rate", "max_rate", "measured_at"});
    Sla s;
    s.tenant_id = get<std::string>(j, path, "tenant_id");
    const auto metric = get_or<std::string>(j, path, "metric", "gbps");
    if (metric == "gbps")
        s.metric = RateMetric::Gbps;
    else if (metric == "iops")
        s.metric = RateMetric::Iops;
    else
        throw ConfigError(join(path, "metric"), "expected gbps or iops");
    s.min_rate = get<double>(j, path, "min_rate");
    s.max_rate = get_or<double>(j, path, "max_rate", kUnbounded);
    const auto at = get_or<std::string>(j, path, "measured_at", "user");
    if (at == "user")
        s.measured_at = MeasuredAt::UserLevel;
    else if (at == "ingress")
        s.measured_at = MeasuredAt::Ingress;
    else
        throw ConfigError(join(path, "measured_at"), "expected user or ingress");
    s.validate(path);
    return s;
}

PcieConfig parse_pcie(const json& j, const std::string& path) {
    reject_unknown(j, path,
                   {"link_rate_gbps", "max_payload_size", "max_read_req_size", "tlp_header_bytes",
                    "read_request_bytes", "credit_headers", "credit_data_bytes",
                    "completion_header_bytes", "drain_latency_ns", "read_latency_ns",
                    "max_read_tags", "cacheline_bytes", "partial_write_rmw_ns"});
    PcieConfig c = default_pcie();
    c.link_rate = get_or(j, path, "link_rate_gbps", c.link_rate);
    c.max_payload_size = get_or(j, path, "max_payload_size", c.max_payload_size);
    c.max_read_req_size = get_or(j, path, "max_read_req_size", c.max_read_req_size);
    c.tlp_header_bytes = get_or(j, path, "tlp_header_bytes", c.tlp_header_bytes);
    c.read_request_bytes = get_or(j, path, "read_request_bytes", c.read_request_bytes);
    c.credit_headers = get_or(j, path, "credit_headers", c.credit_headers);
    c.credit_data_bytes = get_or(j, path, "credit_data_bytes", c.credit_data_bytes);
    c.completion_header_bytes = get_or(j, path, "completion_header_bytes", c.completion_header_bytes);
    c.drain_latency_ns = get_or(j, path, "drain_latency_ns", c.drain_latency_ns);
    c.read_latency_ns = get_or(j, path, "read_latency_ns", c.read_latency_ns);
    c.max_read_tags = get_or(j, path, "max_read_tags", c.max_read_tags);
    c.cacheline_bytes = get_or(j, path, "cacheline_bytes", c.cacheline_bytes);
    c.partial_write_rmw_ns = get_or(j, path, "partial_write_rmw_ns", c.partial_write_rmw_ns);
    c.validate(path);
    return c;
}

json pcie_json(const PcieConfig& c) {
    return {{"link_rate_gbps", c.link_rate},
            {"max_payload_size", c.max_payload_size},
            {"max_read_req_size", c.max_read_req_size},
            {"tlp_header_bytes", c.tlp_header_bytes},
            {"read_request_bytes", c.read_request_bytes},
            {"credit_headers", c.credit_headers},
            {"credit_data_bytes", c.credit_data_bytes},
            {"completion_header_bytes", c.completion_header_bytes},
            {"drain_latency_ns", c.drain_latency_ns},
            {"read_latency_ns", c.read_latency_ns},
            {"max_read_tags", c.max_read_tags},
            {"cacheline_bytes", c.cacheline_bytes},
            {"partial_write_rmw_ns", c.partial_write_rmw_ns}};
}

RingConfig parse_ring(const json& j, const std::string& path) {
    reject_unknown(j, path,
                   {"sq_depth", "cq_depth", "fetch_batch", "descriptor_bytes", "completion_bytes",
                    "on_fabric", "doorbell_ns", "host_poll_ns", "descriptor_process_ns"});
    RingConfig r;
    r.sq_depth = get_or(j, path, "sq_depth", r.sq_depth);
    r.cq_depth = get_or(j, path, "cq_depth", r.cq_depth);
    r.fetch_batch = get_or(j, path, "fetch_batch", r.fetch_batch);
    r.descriptor_bytes = get_or(j, path, "descriptor_bytes", r.descriptor_bytes);
    r.completion_bytes = get_or(j, path, "completion_bytes", r.completion_bytes);
    r.on_fabric = get_or(j, path, "on_fabric", r.on_fabric);
    r.doorbell_ns = get_or(j, path, "doorbell_ns", r.doorbell_ns);
    r.host_poll_ns = get_or(j, path, "host_poll_ns", r.host_poll_ns);
    r.descriptor_process_ns = get_or(j, path, "descriptor_process_ns", r.descriptor_process_ns);
    r.validate(path);
    return r;
}

EngineOptions parse_engine(const json& j, const std::string& path) {
    reject_unknown(j, path, {"buffer_bytes", "free_at"});
    EngineOptions e;
    e.buffer_bytes = get_or(j, path, "buffer_bytes", e.buffer_bytes);
    const auto at = get_or<std::string>(j, path, "free_at", "service_start");
    if (at == "service_start")
        e.free_at = BufferRelease::AtServiceStart;
    else if (at == "completion")
        e.free_at = BufferRelease::AtCompletion;
    else
        throw ConfigError(join(path, "free_at"), "expected service_start or completion");
    if (e.buffer_bytes < 1) throw ConfigError(join(path, "buffer_bytes"), "must be >= 1");
    return e;
}

ShaperOptions parse_shaper(const json& j, const std::string& path) {
    reject_unknown(j, path,
                   {"small_msg_floor", "burst_messages", "excess", "excess_window_bytes",
                    "qp_pool", "safety_gbps"});
    ShaperOptions s;
    s.small_msg_floor = get_or(j, path, "small_msg_floor", s.small_msg_floor);
    s.burst_messages = get_or(j, path, "burst_messages", s.burst_messages);
    const auto ex = get_or<std::string>(j, path, "excess", "round_robin");
    if (ex == "round_robin")
        s.excess = true;
    else if (ex == "off")
        s.excess = false;
    else
        throw ConfigError(join(path, "excess"), "expected round_robin or off");
    s.excess_window_bytes = get_or(j, path, "excess_window_bytes", s.excess_window_bytes);
    s.qp_pool = get_or(j, path, "qp_pool", s.qp_pool);
    s.safety_gbps = get_or(j, path, "safety_gbps", s.safety_gbps);
    if (s.burst_messages < 1) throw ConfigError(join(path, "burst_messages"), "must be >= 1");
    if (s.excess_window_bytes < 1)
        throw ConfigError(join(path, "excess_window_bytes"), "must be >= 1");
    if (s.qp_pool < 0) throw ConfigError(join(path, "qp_pool"), "must be >= 0");
    if (s.safety_gbps < 0) throw ConfigError(join(path, "safety_gbps"), "must be >= 0");
    return s;
}

}  // namespace

const AcceleratorProfile* Scenario::profile(const std::string& n) const {
    for (const auto& p : profiles)
        if (p.name == n) return &p;
    return nullptr;
}

const FlowSpec* Scenario::flow(const std::string& tenant) const {
    for (const auto& f : flows)
        if (f.tenant_id == tenant) return &f;
    return nullptr;
}

void Scenario::validate() const {
    if (name.empty()) throw ConfigError("name", "must not be empty");
    if (duration_ns <= 0) throw ConfigError("duration_ns", "must be > 0");
    if (flows.empty()) throw ConfigError("flows", "at least one flow is required");
    pcie.validate("pcie");
    ring.validate("ring");
    if (series_windows < 1) throw ConfigError("series_windows", "must be >= 1");
    if (!(warmup_fraction >= 0 && warmup_fraction < 1))
        throw ConfigError("warmup_fraction", "must be in [0, 1)");
    if (start_jitter_ns < 0) throw ConfigError("start_jitter_ns", "must be >= 0");

    std::set<std::string> names;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        const auto path = "profiles[" + std::to_string(i) + "]";
        profiles[i].validate(path);
        if (!names.insert(profiles[i].name).second)
            throw ConfigError(path + ".name", "duplicate profile '" + profiles[i].name + "'");
    }
    std::set<std::string> tenants;
    for (std::size_t i = 0; i < flows.size(); ++i) {
        const auto path = "flows[" + std::to_string(i) + "]";
        const auto& f = flows[i];
        f.validate(path);
        if (!tenants.insert(f.tenant_id).second)
            throw ConfigError(path + ".tenant_id", "duplicate tenant '" + f.tenant_id + "'");
        if (f.accelerator) {
            if (!profile(*f.accelerator))
                throw ConfigError(path + ".accelerator", "unknown profile '" + *f.accelerator + "'");
            if (f.direction != Direction::HostToAccel)
                throw ConfigError(path + ".direction", "accelerator flows must be HtA");
        }
    }
    std::set<std::string> sla_tenants;
    for (std::size_t i = 0; i < slas.size(); ++i) {
        const auto path = "slas[" + std::to_string(i) + "]";
        slas[i].validate(path);
        if (!flow(slas[i].tenant_id))
            throw ConfigError(path + ".tenant_id", "no flow for tenant '" + slas[i].tenant_id + "'");
        if (!sla_tenants.insert(slas[i].tenant_id).second)
            throw ConfigError(path + ".tenant_id", "duplicate SLA for '" + slas[i].tenant_id + "'");
    }
    if (shaping_enabled && protocol_mode != ProtocolMode::Pull)
        throw ConfigError("shaping_enabled", "shaping needs protocol_mode pull");
}

Scenario scenario_from_json(const json& j) {
    const std::string root;
    reject_unknown(j, root,
                   {"name", "duration_ns", "seed", "pcie", "protocol_mode", "flows", "profiles",
                    "slas", "shaping_enabled", "arbitration", "fabric_bypass", "series_windows",
                    "warmup_fraction", "start_jitter_ns", "ring", "engine", "shaper"});
    Scenario s;
    s.name = get<std::string>(j, root, "name");
    s.duration_ns = get_or(j, root, "duration_ns", s.duration_ns);
    s.seed = get_or(j, root, "seed", s.seed);
    if (j.contains("pcie")) s.pcie = parse_pcie(j["pcie"], "pcie");
    const auto mode = get_or<std::string>(j, root, "protocol_mode", "push");
    if (mode == "push")
        s.protocol_mode = ProtocolMode::Push;
    else if (mode == "pull")
        s.protocol_mode = ProtocolMode::Pull;
    else
        throw ConfigError("protocol_mode", "expected push or pull");

    const auto& flows = need(j, root, "flows");
    if (!flows.is_array()) throw ConfigError("flows", "expected an array");
    for (std::size_t i = 0; i < flows.size(); ++i)
        s.flows.push_back(parse_flow(flows[i], "flows[" + std::to_string(i) + "]"));
    if (j.contains("profiles")) {
        if (!j["profiles"].is_array()) throw ConfigError("profiles", "expected an array");
        for (std::size_t i = 0; i < j["profiles"].size(); ++i)
            s.profiles.push_back(
                profile_from_json(j["profiles"][i], "profiles[" + std::to_string(i) + "]"));
    }
    if (j.contains("slas")) {
        if (!j["slas"].is_array()) throw ConfigError("slas", "expected an array");
        for (std::size_t i = 0; i < j["slas"].size(); ++i)
            s.slas.push_back(parse_sla(j["slas"][i], "slas[" + std::to_string(i) + "]"));
    }
    s.shaping_enabled = get_or(j, root, "shaping_enabled", false);
    const auto arb = get_or<std::string>(j, root, "arbitration", "per_tlp");
    if (arb == "per_tlp")
        s.arbitration = Arbitration::PerTlpRR;
    else if (arb == "per_message")
        s.arbitration = Arbitration::PerMessageRR;
    else
        throw ConfigError("arbitration", "expected per_tlp or per_message");
    s.fabric_bypass = get_or(j, root, "fabric_bypass", false);
    s.series_windows = get_or(j, root, "series_windows", s.series_windows);
    s.warmup_fraction = get_or(j, root, "warmup_fraction", s.warmup_fraction);
    s.start_jitter_ns = get_or(j, root, "start_jitter_ns", s.start_jitter_ns);
    if (j.contains("ring")) s.ring = parse_ring(j["ring"], "ring");
    if (j.contains("engine")) s.engine = parse_engine(j["engine"], "engine");
    if (j.contains("shaper")) s.shaper = parse_shaper(j["shaper"], "shaper");
    s.validate();
    return s;
}

json to_json(const Scenario& s) {
    json j;
    j["name"] = s.name;
    j["duration_ns"] = s.duration_ns;
    j["seed"] = s.seed;
    j["pcie"] = pcie_json(s.pcie);
    j["protocol_mode"] = s.protocol_mode == ProtocolMode::Push ? "push" : "pull";
    j["flows"] = json::array();
    for (const auto& f : s.flows) {
        json fj = {{"tenant_id", f.tenant_id},
                   {"direction", direction_name(f.direction)},
                   {"size", size_json(f.size_dist)},
                   {"qp_count", f.qp_count}};
        fj["offered_gbps"] = f.offered_rate == kUnbounded ? json(nullptr) : json(f.offered_rate);
        if (f.accelerator) fj["accelerator"] = *f.accelerator;
        j["flows"].push_back(fj);
    }
    j["profiles"] = json::array();
    for (const auto& p : s.profiles) j["profiles"].push_back(to_json(p));
    j["slas"] = json::array();
    for (const auto& sla : s.slas) {
        json sj = {{"tenant_id", sla.tenant_id},
                   {"metric", sla.metric == RateMetric::Gbps ? "gbps" : "iops"},
                   {"min_rate", sla.min_rate},
                   {"measured_at", sla.measured_at == MeasuredAt::UserLevel ? "user" : "ingress"}};
        sj["max_rate"] = sla.max_rate == kUnbounded ? json(nullptr) : json(sla.max_rate);
        j["slas"].push_back(sj);
    }
    j["shaping_enabled"] = s.shaping_enabled;
    j["arbitration"] = s.arbitration == Arbitration::PerTlpRR ? "per_tlp" : "per_message";
    j["fabric_bypass"] = s.fabric_bypass;
    j["series_windows"] = s.series_windows;
    j["warmup_fraction"] = s.warmup_fraction;
    j["start_jitter_ns"] = s.start_jitter_ns;
    const auto& r = s.ring;
    j["ring"] = {{"sq_depth", r.sq_depth},
                 {"cq_depth", r.cq_depth},
                 {"fetch_batch", r.fetch_batch},
                 {"descriptor_bytes", r.descriptor_bytes},
                 {"completion_bytes", r.completion_bytes},
                 {"on_fabric", r.on_fabric},
                 {"doorbell_ns", r.doorbell_ns},
                 {"host_poll_ns", r.host_poll_ns},
                 {"descriptor_process_ns", r.descriptor_process_ns}};
    j["engine"] = {{"buffer_bytes", s.engine.buffer_bytes},
                   {"free_at", s.engine.free_at == BufferRelease::AtServiceStart ? "service_start"
                                                                                 : "completion"}};
    j["shaper"] = {{"small_msg_floor", s.shaper.small_msg_floor},
                   {"burst_messages", s.shaper.burst_messages},
                   {"excess", s.shaper.excess ? "round_robin" : "off"},
                   {"excess_window_bytes", s.shaper.excess_window_bytes},
                   {"qp_pool", s.shaper.qp_pool},
                   {"safety_gbps", s.shaper.safety_gbps}};
    return j;
}

Scenario load_scenario(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError(file, "cannot open scenario file");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(file, std::string("parse error: ") + e.what());
    }
    return scenario_from_json(j);
}

}  // namespace accelshape

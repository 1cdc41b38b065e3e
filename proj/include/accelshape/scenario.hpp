// Scenario description and its JSON form.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "accelshape/device.hpp"
#include "accelshape/engine.hpp"
#include "accelshape/fabric.hpp"
#include "accelshape/model.hpp"
#include "accelshape/ring.hpp"
#include "accelshape/shaper.hpp"

namespace accelshape {

struct EngineOptions {
    std::uint64_t buffer_bytes = 262144;
    BufferRelease free_at = BufferRelease::AtServiceStart;
};

struct ShaperOptions {
    std::uint64_t small_msg_floor = 64;
    int burst_messages = 4;
    bool excess = true;
    std::uint64_t excess_window_bytes = 65536;
    /// QPs shared among SLA tenants; 0 means the sum they asked for.
    int qp_pool = 0;
    /// Cap on tenants without a max bucket; 0 means the link rate.
    Gbps safety_gbps = 0;
};

struct Scenario {
    std::string name = "scenario";
    std::int64_t duration_ns = 10'000'000;
    std::uint64_t seed = 1;
    PcieConfig pcie = default_pcie();
    ProtocolMode protocol_mode = ProtocolMode::Push;
    std::vector<FlowSpec> flows;
    std::vector<AcceleratorProfile> profiles;
    std::vector<Sla> slas;
    bool shaping_enabled = false;
    Arbitration arbitration = Arbitration::PerTlpRR;
    /// Skip the PCIe model entirely; DMA is instantaneous.
    bool fabric_bypass = false;
    int series_windows = 100;
    double warmup_fraction = 0.1;
    std::int64_t start_jitter_ns = 1000;
    RingConfig ring;
    EngineOptions engine;
    ShaperOptions shaper;

    /// Throws ConfigError with the offending field path.
    void validate() const;
    const AcceleratorProfile* profile(const std::string& name) const;
    const FlowSpec* flow(const std::string& tenant) const;
};

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Scenario& s);
Scenario load_scenario(const std::string& file);

}  // namespace accelshape

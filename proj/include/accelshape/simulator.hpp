// Runs a scenario: builds fabric, device, engines and shaper, drives each
// flow with a traffic generator and reduces completions to metrics.
#pragma once

#include <functional>

#include "accelshape/device.hpp"
#include "accelshape/fabric.hpp"
#include "accelshape/metrics.hpp"
#include "accelshape/scenario.hpp"

namespace accelshape {

/// Optional taps into a run, for tests and tracing. Tenant ids in the
/// callbacks are flow indices.
struct Observers {
    std::function<void(const CompletionInfo&)> completion;
    std::function<void(int qp, std::size_t descriptors, SimTime at)> fetch;
    std::function<void(const Tlp&, SimTime)> up_tlp;
};

/// Deterministic in (scenario, seed). Throws ConfigError for an invalid
/// scenario and InfeasibleSla when shaping cannot admit every SLA.
RunResult run(const Scenario& scenario, const Observers* observers = nullptr);

/// The QP count each flow receives once shaping has re-allocated queues.
std::vector<int> effective_qp_counts(const Scenario& scenario, const AdmissionPlan* plan);

/// Shaper parameters for every flow; best-effort flows get a policing-only
/// configuration.
std::vector<ShaperConfig> shaper_configs(const Scenario& scenario, const AdmissionPlan& plan);

AdmissionPlan plan_for(const Scenario& scenario);

}  // namespace accelshape

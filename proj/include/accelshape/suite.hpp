// Built-in experiments. Each one is a small family of scenario cells that
// together show a single contention phenomenon.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "accelshape/scenario.hpp"

namespace accelshape {

struct BuiltinScenario {
    std::string name;
    std::string description;
    std::vector<Scenario> cells;
};

std::vector<BuiltinScenario> scenario_suite();
std::optional<BuiltinScenario> find_builtin(const std::string& name);

/// Profiles shipped with the suite.
AcceleratorProfile aes_profile();
AcceleratorProfile aes_lite_profile();
AcceleratorProfile sha_profile();
AcceleratorProfile compress_profile();

}  // namespace accelshape

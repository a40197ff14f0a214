// JSON run configuration: the FusionConfig fields plus runtime knobs.
// Parsing is strict; unknown keys are rejected.
#pragma once

#include <cstdint>
#include <string>

#include "s4f/network.hpp"

namespace s4f {

struct RunConfig {
    FusionConfig net;
    std::size_t chunk = 64;
    std::uint64_t provider_seed = 0;
};

RunConfig run_config_from_json(const std::string& text);
RunConfig run_config_from_file(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace s4f

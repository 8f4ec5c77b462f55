#pragma once

#include <optional>

#include "tsc/network.hpp"
#include "tsc/optim.hpp"

namespace tsc {

// TSCM/1 container: a text header (format tag, network spec as JSON, slot
// manifest) followed by little-endian float64 arrays in manifest order.
// Round-trips are bit-exact.

struct LoadedModel {
    NetworkSpec spec;
    ParameterSet params;
    std::optional<OptimizerState> optimizer;
};

void save_model(const std::string& path, const NetworkSpec& spec, const ParameterSet& params,
                const OptimizerState* optimizer = nullptr);

LoadedModel load_model(const std::string& path);

}  // namespace tsc

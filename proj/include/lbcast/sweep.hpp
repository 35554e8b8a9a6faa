#pragma once

#include "lbcast/scenario.hpp"

#include <cstdint>
#include <vector>

namespace lbcast {

struct SweepEntry {
    std::uint64_t seed = 0;
    bool all_conditions = false;
    std::string failure; // first failed condition witness, empty when clean
};

// Independent runs over a seed range. The parallel path fans the loop out
// with OpenMP; the serial path is the reference and must produce identical
// entries. Each run is a pure function of its seed, so results are stored by
// index and order never depends on thread timing.
std::vector<SweepEntry> sweep_seeds(const Graph& g, const ScenarioConfig& sc, std::uint64_t first_seed,
                                    std::uint64_t last_seed, bool parallel);

} // namespace lbcast

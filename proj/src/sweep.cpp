#include "lbcast/sweep.hpp"

namespace lbcast {

namespace {

SweepEntry run_one(const Graph& g, const ScenarioConfig& sc, std::uint64_t seed)
{
    SweepEntry e;
    e.seed = seed;
    SimResult res = simulate_scenario(g, sc, seed);
    e.all_conditions = res.conditions.all_hold();
    if (!res.conditions.agreement.holds) {
        e.failure = "agreement: " + res.conditions.agreement.witness;
    } else if (!res.conditions.validity.holds) {
        e.failure = "validity: " + res.conditions.validity.witness;
    } else if (!res.conditions.termination.holds) {
        e.failure = "termination: " + res.conditions.termination.witness;
    }
    return e;
}

} // namespace

std::vector<SweepEntry> sweep_seeds(const Graph& g, const ScenarioConfig& sc, std::uint64_t first_seed,
                                    std::uint64_t last_seed, bool parallel)
{
    if (last_seed < first_seed) {
        throw std::invalid_argument("empty seed range");
    }
    const std::int64_t count = static_cast<std::int64_t>(last_seed - first_seed) + 1;
    std::vector<SweepEntry> out(count);
    if (parallel) {
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t i = 0; i < count; ++i) {
            out[i] = run_one(g, sc, first_seed + static_cast<std::uint64_t>(i));
        }
    } else {
        for (std::int64_t i = 0; i < count; ++i) {
            out[i] = run_one(g, sc, first_seed + static_cast<std::uint64_t>(i));
        }
    }
    return out;
}

} // namespace lbcast

#pragma once

#include "lbcast/protocols.hpp"

#include <string>
#include <vector>

namespace lbcast {

// Everything one run needs, serializable as flat key=value lines so runs
// diff cleanly and bundles stay reproducible.
struct ScenarioConfig {
    std::string graph_file;
    int f = 1;
    Fixed epsilon = Fixed::parse("0.01");
    Fixed lower = Fixed::from_int(0);
    Fixed upper = Fixed::from_int(1);
    std::string inputs_spec = "split"; // unanimous-L | unanimous-U | split | v0,v1,...
    NodeSet fault_set;
    std::string strategy = "extreme"; // crash | silent | extreme | random
    std::string victim = "approx";    // approx | naive | own-input | const:<v> | wait-all
    int rounds = 0;                   // 0 derives the round count from the config
    std::uint64_t seed = 1;
    std::int64_t max_steps = 200000;
    std::string out_dir = "out";
    int theorem = 0;
    bool mirror_auto = true;

    std::string serialize() const;
    static ScenarioConfig parse(const std::string& text);

    ProtocolConfig protocol_config(int n) const;
    std::vector<Fixed> resolve_inputs(int n) const;
    void validate(int n) const;
};

// Victim procedure for every node; the forge injects its own faults.
std::map<NodeId, BehaviorFactory> victim_behaviors(const Graph& g, const ScenarioConfig& sc);

// Victims plus the scenario's Byzantine strategy on the fault set.
std::map<NodeId, BehaviorFactory> scenario_behaviors(const Graph& g, const ScenarioConfig& sc);

struct SimResult {
    Trace trace;
    ConditionReport conditions;
    std::map<NodeId, Fixed> inputs;
};

SimResult simulate_scenario(const Graph& g, const ScenarioConfig& sc, std::uint64_t seed);

} // namespace lbcast

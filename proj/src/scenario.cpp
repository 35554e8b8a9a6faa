#include "lbcast/scenario.hpp"

#include <sstream>

namespace lbcast {

std::string ScenarioConfig::serialize() const
{
    std::ostringstream out;
    out << "graph=" << graph_file << "\n";
    out << "f=" << f << "\n";
    out << "epsilon=" << epsilon.str() << "\n";
    out << "lower=" << lower.str() << "\n";
    out << "upper=" << upper.str() << "\n";
    out << "inputs=" << inputs_spec << "\n";
    out << "faulty=";
    bool first = true;
    for (NodeId u : fault_set) {
        if (!first) out << ",";
        out << u;
        first = false;
    }
    out << "\n";
    out << "strategy=" << strategy << "\n";
    out << "victim=" << victim << "\n";
    out << "rounds=" << rounds << "\n";
    out << "seed=" << seed << "\n";
    out << "max_steps=" << max_steps << "\n";
    out << "theorem=" << theorem << "\n";
    out << "mirror_auto=" << (mirror_auto ? 1 : 0) << "\n";
    return out.str();
}

ScenarioConfig ScenarioConfig::parse(const std::string& text)
{
    ScenarioConfig sc;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("scenario line " + std::to_string(lineno) + ": missing '='");
        }
        std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        if (key == "graph") {
            sc.graph_file = value;
        } else if (key == "f") {
            sc.f = std::stoi(value);
        } else if (key == "epsilon") {
            sc.epsilon = Fixed::parse(value);
        } else if (key == "lower") {
            sc.lower = Fixed::parse(value);
        } else if (key == "upper") {
            sc.upper = Fixed::parse(value);
        } else if (key == "inputs") {
            sc.inputs_spec = value;
        } else if (key == "faulty") {
            sc.fault_set.clear();
            std::istringstream fs(value);
            std::string item;
            while (std::getline(fs, item, ',')) {
                if (!item.empty()) sc.fault_set.insert(std::stoi(item));
            }
        } else if (key == "strategy") {
            sc.strategy = value;
        } else if (key == "victim") {
            sc.victim = value;
        } else if (key == "rounds") {
            sc.rounds = std::stoi(value);
        } else if (key == "seed") {
            sc.seed = std::stoull(value);
        } else if (key == "max_steps") {
            sc.max_steps = std::stoll(value);
        } else if (key == "theorem") {
            sc.theorem = std::stoi(value);
        } else if (key == "mirror_auto") {
            sc.mirror_auto = value != "0";
        } else {
            throw std::invalid_argument("scenario line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    return sc;
}

ProtocolConfig ScenarioConfig::protocol_config(int n) const
{
    ProtocolConfig cfg;
    cfg.epsilon = epsilon;
    cfg.lower = lower;
    cfg.upper = upper;
    cfg.n = n;
    cfg.f = f;
    return cfg;
}

std::vector<Fixed> ScenarioConfig::resolve_inputs(int n) const
{
    std::vector<Fixed> out;
    if (inputs_spec == "unanimous-L") {
        out.assign(n, lower);
    } else if (inputs_spec == "unanimous-U") {
        out.assign(n, upper);
    } else if (inputs_spec == "split") {
        for (int i = 0; i < n; ++i) {
            out.push_back(i < n / 2 ? lower : upper);
        }
    } else {
        std::istringstream in(inputs_spec);
        std::string item;
        while (std::getline(in, item, ',')) {
            out.push_back(Fixed::parse(item));
        }
        if (static_cast<int>(out.size()) != n) {
            throw std::invalid_argument("inputs list has " + std::to_string(out.size()) + " values for " +
                                        std::to_string(n) + " nodes");
        }
    }
    return out;
}

void ScenarioConfig::validate(int n) const
{
    protocol_config(n).validate();
    if (static_cast<int>(fault_set.size()) > f) {
        throw std::invalid_argument("fault set of size " + std::to_string(fault_set.size()) +
                                    " exceeds the bound f=" + std::to_string(f));
    }
    for (NodeId u : fault_set) {
        if (u < 0 || u >= n) {
            throw std::invalid_argument("fault set contains unknown node " + std::to_string(u));
        }
    }
    for (Fixed v : resolve_inputs(n)) {
        if (v < lower || v > upper) {
            throw std::invalid_argument("input " + v.str() + " outside [" + lower.str() + ", " + upper.str() + "]");
        }
    }
    if (rounds < 0) {
        throw std::invalid_argument("rounds must be non-negative");
    }
}

std::map<NodeId, BehaviorFactory> victim_behaviors(const Graph& g, const ScenarioConfig& sc)
{
    const int n = g.node_count();
    ProtocolConfig cfg = sc.protocol_config(n);
    const int rounds = sc.rounds > 0 ? sc.rounds : cfg.round_count();
    std::map<NodeId, BehaviorFactory> out;
    for (NodeId u : g.nodes()) {
        if (sc.victim == "approx") {
            out[u] = approx_consensus_behavior(cfg, g, u);
        } else if (sc.victim == "naive") {
            out[u] = naive_behavior(cfg, g, u, rounds);
        } else if (sc.victim == "own-input") {
            out[u] = decide_input_behavior();
        } else if (sc.victim.rfind("const:", 0) == 0) {
            out[u] = decide_constant_behavior(Fixed::parse(sc.victim.substr(6)));
        } else if (sc.victim == "wait-all") {
            out[u] = wait_for_all_behavior(cfg, u, rounds);
        } else {
            throw std::invalid_argument("unknown victim '" + sc.victim + "'");
        }
    }
    return out;
}

std::map<NodeId, BehaviorFactory> scenario_behaviors(const Graph& g, const ScenarioConfig& sc)
{
    ProtocolConfig cfg = sc.protocol_config(g.node_count());
    auto out = victim_behaviors(g, sc);
    for (NodeId u : sc.fault_set) {
        if (sc.strategy == "crash" || sc.strategy == "silent") {
            out[u] = byzantine_silent();
        } else if (sc.strategy == "extreme") {
            out[u] = byzantine_extreme(cfg, u, Fixed::from_int(1000));
        } else if (sc.strategy == "random") {
            out[u] = byzantine_random_in_range(cfg, u, sc.seed);
        } else {
            throw std::invalid_argument("unknown strategy '" + sc.strategy + "'");
        }
    }
    return out;
}

SimResult simulate_scenario(const Graph& g, const ScenarioConfig& sc, std::uint64_t seed)
{
    const int n = g.node_count();
    sc.validate(n);
    auto behaviors = scenario_behaviors(g, sc);
    auto inputs = sc.resolve_inputs(n);

    Topology topo = Topology::from_graph(g);
    std::map<CopyId, BehaviorFactory> cbehaviors;
    std::map<CopyId, Fixed> cinputs;
    std::map<CopyId, StartMode> modes;
    SimResult res;
    for (NodeId u : g.nodes()) {
        cbehaviors[sole(u)] = behaviors.at(u);
        cinputs[sole(u)] = inputs[u];
        modes[sole(u)] = StartMode::normal();
        res.inputs[u] = inputs[u];
    }
    res.trace = run(topo, cbehaviors, cinputs, modes, {seed, sc.max_steps});
    res.conditions = check_conditions(res.trace, sc.fault_set, res.inputs, sc.epsilon);
    return res;
}

} // namespace lbcast

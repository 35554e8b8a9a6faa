#pragma once

#include "lbcast/graph.hpp"
#include "lbcast/sim.hpp"
#include "lbcast/wire.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace lbcast {

struct ProtocolConfig {
    Fixed epsilon;
    Fixed lower;
    Fixed upper;
    int n = 0;
    int f = 0;

    void validate() const;

    // Rounds to push the non-faulty spread below epsilon at one halving per
    // round, with one round of margin for fixed-point rounding.
    int round_count() const;
};

// Value dissemination for non-complete networks: every (origin, round,
// value) floods with its accumulated node path, and a receiver accepts once
// the origin's own link delivered it or f+1 internally vertex-disjoint paths
// carried identical values. With connectivity >= 2f+1 every accepted value
// of a non-faulty origin is its real one, and acceptance always happens.
class RelayLayer {
  public:
    RelayLayer(const Graph& g, int f, NodeId self);

    struct Accepted {
        NodeId origin;
        int round;
        Fixed value;
    };

    struct Incoming {
        std::vector<Accepted> newly_accepted;
        std::vector<Bytes> forwards;
    };

    // The origin's own broadcast for a round value.
    Bytes origin_payload(int round, Fixed value) const;

    // Feed one received message; sender is the authenticated link peer.
    Incoming on_message(NodeId sender, const Msg& m);

    bool has_accepted(NodeId origin, int round) const;
    std::optional<Fixed> accepted_value(NodeId origin, int round) const;

  private:
    bool disjoint_family_exists(const std::vector<std::set<NodeId>>& interiors, int need) const;

    const Graph& graph_;
    int f_;
    NodeId self_;
    int n_;
    std::map<std::pair<NodeId, int>, Fixed> accepted_;
    // (origin, round, value units) -> relay path interiors seen so far
    std::map<std::tuple<NodeId, int, std::int64_t>, std::vector<std::set<NodeId>>> candidates_;
    std::set<Bytes> seen_;
    std::set<Bytes> forwarded_;
};

// The possibility-side protocol: per asynchronous round every node
// disseminates its current value, gathers accepted round values from at
// least n-f origins, discards the f lowest and f highest and moves to the
// midpoint of what remains. On complete graphs a witness exchange (tag 3)
// makes any two nodes' gathered multisets overlap enough that the spread
// provably halves every round; on sparse feasible graphs the plain n-f
// collection is used and values travel through the relay layer.
// Construction requires check_feasibility to pass.
BehaviorFactory approx_consensus_behavior(const ProtocolConfig& cfg, const Graph& g, NodeId self);

// Deliberately fragile victim: floods round values, trusts any relayed
// claim about any origin, waits for n-f values per round and averages them.
BehaviorFactory naive_behavior(const ProtocolConfig& cfg, const Graph& g, NodeId self, int rounds);

// Emits nothing, ever.
BehaviorFactory crash_behavior();

// Broadcasts the next scripted payload on each callback, regardless of
// received content; halts once the script is exhausted.
BehaviorFactory replay_behavior(std::vector<Bytes> script);

// Decides its own input immediately and halts.
BehaviorFactory decide_input_behavior();

// Decides a fixed value immediately and halts.
BehaviorFactory decide_constant_behavior(Fixed value);

// Floods like the naive victim but waits for all n origins every round, so a
// single crash stalls it forever.
BehaviorFactory wait_for_all_behavior(const ProtocolConfig& cfg, NodeId self, int rounds);

// Byzantine strategy library. Local broadcast already forces consistency
// towards all neighbors, so strategies are plain streams.
BehaviorFactory byzantine_extreme(const ProtocolConfig& cfg, NodeId self, Fixed value);
BehaviorFactory byzantine_random_in_range(const ProtocolConfig& cfg, NodeId self, std::uint64_t seed);
BehaviorFactory byzantine_silent();

// ---------------------------------------------------------------------------

struct ConditionCheck {
    bool holds = true;
    std::string witness; // filled when violated
};

struct ConditionReport {
    ConditionCheck agreement;
    ConditionCheck validity;
    ConditionCheck termination;

    bool all_hold() const { return agreement.holds && validity.holds && termination.holds; }
};

// Trace-level checker for the three problem conditions, judged over the
// non-faulty nodes only.
ConditionReport check_conditions(const Trace& trace, const NodeSet& faulty,
                                 const std::map<NodeId, Fixed>& inputs, Fixed epsilon);

// Decisions of non-faulty nodes found in a trace (first decide per node).
std::map<NodeId, Fixed> decisions_of(const Trace& trace, const NodeSet& faulty);

// Own round values broadcast by non-faulty nodes, per round; feeds the
// round-halving check.
std::map<int, std::vector<Fixed>> round_values_by_round(const Trace& trace, const NodeSet& faulty);

} // namespace lbcast

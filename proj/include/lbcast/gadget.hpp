#pragma once

#include "lbcast/graph.hpp"
#include "lbcast/protocols.hpp"
#include "lbcast/sim.hpp"

#include <map>
#include <string>
#include <vector>

namespace lbcast {

// The simulation network: copies of the original nodes wired so that every
// copy of u hears at most one copy of each neighbor of u, with the inputs
// and start modes of the modeled execution attached.
struct GadgetGraph {
    Topology topology;
    std::map<CopyId, Fixed> inputs;
    std::map<CopyId, StartMode> start_modes;

    // provenance
    Graph source;
    int theorem = 0;
    bool mirror = false;
    ThreePartition three;
    CutPartition cut;

    std::string serialize() const;
};

// Node-count construction: one copy per node of A and B, a crashed and a
// slow copy per node of C. Requires a complete source graph. The slow
// copies start at `delta`; `mirror` flips their input to L.
GadgetGraph build_theorem1_gadget(const Graph& g, const ThreePartition& p, const ProtocolConfig& cfg,
                                  std::int64_t delta, bool mirror = false);

// Connectivity construction: low/high copies of A and B, low/high/crashed
// copies of the cut half C1, single copies of C2, edges per the eight case
// rules with C2's cross links directed.
GadgetGraph build_theorem2_gadget(const Graph& g, const CutPartition& p, const ProtocolConfig& cfg,
                                  std::int64_t delta);

// Structural audit: every copy of u must hear at most one copy of each
// neighbor v, every gadget edge must project onto a source edge, and copies
// of one node are never adjacent. Empty result means the gadget is sound.
std::vector<std::string> validate_gadget(const GadgetGraph& gg);

// Every copy of u runs a fresh instance of u's procedure.
std::map<CopyId, BehaviorFactory> lift_behaviors(const GadgetGraph& gg,
                                                 const std::map<NodeId, BehaviorFactory>& algo);

void validate_three_partition(const Graph& g, const ThreePartition& p, int f);
void validate_cut_partition(const Graph& g, const CutPartition& p, int f);

// The exported gadget text carries everything a rerun or audit needs except
// provenance: copies, both edge kinds, inputs and start modes.
struct GadgetText {
    Topology topology;
    std::map<CopyId, Fixed> inputs;
    std::map<CopyId, StartMode> start_modes;
};

GadgetText parse_gadget_text(const std::string& text);

} // namespace lbcast

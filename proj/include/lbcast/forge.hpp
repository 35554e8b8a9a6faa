#pragma once

#include "lbcast/gadget.hpp"
#include "lbcast/graph.hpp"
#include "lbcast/protocols.hpp"
#include "lbcast/sim.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lbcast {

enum class FaultKind : std::uint8_t { Crash, Replay };

std::string fault_kind_name(FaultKind k);

struct ExecutionSpec {
    std::string name; // E1, E2, E3
    NodeSet faulty_set;
    FaultKind fault_kind = FaultKind::Crash;
    std::map<NodeId, Fixed> inputs;    // all nodes; faulty entries are nominal
    std::map<NodeId, CopyId> view_map; // non-faulty node -> modeling copy
};

enum class VerdictKind : std::uint8_t {
    ViolatedValidity,
    ViolatedAgreement,
    VictimDidNotTerminate,
    VictimSurvived,
};

std::string verdict_kind_name(VerdictKind k);
VerdictKind verdict_kind_from_name(const std::string& name);

struct VerdictWitness {
    std::string execution;
    NodeId node = 0;
    std::optional<Fixed> output;
    std::string note;
};

struct Verdict {
    VerdictKind kind = VerdictKind::VictimSurvived;
    std::string detail;
    std::vector<VerdictWitness> witnesses;
};

struct CertEntry {
    std::string execution;
    NodeId node = 0;
    CopyId copy;
    bool ok = true;
    std::string divergence;
};

struct ForgeReport {
    int theorem = 0;
    bool mirror = false;
    std::uint64_t seed = 0;
    std::int64_t max_steps = 0;
    std::int64_t delta = -1;
    ProtocolConfig cfg;
    Graph graph; // the graph the forge ran on (completed for theorem 1)
    bool graph_completed = false;
    bool gadget_built = false;
    GadgetGraph gadget;
    std::vector<ExecutionSpec> executions;
    // keyed by lowercase trace name: e1, gadget, e2, e3
    std::map<std::string, Trace> traces;
    std::vector<CertEntry> certificates;
    // actual decisions observed per execution (missing = never decided)
    std::map<std::string, std::map<NodeId, Fixed>> outputs;
    std::vector<std::string> notes;
    Verdict verdict;
    std::string scenario_text; // key=value record written into the bundle
};

struct DeltaResult {
    bool terminated = false;
    std::int64_t delta = -1;
    Trace trace;
};

// Runs the crash-fault execution directly on g: crash_set nodes are silent
// from the start, everyone else runs the victim. delta is the step of the
// last halt when every live node terminated in budget.
DeltaResult measure_delta(const Graph& g, const NodeSet& crash_set, const std::map<NodeId, Fixed>& inputs,
                          const std::map<NodeId, BehaviorFactory>& victim, std::uint64_t seed,
                          std::int64_t max_steps);

// Ordered send payloads of each designated copy, keyed by original node.
std::map<NodeId, std::vector<Bytes>> run_script_extraction(const Trace& gadget_trace,
                                                           const std::set<CopyId>& copies);

struct ViewComparison {
    bool ok = true;
    std::string divergence;
};

// Sequence equality of two local views (input, received messages by original
// sender, decide/halt), cut at the step horizon when given.
ViewComparison check_indistinguishable(const LocalView& a, const LocalView& b,
                                       std::optional<std::int64_t> horizon);

// As above but the second view may be a truncated recording: it must be a
// prefix of the first unless it ended in a halt, in which case they must
// match exactly.
ViewComparison check_view_models(const LocalView& full, const LocalView& recorded);

ForgeReport verify_theorem1(const Graph& g, int f, const ProtocolConfig& cfg,
                            const std::map<NodeId, BehaviorFactory>& victim, std::uint64_t seed,
                            std::int64_t max_steps, bool auto_branch = true);

ForgeReport verify_theorem2(const Graph& g, int f, const ProtocolConfig& cfg,
                            const std::map<NodeId, BehaviorFactory>& victim, std::uint64_t seed,
                            std::int64_t max_steps);

// --- report bundle ----------------------------------------------------------

void write_bundle(const ForgeReport& report, const std::string& dir);

enum class RecheckOutcome : std::uint8_t { Reproduced, Mismatch, Malformed };

struct RecheckResult {
    RecheckOutcome outcome = RecheckOutcome::Malformed;
    std::vector<std::string> messages;
};

// Replays the bundle's decision procedure from its traces alone: trace
// audits, view certificates, condition checks and the verdict re-derivation.
RecheckResult recheck_bundle(const std::string& dir);

} // namespace lbcast

#include "lbcast/forge.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace lbcast {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string fault_kind_name(FaultKind k)
{
    return k == FaultKind::Crash ? "crash" : "replay";
}

std::string verdict_kind_name(VerdictKind k)
{
    switch (k) {
    case VerdictKind::ViolatedValidity: return "violated-validity";
    case VerdictKind::ViolatedAgreement: return "violated-agreement";
    case VerdictKind::VictimDidNotTerminate: return "victim-did-not-terminate";
    case VerdictKind::VictimSurvived: return "victim-survived";
    }
    throw std::logic_error("bad verdict kind");
}

VerdictKind verdict_kind_from_name(const std::string& name)
{
    if (name == "violated-validity") return VerdictKind::ViolatedValidity;
    if (name == "violated-agreement") return VerdictKind::ViolatedAgreement;
    if (name == "victim-did-not-terminate") return VerdictKind::VictimDidNotTerminate;
    if (name == "victim-survived") return VerdictKind::VictimSurvived;
    throw std::invalid_argument("unknown verdict kind: " + name);
}

// --- measurement and extraction ---------------------------------------------

DeltaResult measure_delta(const Graph& g, const NodeSet& crash_set, const std::map<NodeId, Fixed>& inputs,
                          const std::map<NodeId, BehaviorFactory>& victim, std::uint64_t seed,
                          std::int64_t max_steps)
{
    Topology topo = Topology::from_graph(g);
    std::map<CopyId, BehaviorFactory> behaviors;
    std::map<CopyId, Fixed> cinputs;
    std::map<CopyId, StartMode> modes;
    for (NodeId u : g.nodes()) {
        CopyId c = sole(u);
        cinputs[c] = inputs.at(u);
        if (crash_set.count(u)) {
            behaviors[c] = crash_behavior();
            modes[c] = StartMode::crashed();
        } else {
            behaviors[c] = victim.at(u);
            modes[c] = StartMode::normal();
        }
    }
    DeltaResult res;
    res.trace = run(topo, behaviors, cinputs, modes, {seed, max_steps});

    std::set<NodeId> halted;
    std::int64_t last_halt = -1;
    for (const Event& e : res.trace.events) {
        if (e.kind == EventKind::Halt) {
            halted.insert(e.actor.orig);
            last_halt = std::max(last_halt, e.step);
        }
    }
    res.terminated = true;
    for (NodeId u : g.nodes()) {
        if (!crash_set.count(u) && !halted.count(u)) {
            res.terminated = false;
        }
    }
    if (res.terminated) {
        res.delta = last_halt;
    }
    return res;
}

std::map<NodeId, std::vector<Bytes>> run_script_extraction(const Trace& gadget_trace,
                                                           const std::set<CopyId>& copies)
{
    std::set<NodeId> originals;
    for (CopyId c : copies) {
        if (!originals.insert(c.orig).second) {
            throw std::invalid_argument("script extraction copies must have distinct originals");
        }
    }
    std::map<NodeId, std::vector<Bytes>> out;
    for (NodeId u : originals) {
        out[u]; // silent copies still yield an (empty) script
    }
    for (const Event& e : gadget_trace.events) {
        if (e.kind == EventKind::Send && copies.count(e.actor) && e.payload) {
            out[e.actor.orig].push_back(*e.payload);
        }
    }
    return out;
}

// --- view comparison ---------------------------------------------------------

namespace {

std::string hexdiff(const Bytes& a, const Bytes& b)
{
    std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] != b[i]) {
            return "payload byte " + std::to_string(i) + " differs";
        }
    }
    return "payload length " + std::to_string(a.size()) + " vs " + std::to_string(b.size());
}

struct ViewSlice {
    bool activated = false;
    std::optional<Fixed> input;
    std::vector<const ViewItem*> received;
    std::optional<Fixed> decided;
    bool halted = false;
};

ViewSlice slice(const LocalView& v, std::optional<std::int64_t> horizon)
{
    ViewSlice s;
    auto within = [&](std::int64_t step) { return !horizon || step <= *horizon; };
    if (v.activated && within(v.activate_step)) {
        s.activated = true;
        s.input = v.input;
    }
    for (const ViewItem& it : v.received) {
        if (within(it.step)) {
            s.received.push_back(&it);
        }
    }
    if (v.decided && within(v.decide_step)) {
        s.decided = v.decided;
    }
    if (v.halted && within(v.halt_step)) {
        s.halted = true;
    }
    return s;
}

} // namespace

ViewComparison check_indistinguishable(const LocalView& a, const LocalView& b,
                                       std::optional<std::int64_t> horizon)
{
    ViewSlice sa = slice(a, horizon), sb = slice(b, horizon);
    if (sa.activated != sb.activated) {
        return {false, "one side never activated"};
    }
    if (sa.input != sb.input) {
        return {false, "inputs differ: " + (sa.input ? sa.input->str() : "none") + " vs " +
                           (sb.input ? sb.input->str() : "none")};
    }
    std::size_t n = std::min(sa.received.size(), sb.received.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (sa.received[i]->sender != sb.received[i]->sender) {
            return {false, "message " + std::to_string(i) + ": sender " + std::to_string(sa.received[i]->sender) +
                               " vs " + std::to_string(sb.received[i]->sender)};
        }
        if (sa.received[i]->payload != sb.received[i]->payload) {
            return {false,
                    "message " + std::to_string(i) + ": " + hexdiff(sa.received[i]->payload, sb.received[i]->payload)};
        }
    }
    if (sa.received.size() != sb.received.size()) {
        return {false, "received " + std::to_string(sa.received.size()) + " vs " +
                           std::to_string(sb.received.size()) + " messages"};
    }
    if (sa.decided != sb.decided) {
        return {false, "decisions differ: " + (sa.decided ? sa.decided->str() : "none") + " vs " +
                           (sb.decided ? sb.decided->str() : "none")};
    }
    if (sa.halted != sb.halted) {
        return {false, "halt status differs"};
    }
    return {true, {}};
}

ViewComparison check_view_models(const LocalView& full, const LocalView& recorded)
{
    if (!recorded.activated) {
        return {true, {}}; // recording ended before the node started
    }
    if (!full.activated) {
        return {false, "node never activated though its copy did"};
    }
    if (full.input != recorded.input) {
        return {false, "inputs differ: " + (full.input ? full.input->str() : "none") + " vs " +
                           (recorded.input ? recorded.input->str() : "none")};
    }
    if (recorded.received.size() > full.received.size()) {
        return {false, "copy received more messages than the node"};
    }
    for (std::size_t i = 0; i < recorded.received.size(); ++i) {
        if (full.received[i].sender != recorded.received[i].sender) {
            return {false, "message " + std::to_string(i) + ": sender " + std::to_string(full.received[i].sender) +
                               " vs " + std::to_string(recorded.received[i].sender)};
        }
        if (full.received[i].payload != recorded.received[i].payload) {
            return {false,
                    "message " + std::to_string(i) + ": " + hexdiff(full.received[i].payload, recorded.received[i].payload)};
        }
    }
    if (recorded.decided && full.decided != recorded.decided) {
        return {false, "decisions differ: " + (full.decided ? full.decided->str() : "none") + " vs " +
                           recorded.decided->str()};
    }
    if (recorded.halted) {
        if (!full.halted) {
            return {false, "copy halted but the node did not"};
        }
        if (full.received.size() != recorded.received.size()) {
            return {false, "received counts differ after halt"};
        }
    }
    return {true, {}};
}

// --- schedule projection -----------------------------------------------------

namespace {

// plan that replays a graph-run inside the gadget: activations and
// deliveries of mapped copies, everything else emerges from the behaviors
std::vector<Directive> plan_into_gadget(const Trace& e1, const std::map<CopyId, CopyId>& to_copy)
{
    std::vector<Directive> plan;
    for (const Event& e : e1.events) {
        switch (e.kind) {
        case EventKind::Activate: {
            auto it = to_copy.find(e.actor);
            if (it != to_copy.end()) {
                plan.push_back({DirectiveKind::Activate, it->second, {}, {}});
            }
            break;
        }
        case EventKind::Deliver: {
            auto s = to_copy.find(e.actor);
            auto r = e.peer ? to_copy.find(*e.peer) : to_copy.end();
            if (s != to_copy.end() && r != to_copy.end()) {
                plan.push_back({DirectiveKind::Deliver, s->second, r->second, {}});
            }
            break;
        }
        default:
            break;
        }
    }
    return plan;
}

struct GRunProjection {
    std::vector<Directive> plan;
    std::map<CopyId, ScriptedNode> scripts;
};

// project a gadget run onto one of the modeled graph executions: non-faulty
// participants get their activations and deliveries, faulty participants are
// replayed verbatim (sends, decide, halt) at the recorded positions
GRunProjection project_execution(const Trace& gadget_trace, const std::map<CopyId, NodeId>& participant,
                                 const std::set<CopyId>& faulty_copies)
{
    GRunProjection out;
    for (CopyId c : faulty_copies) {
        out.scripts[sole(participant.at(c))];
    }
    auto node_of = [&](CopyId c) -> std::optional<CopyId> {
        auto it = participant.find(c);
        if (it == participant.end()) return std::nullopt;
        return sole(it->second);
    };
    for (const Event& e : gadget_trace.events) {
        const bool faulty = faulty_copies.count(e.actor) > 0;
        switch (e.kind) {
        case EventKind::Activate: {
            if (auto n = node_of(e.actor)) {
                out.plan.push_back({DirectiveKind::Activate, *n, {}, {}});
            }
            break;
        }
        case EventKind::Deliver: {
            auto s = node_of(e.actor);
            auto r = e.peer ? node_of(*e.peer) : std::nullopt;
            if (s && r) {
                out.plan.push_back({DirectiveKind::Deliver, *s, *r, {}});
            }
            break;
        }
        case EventKind::Send: {
            if (faulty && e.payload) {
                CopyId n = *node_of(e.actor);
                out.scripts[n].sends.push_back(*e.payload);
                out.plan.push_back({DirectiveKind::Emit, n, {}, {}});
            }
            break;
        }
        case EventKind::Decide: {
            if (faulty && e.value) {
                out.plan.push_back({DirectiveKind::ScriptDecide, *node_of(e.actor), {}, *e.value});
            }
            break;
        }
        case EventKind::Halt: {
            if (faulty) {
                out.plan.push_back({DirectiveKind::ScriptHalt, *node_of(e.actor), {}, {}});
            }
            break;
        }
        }
    }
    return out;
}

Graph completed_graph(const Graph& g)
{
    Graph c = Graph::complete(g.node_count());
    return c;
}

struct DecisionTable {
    std::map<NodeId, Fixed> decisions;
    std::optional<std::pair<NodeId, NodeId>> worst_pair; // max spread
};

DecisionTable decision_table(const Trace& trace, const NodeSet& faulty)
{
    DecisionTable t;
    t.decisions = decisions_of(trace, faulty);
    std::optional<NodeId> lo, hi;
    for (const auto& [u, v] : t.decisions) {
        if (!lo || v < t.decisions.at(*lo)) lo = u;
        if (!hi || v > t.decisions.at(*hi)) hi = u;
    }
    if (lo && hi && *lo != *hi) {
        t.worst_pair = {{*lo, *hi}};
    }
    return t;
}

} // namespace

// --- theorem 1 ----------------------------------------------------------------

ForgeReport verify_theorem1(const Graph& g0, int f, const ProtocolConfig& cfg,
                            const std::map<NodeId, BehaviorFactory>& victim, std::uint64_t seed,
                            std::int64_t max_steps, bool auto_branch)
{
    validate_fault_model(g0, FaultModel{f});
    cfg.validate();
    if (cfg.f != f || cfg.n != g0.node_count()) {
        throw std::invalid_argument("config n/f must match the graph and fault bound");
    }
    if (g0.node_count() > 3 * f) {
        throw std::invalid_argument("inapplicable: n=" + std::to_string(g0.node_count()) + " > 3f=" +
                                    std::to_string(3 * f) + "; the node-count bound holds here");
    }

    ForgeReport rep;
    rep.theorem = 1;
    rep.seed = seed;
    rep.max_steps = max_steps;
    rep.cfg = cfg;
    rep.graph_completed = !g0.is_complete();
    rep.graph = rep.graph_completed ? completed_graph(g0) : g0;
    const Graph& g = rep.graph;

    ThreePartition p = three_partition(g, f);

    ExecutionSpec e1spec;
    e1spec.name = "E1";
    e1spec.faulty_set = p.c;
    e1spec.fault_kind = FaultKind::Crash;
    for (NodeId u : g.nodes()) {
        e1spec.inputs[u] = p.a.count(u) ? cfg.lower : cfg.upper;
        if (!p.c.count(u)) {
            e1spec.view_map[u] = sole(u);
        }
    }
    rep.executions.push_back(e1spec);

    DeltaResult e1 = measure_delta(g, p.c, e1spec.inputs, victim, seed, max_steps);
    rep.traces["e1"] = e1.trace;
    if (!e1.terminated) {
        rep.verdict = {VerdictKind::VictimDidNotTerminate,
                       e1.trace.outcome == RunOutcome::StepLimit
                           ? "the crash-fault execution was still running after " + std::to_string(max_steps) +
                                 " steps"
                           : "the crash-fault execution went quiet with undecided nodes still waiting",
                       {}};
        return rep;
    }
    rep.delta = e1.delta;

    // the crash-fault execution is itself legitimate; earliest failed check wins
    DecisionTable e1d = decision_table(e1.trace, p.c);
    for (NodeId u : g.nodes()) {
        if (!p.c.count(u) && !e1d.decisions.count(u)) {
            rep.verdict = {VerdictKind::VictimDidNotTerminate,
                           "node " + std::to_string(u) + " halted without deciding in E1",
                           {{"E1", u, std::nullopt, "no decision"}}};
            return rep;
        }
    }
    if (e1d.worst_pair) {
        auto [lo, hi] = *e1d.worst_pair;
        Fixed vlo = e1d.decisions.at(lo), vhi = e1d.decisions.at(hi);
        if (vhi - vlo > cfg.epsilon) {
            rep.verdict = {VerdictKind::ViolatedAgreement,
                           "E1 already violates agreement: spread " + (vhi - vlo).str() + " > epsilon",
                           {{"E1", lo, vlo, "decision"}, {"E1", hi, vhi, "decision"}}};
            return rep;
        }
    }
    for (const auto& [u, v] : e1d.decisions) {
        if (v < cfg.lower || v > cfg.upper) {
            rep.verdict = {VerdictKind::ViolatedValidity,
                           "E1 decision outside the non-faulty input hull",
                           {{"E1", u, v, "hull is [" + cfg.lower.str() + ", " + cfg.upper.str() + "]"}}};
            return rep;
        }
    }

    bool any_upper = false, any_lower = false;
    for (const auto& [u, v] : e1d.decisions) {
        any_upper |= v == cfg.upper;
        any_lower |= v == cfg.lower;
    }
    // agreement held, so outputs cannot touch both bounds; no output at U
    // lets the base branch run, otherwise mirror per the swapped-set variant
    bool mirror = auto_branch && any_upper;
    if (mirror && any_lower) {
        throw std::logic_error("outputs touch both bounds despite agreement holding");
    }
    rep.mirror = mirror;

    rep.gadget = build_theorem1_gadget(g, p, cfg, rep.delta + 1, mirror);
    rep.gadget_built = true;
    if (auto bad = validate_gadget(rep.gadget); !bad.empty()) {
        throw std::logic_error("gadget failed its structural audit: " + bad.front());
    }

    std::map<CopyId, CopyId> into;
    for (NodeId u : g.nodes()) {
        if (!p.c.count(u)) {
            into[sole(u)] = sole(u);
        }
    }
    auto lifted = lift_behaviors(rep.gadget, victim);
    GuidedResult ge = run_guided(rep.gadget.topology, lifted, {}, rep.gadget.inputs, rep.gadget.start_modes,
                                 plan_into_gadget(e1.trace, into), {seed, max_steps});
    rep.traces["gadget"] = ge.trace;
    if (ge.fault) {
        rep.verdict = {VerdictKind::VictimSurvived,
                       "gadget run diverged from the crash-fault schedule: " + *ge.fault, {}};
        return rep;
    }

    bool certs_ok = true;
    std::string first_divergence;
    auto add_cert = [&](const std::string& exec, NodeId node, CopyId copy, ViewComparison cmp) {
        rep.certificates.push_back({exec, node, copy, cmp.ok, cmp.divergence});
        if (!cmp.ok && certs_ok) {
            certs_ok = false;
            first_divergence = exec + " node " + std::to_string(node) + ": " + cmp.divergence;
        }
    };
    for (NodeId u : g.nodes()) {
        if (p.c.count(u)) {
            add_cert("E1", u, CopyId{u, Tag::Crash},
                     check_indistinguishable(local_view(e1.trace, sole(u)),
                                             local_view(ge.trace, CopyId{u, Tag::Crash}), rep.delta));
        } else {
            add_cert("E1", u, sole(u),
                     check_indistinguishable(local_view(e1.trace, sole(u)), local_view(ge.trace, sole(u)),
                                             rep.delta));
        }
    }
    rep.outputs["E1"] = e1d.decisions;
    if (!certs_ok) {
        rep.verdict = {VerdictKind::VictimSurvived, "view divergence: " + first_divergence, {}};
        return rep;
    }

    // second execution: the chosen side turns Byzantine and replays its copies
    const NodeSet& faulty = mirror ? p.b : p.a;
    const NodeSet& checked_side = mirror ? p.a : p.b;
    const Fixed target = mirror ? cfg.lower : cfg.upper;

    ExecutionSpec e2spec;
    e2spec.name = "E2";
    e2spec.faulty_set = faulty;
    e2spec.fault_kind = FaultKind::Replay;
    std::map<CopyId, NodeId> participant;
    std::set<CopyId> faulty_copies;
    for (NodeId u : g.nodes()) {
        if (faulty.count(u)) {
            e2spec.inputs[u] = p.a.count(u) ? cfg.lower : cfg.upper; // nominal
            participant[sole(u)] = u;
            faulty_copies.insert(sole(u));
        } else if (p.c.count(u)) {
            e2spec.inputs[u] = mirror ? cfg.lower : cfg.upper;
            e2spec.view_map[u] = CopyId{u, Tag::Slow};
            participant[CopyId{u, Tag::Slow}] = u;
        } else {
            e2spec.inputs[u] = target;
            e2spec.view_map[u] = sole(u);
            participant[sole(u)] = u;
        }
    }
    rep.executions.push_back(e2spec);

    GRunProjection proj = project_execution(ge.trace, participant, faulty_copies);
    Topology gtopo = Topology::from_graph(g);
    std::map<CopyId, BehaviorFactory> e2behaviors;
    std::map<CopyId, Fixed> e2inputs;
    std::map<CopyId, StartMode> e2modes;
    for (NodeId u : g.nodes()) {
        e2inputs[sole(u)] = e2spec.inputs.at(u);
        if (faulty.count(u)) {
            e2modes[sole(u)] = StartMode::normal();
        } else if (p.c.count(u)) {
            e2behaviors[sole(u)] = victim.at(u);
            e2modes[sole(u)] = StartMode::delayed_until(rep.delta + 1);
        } else {
            e2behaviors[sole(u)] = victim.at(u);
            e2modes[sole(u)] = StartMode::normal();
        }
    }
    GuidedResult e2 = run_guided(gtopo, e2behaviors, proj.scripts, e2inputs, e2modes, proj.plan, {seed, max_steps});
    rep.traces["e2"] = e2.trace;
    if (e2.fault) {
        rep.verdict = {VerdictKind::VictimSurvived, "replay run diverged: " + *e2.fault, {}};
        return rep;
    }
    for (const auto& [u, copy] : e2spec.view_map) {
        add_cert("E2", u, copy, check_view_models(local_view(e2.trace, sole(u)), local_view(ge.trace, copy)));
    }
    rep.outputs["E2"] = decisions_of(e2.trace, faulty);
    if (!certs_ok) {
        rep.verdict = {VerdictKind::VictimSurvived, "view divergence: " + first_divergence, {}};
        return rep;
    }

    std::vector<VerdictWitness> witnesses;
    for (NodeId u : checked_side) {
        auto it = rep.outputs["E2"].find(u);
        if (it == rep.outputs["E2"].end()) {
            witnesses.push_back({"E2", u, std::nullopt, "no decision despite unanimous inputs"});
        } else if (it->second != target) {
            witnesses.push_back({"E2", u, it->second,
                                 "output differs from the unanimous non-faulty input " + target.str()});
        }
    }
    if (!witnesses.empty()) {
        rep.verdict = {VerdictKind::ViolatedValidity,
                       std::string(mirror ? "mirror" : "base") +
                           " branch: outputs leave the unanimous input hull in the replay execution",
                       witnesses};
    } else {
        rep.verdict = {VerdictKind::VictimSurvived,
                       "replay execution kept all checked outputs at the unanimous input", {}};
    }
    return rep;
}

// --- theorem 2 ----------------------------------------------------------------

ForgeReport verify_theorem2(const Graph& g, int f, const ProtocolConfig& cfg,
                            const std::map<NodeId, BehaviorFactory>& victim, std::uint64_t seed,
                            std::int64_t max_steps)
{
    validate_fault_model(g, FaultModel{f});
    cfg.validate();
    if (cfg.f != f || cfg.n != g.node_count()) {
        throw std::invalid_argument("config n/f must match the graph and fault bound");
    }
    const int kappa = vertex_connectivity(g);
    if (kappa >= 2 * f + 1) {
        throw std::invalid_argument("inapplicable: vertex connectivity " + std::to_string(kappa) +
                                    " >= 2f+1 = " + std::to_string(2 * f + 1));
    }

    ForgeReport rep;
    rep.theorem = 2;
    rep.seed = seed;
    rep.max_steps = max_steps;
    rep.cfg = cfg;
    rep.graph = g;

    auto cut = find_vertex_cut(g, 2 * f);
    if (!cut) {
        throw std::logic_error("connectivity below 2f+1 but no cut found");
    }
    auto [a, b] = bipartition_around_cut(g, *cut);
    auto [c1, c2] = split_set(*cut, f);
    CutPartition p{a, b, c1, c2};

    ExecutionSpec e1spec;
    e1spec.name = "E1";
    e1spec.faulty_set = p.c1;
    e1spec.fault_kind = FaultKind::Crash;
    for (NodeId u : g.nodes()) {
        e1spec.inputs[u] = p.a.count(u) ? cfg.lower : cfg.upper;
        if (p.a.count(u)) {
            e1spec.view_map[u] = CopyId{u, Tag::Lo};
        } else if (p.b.count(u)) {
            e1spec.view_map[u] = CopyId{u, Tag::Hi};
        } else if (p.c2.count(u)) {
            e1spec.view_map[u] = sole(u);
        }
    }
    rep.executions.push_back(e1spec);

    DeltaResult e1 = measure_delta(g, p.c1, e1spec.inputs, victim, seed, max_steps);
    rep.traces["e1"] = e1.trace;
    if (!e1.terminated) {
        rep.verdict = {VerdictKind::VictimDidNotTerminate,
                       e1.trace.outcome == RunOutcome::StepLimit
                           ? "the crash-fault execution was still running after " + std::to_string(max_steps) +
                                 " steps"
                           : "the crash-fault execution went quiet with undecided nodes still waiting",
                       {}};
        return rep;
    }
    rep.delta = e1.delta;

    DecisionTable e1d = decision_table(e1.trace, p.c1);
    for (NodeId u : g.nodes()) {
        if (!p.c1.count(u) && !e1d.decisions.count(u)) {
            rep.verdict = {VerdictKind::VictimDidNotTerminate,
                           "node " + std::to_string(u) + " halted without deciding in E1",
                           {{"E1", u, std::nullopt, "no decision"}}};
            return rep;
        }
    }
    if (e1d.worst_pair) {
        auto [lo, hi] = *e1d.worst_pair;
        Fixed vlo = e1d.decisions.at(lo), vhi = e1d.decisions.at(hi);
        if (vhi - vlo > cfg.epsilon) {
            rep.verdict = {VerdictKind::ViolatedAgreement,
                           "E1 already violates agreement: spread " + (vhi - vlo).str() + " > epsilon",
                           {{"E1", lo, vlo, "decision"}, {"E1", hi, vhi, "decision"}}};
            return rep;
        }
    }
    for (const auto& [u, v] : e1d.decisions) {
        if (v < cfg.lower || v > cfg.upper) {
            rep.verdict = {VerdictKind::ViolatedValidity,
                           "E1 decision outside the non-faulty input hull",
                           {{"E1", u, v, "hull is [" + cfg.lower.str() + ", " + cfg.upper.str() + "]"}}};
            return rep;
        }
    }
    rep.outputs["E1"] = e1d.decisions;

    rep.gadget = build_theorem2_gadget(g, p, cfg, rep.delta + 1);
    rep.gadget_built = true;
    if (auto bad = validate_gadget(rep.gadget); !bad.empty()) {
        throw std::logic_error("gadget failed its structural audit: " + bad.front());
    }

    std::map<CopyId, CopyId> into;
    for (const auto& [u, copy] : e1spec.view_map) {
        into[sole(u)] = copy;
    }
    auto lifted = lift_behaviors(rep.gadget, victim);
    GuidedResult ge = run_guided(rep.gadget.topology, lifted, {}, rep.gadget.inputs, rep.gadget.start_modes,
                                 plan_into_gadget(e1.trace, into), {seed, max_steps});
    rep.traces["gadget"] = ge.trace;
    if (ge.fault) {
        rep.verdict = {VerdictKind::VictimSurvived,
                       "gadget run diverged from the crash-fault schedule: " + *ge.fault, {}};
        return rep;
    }

    bool certs_ok = true;
    std::string first_divergence;
    auto add_cert = [&](const std::string& exec, NodeId node, CopyId copy, ViewComparison cmp) {
        rep.certificates.push_back({exec, node, copy, cmp.ok, cmp.divergence});
        if (!cmp.ok && certs_ok) {
            certs_ok = false;
            first_divergence = exec + " node " + std::to_string(node) + ": " + cmp.divergence;
        }
    };
    for (const auto& [u, copy] : e1spec.view_map) {
        add_cert("E1", u, copy,
                 check_indistinguishable(local_view(e1.trace, sole(u)), local_view(ge.trace, copy), rep.delta));
    }
    for (NodeId u : p.c1) {
        add_cert("E1", u, CopyId{u, Tag::Crash},
                 check_indistinguishable(local_view(e1.trace, sole(u)),
                                         local_view(ge.trace, CopyId{u, Tag::Crash}), rep.delta));
    }
    if (!certs_ok) {
        rep.verdict = {VerdictKind::VictimSurvived, "view divergence: " + first_divergence, {}};
        return rep;
    }

    // replay executions; C2 turns Byzantine with the recorded transmissions
    auto run_replay = [&](const std::string& name, Tag side_tag, Fixed unanimous) -> std::optional<std::string> {
        ExecutionSpec spec;
        spec.name = name;
        spec.faulty_set = p.c2;
        spec.fault_kind = FaultKind::Replay;
        std::map<CopyId, NodeId> participant;
        std::set<CopyId> faulty_copies;
        for (NodeId u : g.nodes()) {
            if (p.c2.count(u)) {
                spec.inputs[u] = cfg.upper; // nominal
                participant[sole(u)] = u;
                faulty_copies.insert(sole(u));
            } else {
                spec.inputs[u] = unanimous;
                CopyId copy{u, side_tag};
                spec.view_map[u] = copy;
                participant[copy] = u;
            }
        }
        rep.executions.push_back(spec);

        GRunProjection proj = project_execution(ge.trace, participant, faulty_copies);
        Topology gtopo = Topology::from_graph(g);
        std::map<CopyId, BehaviorFactory> behaviors;
        std::map<CopyId, Fixed> inputs;
        std::map<CopyId, StartMode> modes;
        for (NodeId u : g.nodes()) {
            inputs[sole(u)] = spec.inputs.at(u);
            if (p.c2.count(u)) {
                modes[sole(u)] = StartMode::normal();
            } else {
                behaviors[sole(u)] = victim.at(u);
                modes[sole(u)] = p.c1.count(u) ? StartMode::delayed_until(rep.delta + 1) : StartMode::normal();
            }
        }
        GuidedResult res = run_guided(gtopo, behaviors, proj.scripts, inputs, modes, proj.plan, {seed, max_steps});
        std::string key = name == "E2" ? "e2" : "e3";
        rep.traces[key] = res.trace;
        if (res.fault) {
            return "replay run " + name + " diverged: " + *res.fault;
        }
        for (const auto& [u, copy] : spec.view_map) {
            add_cert(name, u, copy, check_view_models(local_view(res.trace, sole(u)), local_view(ge.trace, copy)));
        }
        rep.outputs[name] = decisions_of(res.trace, p.c2);
        for (NodeId u : g.nodes()) {
            if (p.c2.count(u)) continue;
            auto it = rep.outputs[name].find(u);
            if (it == rep.outputs[name].end()) {
                rep.notes.push_back(name + ": node " + std::to_string(u) +
                                    " has not decided within the recorded horizon");
            } else if (it->second != unanimous) {
                rep.notes.push_back(name + ": node " + std::to_string(u) + " decided " + it->second.str() +
                                    " under unanimous input " + unanimous.str() +
                                    " -- a validity violation inside this legitimate execution");
            }
        }
        return std::nullopt;
    };

    if (auto fault = run_replay("E2", Tag::Lo, cfg.lower)) {
        rep.verdict = {VerdictKind::VictimSurvived, *fault, {}};
        return rep;
    }
    if (auto fault = run_replay("E3", Tag::Hi, cfg.upper)) {
        rep.verdict = {VerdictKind::VictimSurvived, *fault, {}};
        return rep;
    }
    if (!certs_ok) {
        rep.verdict = {VerdictKind::VictimSurvived, "view divergence: " + first_divergence, {}};
        return rep;
    }

    // all three modeled executions are legitimate and the views line up:
    // correctness on the unanimous runs forces A to L and B to U inside the
    // crash-fault execution, which breaks agreement by U - L > epsilon
    std::vector<VerdictWitness> witnesses;
    for (NodeId u : p.a) {
        witnesses.push_back({"E1", u, cfg.lower, "forced by E2: unanimous inputs " + cfg.lower.str()});
    }
    for (NodeId u : p.b) {
        witnesses.push_back({"E1", u, cfg.upper, "forced by E3: unanimous inputs " + cfg.upper.str()});
    }
    rep.verdict = {VerdictKind::ViolatedAgreement,
                   "indistinguishability forces outputs " + cfg.lower.str() + " and " + cfg.upper.str() +
                       " inside the crash-fault execution; the gap exceeds epsilon",
                   witnesses};
    return rep;
}

// --- bundle -------------------------------------------------------------------

namespace {

ordered_json nodes_json(const NodeSet& s)
{
    ordered_json j = ordered_json::array();
    for (NodeId u : s) j.push_back(u);
    return j;
}

NodeSet nodes_from_json(const ordered_json& j)
{
    NodeSet out;
    for (const auto& v : j) out.insert(v.get<NodeId>());
    return out;
}

std::string outcome_name(RunOutcome o)
{
    return o == RunOutcome::Quiescent ? "quiescent" : "step-limit";
}

RunOutcome outcome_from_name(const std::string& s)
{
    if (s == "quiescent") return RunOutcome::Quiescent;
    if (s == "step-limit") return RunOutcome::StepLimit;
    throw std::invalid_argument("unknown run outcome: " + s);
}

ordered_json report_to_json(const ForgeReport& rep)
{
    ordered_json j;
    j["format"] = "lbcast-forge-report-v1";
    j["theorem"] = rep.theorem;
    j["mirror"] = rep.mirror;
    j["seed"] = rep.seed;
    j["max_steps"] = rep.max_steps;
    j["delta"] = rep.delta;
    j["config"] = {{"epsilon", rep.cfg.epsilon.str()},
                   {"lower", rep.cfg.lower.str()},
                   {"upper", rep.cfg.upper.str()},
                   {"n", rep.cfg.n},
                   {"f", rep.cfg.f}};
    j["graph_completed"] = rep.graph_completed;
    j["gadget_built"] = rep.gadget_built;
    if (rep.gadget_built) {
        if (rep.theorem == 1) {
            j["partition"] = {{"a", nodes_json(rep.gadget.three.a)},
                              {"b", nodes_json(rep.gadget.three.b)},
                              {"c", nodes_json(rep.gadget.three.c)}};
        } else {
            j["partition"] = {{"a", nodes_json(rep.gadget.cut.a)},
                              {"b", nodes_json(rep.gadget.cut.b)},
                              {"c1", nodes_json(rep.gadget.cut.c1)},
                              {"c2", nodes_json(rep.gadget.cut.c2)}};
        }
    }
    ordered_json outcomes = ordered_json::object();
    for (const auto& [name, trace] : rep.traces) {
        outcomes[name] = outcome_name(trace.outcome);
    }
    j["trace_outcomes"] = outcomes;
    ordered_json execs = ordered_json::array();
    for (const ExecutionSpec& e : rep.executions) {
        ordered_json ej;
        ej["name"] = e.name;
        ej["fault_kind"] = fault_kind_name(e.fault_kind);
        ej["faulty"] = nodes_json(e.faulty_set);
        ordered_json inputs = ordered_json::object();
        for (const auto& [u, v] : e.inputs) inputs[std::to_string(u)] = v.str();
        ej["inputs"] = inputs;
        ordered_json vm = ordered_json::object();
        for (const auto& [u, c] : e.view_map) vm[std::to_string(u)] = c.str();
        ej["view_map"] = vm;
        execs.push_back(ej);
    }
    j["executions"] = execs;
    ordered_json certs = ordered_json::array();
    for (const CertEntry& c : rep.certificates) {
        certs.push_back({{"execution", c.execution},
                         {"node", c.node},
                         {"copy", c.copy.str()},
                         {"ok", c.ok},
                         {"divergence", c.divergence}});
    }
    j["certificates"] = certs;
    ordered_json outputs = ordered_json::object();
    for (const auto& [name, decs] : rep.outputs) {
        ordered_json m = ordered_json::object();
        for (const auto& [u, v] : decs) m[std::to_string(u)] = v.str();
        outputs[name] = m;
    }
    j["outputs"] = outputs;
    j["notes"] = rep.notes;
    ordered_json wj = ordered_json::array();
    for (const VerdictWitness& w : rep.verdict.witnesses) {
        wj.push_back({{"execution", w.execution},
                      {"node", w.node},
                      {"output", w.output ? ordered_json(w.output->str()) : ordered_json(nullptr)},
                      {"note", w.note}});
    }
    j["verdict"] = {{"kind", verdict_kind_name(rep.verdict.kind)}, {"detail", rep.verdict.detail},
                    {"witnesses", wj}};
    return j;
}

void write_file(const fs::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << content;
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

void write_bundle(const ForgeReport& rep, const std::string& dir)
{
    fs::create_directories(dir);
    write_file(fs::path(dir) / "report.json", report_to_json(rep).dump(2) + "\n");
    write_file(fs::path(dir) / "graph.txt", rep.graph.serialize());
    if (rep.gadget_built) {
        write_file(fs::path(dir) / "gadget.txt", rep.gadget.serialize());
    }
    for (const auto& [name, trace] : rep.traces) {
        write_file(fs::path(dir) / (name + ".trace.jsonl"), trace.to_jsonl());
    }
    if (!rep.scenario_text.empty()) {
        write_file(fs::path(dir) / "scenario.txt", rep.scenario_text);
    }
}

namespace {

struct BundleData {
    ordered_json j;
    Graph graph;
    Topology graph_topology;
    std::optional<Topology> gadget_topology;
    std::map<std::string, Trace> traces;
    std::vector<ExecutionSpec> executions;
    ProtocolConfig cfg;
    std::int64_t delta = -1;
    int theorem = 0;
};

BundleData load_bundle(const std::string& dir)
{
    BundleData b;
    b.j = ordered_json::parse(read_file(fs::path(dir) / "report.json"));
    if (b.j.at("format").get<std::string>() != "lbcast-forge-report-v1") {
        throw std::invalid_argument("unknown report format");
    }
    b.graph = Graph::parse(read_file(fs::path(dir) / "graph.txt"));
    b.graph_topology = Topology::from_graph(b.graph);
    b.theorem = b.j.at("theorem").get<int>();
    b.delta = b.j.at("delta").get<std::int64_t>();
    const auto& cj = b.j.at("config");
    b.cfg.epsilon = Fixed::parse(cj.at("epsilon").get<std::string>());
    b.cfg.lower = Fixed::parse(cj.at("lower").get<std::string>());
    b.cfg.upper = Fixed::parse(cj.at("upper").get<std::string>());
    b.cfg.n = cj.at("n").get<int>();
    b.cfg.f = cj.at("f").get<int>();
    if (b.j.at("gadget_built").get<bool>()) {
        b.gadget_topology = parse_gadget_text(read_file(fs::path(dir) / "gadget.txt")).topology;
    }
    for (const auto& [name, outcome] : b.j.at("trace_outcomes").items()) {
        Trace t = Trace::from_jsonl(read_file(fs::path(dir) / (name + ".trace.jsonl")));
        t.outcome = outcome_from_name(outcome.get<std::string>());
        b.traces[name] = std::move(t);
    }
    for (const auto& ej : b.j.at("executions")) {
        ExecutionSpec e;
        e.name = ej.at("name").get<std::string>();
        e.fault_kind = ej.at("fault_kind").get<std::string>() == "crash" ? FaultKind::Crash : FaultKind::Replay;
        e.faulty_set = nodes_from_json(ej.at("faulty"));
        for (const auto& [k, v] : ej.at("inputs").items()) {
            e.inputs[std::stoi(k)] = Fixed::parse(v.get<std::string>());
        }
        for (const auto& [k, v] : ej.at("view_map").items()) {
            e.view_map[std::stoi(k)] = CopyId::parse(v.get<std::string>());
        }
        b.executions.push_back(std::move(e));
    }
    return b;
}

const ExecutionSpec* find_exec(const BundleData& b, const std::string& name)
{
    for (const ExecutionSpec& e : b.executions) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

std::string trace_key(const std::string& exec_name)
{
    std::string key = exec_name;
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    return key;
}

} // namespace

RecheckResult recheck_bundle(const std::string& dir)
{
    RecheckResult res;
    BundleData b;
    try {
        b = load_bundle(dir);
    } catch (const std::exception& e) {
        res.outcome = RecheckOutcome::Malformed;
        res.messages.push_back(e.what());
        return res;
    }

    auto mismatch = [&](const std::string& msg) { res.messages.push_back(msg); };

    try {
        for (const auto& [name, trace] : b.traces) {
            const Topology& topo = name == "gadget" ? *b.gadget_topology : b.graph_topology;
            auto violations = check_trace_wellformed(trace, topo);
            for (const auto& v : violations) {
                mismatch("trace " + name + ": " + v);
            }
        }

        const ExecutionSpec* e1 = find_exec(b, "E1");
        if (!e1 || !b.traces.count("e1")) {
            throw std::invalid_argument("bundle lacks the crash-fault execution");
        }
        const Trace& e1t = b.traces.at("e1");

        if (b.delta >= 0) {
            std::int64_t last_halt = -1;
            for (const Event& e : e1t.events) {
                if (e.kind == EventKind::Halt) last_halt = std::max(last_halt, e.step);
            }
            if (last_halt != b.delta) {
                mismatch("delta " + std::to_string(b.delta) + " does not match the last halt step " +
                         std::to_string(last_halt));
            }
        }

        // certificates
        bool all_certs_ok = true;
        for (const auto& cj : b.j.at("certificates")) {
            std::string exec = cj.at("execution").get<std::string>();
            NodeId node = cj.at("node").get<NodeId>();
            CopyId copy = CopyId::parse(cj.at("copy").get<std::string>());
            bool stored_ok = cj.at("ok").get<bool>();
            if (!b.traces.count("gadget")) {
                throw std::invalid_argument("certificates present without a gadget trace");
            }
            const Trace& gt = b.traces.at("gadget");
            ViewComparison cmp;
            if (exec == "E1") {
                cmp = check_indistinguishable(local_view(e1t, sole(node)), local_view(gt, copy), b.delta);
            } else {
                auto it = b.traces.find(trace_key(exec));
                if (it == b.traces.end()) {
                    throw std::invalid_argument("certificate references missing trace " + exec);
                }
                cmp = check_view_models(local_view(it->second, sole(node)), local_view(gt, copy));
            }
            if (cmp.ok != stored_ok) {
                mismatch("certificate " + exec + "/" + std::to_string(node) + " recomputes to " +
                         (cmp.ok ? "ok" : ("divergent: " + cmp.divergence)));
            }
            all_certs_ok = all_certs_ok && cmp.ok;
        }

        // recorded outputs
        for (const auto& [name, m] : b.j.at("outputs").items()) {
            const ExecutionSpec* spec = find_exec(b, name);
            auto it = b.traces.find(trace_key(name));
            if (!spec || it == b.traces.end()) {
                throw std::invalid_argument("outputs reference unknown execution " + name);
            }
            auto decs = decisions_of(it->second, spec->faulty_set);
            std::map<NodeId, Fixed> stored;
            for (const auto& [k, v] : m.items()) {
                stored[std::stoi(k)] = Fixed::parse(v.get<std::string>());
            }
            if (decs != stored) {
                mismatch("outputs of " + name + " do not match the trace");
            }
        }

        // verdict re-derivation
        const auto& vj = b.j.at("verdict");
        VerdictKind kind = verdict_kind_from_name(vj.at("kind").get<std::string>());
        struct W {
            std::string exec;
            NodeId node;
            std::optional<Fixed> output;
        };
        std::vector<W> witnesses;
        for (const auto& wj : vj.at("witnesses")) {
            W w;
            w.exec = wj.at("execution").get<std::string>();
            w.node = wj.at("node").get<NodeId>();
            if (!wj.at("output").is_null()) {
                w.output = Fixed::parse(wj.at("output").get<std::string>());
            }
            witnesses.push_back(std::move(w));
        }

        auto decided_and_halted = [&](NodeId u) {
            bool dec = false, hal = false;
            for (const Event& e : e1t.events) {
                if (e.actor == sole(u)) {
                    dec |= e.kind == EventKind::Decide;
                    hal |= e.kind == EventKind::Halt;
                }
            }
            return dec && hal;
        };

        switch (kind) {
        case VerdictKind::VictimDidNotTerminate: {
            bool stuck = false;
            for (const auto& [u, v] : e1->inputs) {
                if (!e1->faulty_set.count(u) && !decided_and_halted(u)) stuck = true;
            }
            if (!stuck) mismatch("termination verdict but every node decided and halted in E1");
            break;
        }
        case VerdictKind::ViolatedAgreement: {
            bool chain = false;
            for (const W& w : witnesses) {
                if (!w.output) continue;
                chain |= b.theorem == 2 && (w.output == b.cfg.lower || w.output == b.cfg.upper);
            }
            auto e1decs = decisions_of(e1t, e1->faulty_set);
            bool direct_ok = false;
            for (std::size_t i = 0; i < witnesses.size() && !direct_ok; ++i) {
                for (std::size_t k = i + 1; k < witnesses.size() && !direct_ok; ++k) {
                    const W& x = witnesses[i];
                    const W& y = witnesses[k];
                    if (x.output && y.output && e1decs.count(x.node) && e1decs.count(y.node) &&
                        e1decs.at(x.node) == *x.output && e1decs.at(y.node) == *y.output &&
                        (*x.output - *y.output).abs() > b.cfg.epsilon) {
                        direct_ok = true;
                    }
                }
            }
            if (direct_ok) break;
            if (!chain) {
                mismatch("agreement verdict is neither a direct E1 violation nor a forced chain");
                break;
            }
            // forced chain: all certificates must hold, the replay executions
            // must be unanimous at the bounds, and the gap must clear epsilon
            const ExecutionSpec* e2 = find_exec(b, "E2");
            const ExecutionSpec* e3 = find_exec(b, "E3");
            if (!e2 || !e3 || !all_certs_ok) {
                mismatch("forced chain lacks executions or holds broken certificates");
                break;
            }
            for (const auto& [u, v] : e2->inputs) {
                if (!e2->faulty_set.count(u) && v != b.cfg.lower) {
                    mismatch("E2 inputs are not unanimously at the lower bound");
                }
            }
            for (const auto& [u, v] : e3->inputs) {
                if (!e3->faulty_set.count(u) && v != b.cfg.upper) {
                    mismatch("E3 inputs are not unanimously at the upper bound");
                }
            }
            if (!(b.cfg.upper - b.cfg.lower > b.cfg.epsilon)) {
                mismatch("forced gap does not exceed epsilon");
            }
            bool has_low = false, has_high = false;
            for (const W& w : witnesses) {
                has_low |= w.output == b.cfg.lower;
                has_high |= w.output == b.cfg.upper;
            }
            if (!has_low || !has_high) {
                mismatch("forced chain witnesses do not cover both bounds");
            }
            // the chain also needs the crash-fault run itself to be clean
            auto spread_ok = [&]() {
                std::optional<Fixed> mn, mx;
                for (const auto& [u, v] : e1decs) {
                    if (!mn || v < *mn) mn = v;
                    if (!mx || v > *mx) mx = v;
                }
                return !mn || !(*mx - *mn > b.cfg.epsilon);
            };
            if (!spread_ok()) {
                mismatch("forced chain claimed but E1 already violates agreement");
            }
            break;
        }
        case VerdictKind::ViolatedValidity: {
            for (const W& w : witnesses) {
                const ExecutionSpec* spec = find_exec(b, w.exec);
                auto it = b.traces.find(trace_key(w.exec));
                if (!spec || it == b.traces.end()) {
                    mismatch("validity witness references unknown execution " + w.exec);
                    continue;
                }
                auto decs = decisions_of(it->second, spec->faulty_set);
                std::optional<Fixed> lo, hi;
                for (const auto& [u, v] : spec->inputs) {
                    if (spec->faulty_set.count(u)) continue;
                    if (!lo || v < *lo) lo = v;
                    if (!hi || v > *hi) hi = v;
                }
                auto d = decs.find(w.node);
                if (w.output) {
                    if (d == decs.end() || d->second != *w.output) {
                        mismatch("validity witness output does not match the trace");
                    } else if (!(d->second < *lo || d->second > *hi)) {
                        mismatch("validity witness lies inside the non-faulty input hull");
                    }
                } else if (d != decs.end()) {
                    mismatch("witness claims a missing decision but the trace has one");
                }
            }
            break;
        }
        case VerdictKind::VictimSurvived: {
            // nothing further derivable from traces alone; the structural and
            // certificate checks above already ran
            break;
        }
        }
    } catch (const std::exception& e) {
        res.outcome = RecheckOutcome::Malformed;
        res.messages.push_back(e.what());
        return res;
    }

    res.outcome = res.messages.empty() ? RecheckOutcome::Reproduced : RecheckOutcome::Mismatch;
    return res;
}

} // namespace lbcast

#pragma once

#include "lbcast/bytes.hpp"
#include "lbcast/fixed.hpp"
#include "lbcast/graph.hpp"

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace lbcast {

// Copies of original nodes. A plain node of G is its Sole copy, so traces
// from graph runs and gadget runs share one id space.
enum class Tag : std::uint8_t { Sole = 0, Crash = 1, Slow = 2, Lo = 3, Hi = 4 };

std::string tag_name(Tag t);
Tag tag_from_name(const std::string& name);

struct CopyId {
    NodeId orig = 0;
    Tag tag = Tag::Sole;

    auto operator<=>(const CopyId&) const = default;

    std::string str() const;
    static CopyId parse(const std::string& text);
    std::uint64_t code() const { return static_cast<std::uint64_t>(orig) * 8 + static_cast<std::uint64_t>(tag); }
};

inline CopyId sole(NodeId u) { return CopyId{u, Tag::Sole}; }

// Mixed undirected/directed edge structure over copies. An undirected edge
// carries messages both ways; a directed edge u->v delivers u's broadcasts
// to v but nothing back.
class Topology {
  public:
    Topology() = default;
    explicit Topology(std::set<CopyId> copies);

    static Topology from_graph(const Graph& g);

    const std::set<CopyId>& copies() const { return copies_; }
    bool has_copy(CopyId c) const { return copies_.count(c) > 0; }

    void add_undirected(CopyId a, CopyId b);
    void add_directed(CopyId from, CopyId to);

    const std::set<std::pair<CopyId, CopyId>>& undirected_edges() const { return undirected_; }
    const std::set<std::pair<CopyId, CopyId>>& directed_edges() const { return directed_; }

    std::vector<CopyId> out_neighbors(CopyId u) const;
    std::vector<CopyId> in_neighbors(CopyId u) const;

  private:
    void check_copy(CopyId c) const;

    std::set<CopyId> copies_;
    std::set<std::pair<CopyId, CopyId>> undirected_; // stored with lhs < rhs
    std::set<std::pair<CopyId, CopyId>> directed_;   // (from, to)
};

enum class StartKind : std::uint8_t { Normal, Crashed, DelayedUntil };

struct StartMode {
    StartKind kind = StartKind::Normal;
    std::int64_t step = 0; // for DelayedUntil

    static StartMode normal() { return {StartKind::Normal, 0}; }
    static StartMode crashed() { return {StartKind::Crashed, 0}; }
    static StartMode delayed_until(std::int64_t s) { return {StartKind::DelayedUntil, s}; }

    bool operator==(const StartMode&) const = default;

    std::string str() const;
    static StartMode parse(const std::string& text);
};

struct BroadcastAction {
    Bytes payload;
};
struct DecideAction {
    Fixed value;
};
struct HaltAction {};

using Action = std::variant<BroadcastAction, DecideAction, HaltAction>;

// Per-node state machine. The engine owns instances; identical call
// sequences must yield identical action lists. Senders are presented by
// original node id: copies run the original node's procedure unchanged, and
// the gadget structure guarantees at most one copy of a neighbor talks to
// any copy.
class Behavior {
  public:
    virtual ~Behavior() = default;
    virtual std::vector<Action> on_init(Fixed input) = 0;
    virtual std::vector<Action> on_message(NodeId sender, const Bytes& payload) = 0;
};

using BehaviorFactory = std::function<std::unique_ptr<Behavior>()>;

enum class EventKind : std::uint8_t { Activate, Send, Deliver, Decide, Halt };

std::string event_kind_name(EventKind k);
EventKind event_kind_from_name(const std::string& name);

struct Event {
    std::int64_t step = 0;
    EventKind kind = EventKind::Activate;
    CopyId actor;                 // sender for Send/Deliver, the node otherwise
    std::optional<CopyId> peer;   // receiver for Deliver
    std::optional<Bytes> payload; // Send/Deliver
    std::optional<Fixed> value;   // Decide; input for Activate

    bool operator==(const Event&) const = default;
};

enum class RunOutcome : std::uint8_t { Quiescent, StepLimit };

struct Trace {
    std::vector<Event> events;
    RunOutcome outcome = RunOutcome::Quiescent;

    std::string to_jsonl() const;
    static Trace from_jsonl(const std::string& text);
};

// Everything a node could observe in one run: its input, the received
// messages in delivery order (senders by original id), and its own
// decide/halt. Steps ride along for horizon cuts but do not take part in
// equality.
struct ViewItem {
    std::int64_t step = 0;
    NodeId sender = 0;
    Bytes payload;
};

struct LocalView {
    bool activated = false;
    std::int64_t activate_step = 0;
    std::optional<Fixed> input;
    std::vector<ViewItem> received;
    std::optional<Fixed> decided;
    std::int64_t decide_step = 0;
    bool halted = false;
    std::int64_t halt_step = 0;
};

LocalView local_view(const Trace& trace, CopyId node);

// Structural audit of a trace against its topology: send-before-deliver,
// per-link FIFO, no duplicate delivery, identical broadcast fan-out,
// halted/crashed silence, and (for quiescent runs) delivery to every live
// out-neighbor. Violations come back as messages, empty means clean.
std::vector<std::string> check_trace_wellformed(const Trace& trace, const Topology& topology);

struct RunConfig {
    std::uint64_t seed = 1;
    std::int64_t max_steps = 100000;
};

// One asynchronous execution under the seeded schedule. behaviors/inputs/
// start_modes must cover every copy in the topology.
Trace run(const Topology& topology, const std::map<CopyId, BehaviorFactory>& behaviors,
          const std::map<CopyId, Fixed>& inputs, const std::map<CopyId, StartMode>& start_modes,
          RunConfig cfg);

// --- guided execution ------------------------------------------------------
//
// A plan pins the schedule of one run to the projection of another: the
// engine activates and delivers exactly as directed, scripted nodes emit
// their recorded sends at the recorded positions, and everything left after
// the plan runs under the seeded fallback policy until quiescence.

enum class DirectiveKind : std::uint8_t { Activate, Deliver, Emit, ScriptDecide, ScriptHalt };

struct Directive {
    DirectiveKind kind = DirectiveKind::Activate;
    CopyId a; // actor / sender
    CopyId b; // receiver for Deliver
    Fixed value; // ScriptDecide
};

struct ScriptedNode {
    std::vector<Bytes> sends; // consumed by Emit directives in order
};

struct GuidedResult {
    Trace trace;
    // set when a directive was not executable; the position and reason make
    // the divergence reportable
    std::optional<std::string> fault;
    std::size_t fault_index = 0;
};

GuidedResult run_guided(const Topology& topology, const std::map<CopyId, BehaviorFactory>& behaviors,
                        const std::map<CopyId, ScriptedNode>& scripts, const std::map<CopyId, Fixed>& inputs,
                        const std::map<CopyId, StartMode>& start_modes, const std::vector<Directive>& plan,
                        RunConfig cfg);

} // namespace lbcast

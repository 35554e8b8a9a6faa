#include "lbcast/sim.hpp"

#include "lbcast/protocols.hpp"
#include "support.hpp"

#include <doctest.h>

#include <random>

using namespace lbcast;
using namespace lbcast::testing;

namespace {

// broadcasts one payload on start, halts after hearing one message
class PingOnce : public Behavior {
  public:
    explicit PingOnce(Bytes payload) : payload_(std::move(payload)) {}
    std::vector<Action> on_init(Fixed) override { return {BroadcastAction{payload_}}; }
    std::vector<Action> on_message(NodeId, const Bytes&) override { return {HaltAction{}}; }

  private:
    Bytes payload_;
};

BehaviorFactory ping_once(Bytes payload)
{
    return [payload]() { return std::make_unique<PingOnce>(payload); };
}

// deterministic chatter used by the randomized engine checks: echoes a
// counter a few times, then decides and halts
class Chatter : public Behavior {
  public:
    explicit Chatter(int budget) : budget_(budget) {}
    std::vector<Action> on_init(Fixed input) override
    {
        value_ = input;
        return {BroadcastAction{Bytes("hi")}};
    }
    std::vector<Action> on_message(NodeId sender, const Bytes& payload) override
    {
        if (--budget_ <= 0) {
            return {DecideAction{value_}, HaltAction{}};
        }
        return {BroadcastAction{payload + static_cast<char>('0' + sender % 10)}};
    }

  private:
    int budget_;
    Fixed value_;
};

BehaviorFactory chatter(int budget)
{
    return [budget]() { return std::make_unique<Chatter>(budget); };
}

struct Setup {
    Topology topo;
    std::map<CopyId, BehaviorFactory> behaviors;
    std::map<CopyId, Fixed> inputs;
    std::map<CopyId, StartMode> modes;
};

Setup graph_setup(const Graph& g, BehaviorFactory shared)
{
    Setup s;
    s.topo = Topology::from_graph(g);
    for (NodeId u : g.nodes()) {
        s.behaviors[sole(u)] = shared;
        s.inputs[sole(u)] = Fixed::from_int(u);
        s.modes[sole(u)] = StartMode::normal();
    }
    return s;
}

} // namespace

TEST_CASE("copy ids order and parse")
{
    CHECK(CopyId{2, Tag::Slow}.str() == "2:slow");
    CHECK(sole(7).str() == "7");
    CHECK(CopyId::parse("2:slow") == CopyId{2, Tag::Slow});
    CHECK(CopyId::parse("3") == sole(3));
    CHECK(sole(1) < CopyId{1, Tag::Crash});
    CHECK(CopyId{1, Tag::Crash} < sole(2));
}

TEST_CASE("out_neighbors and edge direction")
{
    Topology t(std::set<CopyId>{sole(0), sole(1), sole(2), sole(3)});
    t.add_undirected(sole(0), sole(1));
    t.add_directed(sole(2), sole(0));
    t.add_directed(sole(0), sole(3));

    CHECK(t.out_neighbors(sole(0)) == std::vector<CopyId>{sole(1), sole(3)});
    CHECK(t.out_neighbors(sole(1)) == std::vector<CopyId>{sole(0)});
    CHECK(t.out_neighbors(sole(2)) == std::vector<CopyId>{sole(0)});
    CHECK(t.out_neighbors(sole(3)).empty());
    CHECK(t.in_neighbors(sole(0)) == std::vector<CopyId>{sole(1), sole(2)});

    CHECK_THROWS_AS(t.add_undirected(sole(2), sole(0)), std::invalid_argument);
    CHECK_THROWS_AS(t.add_directed(sole(0), sole(1)), std::invalid_argument);
    CHECK_THROWS_AS(t.out_neighbors(CopyId{9, Tag::Sole}), std::invalid_argument);
}

TEST_CASE("single node decides its input")
{
    Graph g(1);
    Setup s = graph_setup(g, decide_input_behavior());
    s.inputs[sole(0)] = Fixed::parse("0.5");
    Trace t = run(s.topo, s.behaviors, s.inputs, s.modes, {1, 1000});
    REQUIRE(t.events.size() == 3);
    CHECK(t.events[1].kind == EventKind::Decide);
    CHECK(t.events[1].value == Fixed::parse("0.5"));
    CHECK(t.events[2].kind == EventKind::Halt);
    CHECK(t.outcome == RunOutcome::Quiescent);
}

TEST_CASE("two nodes exchange one message each")
{
    Graph g(2);
    g.add_edge(0, 1);
    Setup s = graph_setup(g, ping_once(Bytes("x")));
    Trace t = run(s.topo, s.behaviors, s.inputs, s.modes, {3, 1000});
    CHECK(check_trace_wellformed(t, s.topo).empty());
    int sends = 0, delivers = 0, halts = 0;
    for (const Event& e : t.events) {
        sends += e.kind == EventKind::Send;
        delivers += e.kind == EventKind::Deliver;
        halts += e.kind == EventKind::Halt;
    }
    CHECK(sends == 2);
    CHECK(delivers == 2);
    CHECK(halts == 2);
}

TEST_CASE("broadcast reaches both neighbors identically")
{
    Graph g(3);
    g.add_edge(0, 1);
    g.add_edge(0, 2);
    Setup s = graph_setup(g, ping_once(Bytes("payload")));
    Trace t = run(s.topo, s.behaviors, s.inputs, s.modes, {5, 1000});
    LocalView v1 = local_view(t, sole(1));
    LocalView v2 = local_view(t, sole(2));
    REQUIRE(v1.received.size() >= 1);
    REQUIRE(v2.received.size() >= 1);
    CHECK(v1.received[0].sender == 0);
    CHECK(v1.received[0].payload == v2.received[0].payload);
}

TEST_CASE("crashed nodes stay silent, delayed nodes catch up")
{
    Graph g(3);
    g.add_edge(0, 1);
    g.add_edge(0, 2);
    Setup s = graph_setup(g, ping_once(Bytes("m")));
    s.modes[sole(1)] = StartMode::crashed();
    s.modes[sole(2)] = StartMode::delayed_until(50);
    Trace t = run(s.topo, s.behaviors, s.inputs, s.modes, {5, 1000});
    CHECK(check_trace_wellformed(t, s.topo).empty());

    LocalView crashed = local_view(t, sole(1));
    CHECK(!crashed.activated);
    CHECK(crashed.received.empty());

    LocalView slow = local_view(t, sole(2));
    CHECK(slow.activated);
    CHECK(slow.activate_step >= 50);
    REQUIRE(slow.received.size() == 1); // the queued message arrives after activation
    CHECK(slow.received[0].step > slow.activate_step);
}

TEST_CASE("deliveries after halt are dropped")
{
    Graph g(2);
    g.add_edge(0, 1);
    std::map<CopyId, BehaviorFactory> behaviors{
        {sole(0), decide_input_behavior()}, // halts immediately, before 1 speaks
        {sole(1), ping_once(Bytes("late"))},
    };
    std::map<CopyId, Fixed> inputs{{sole(0), {}}, {sole(1), {}}};
    std::map<CopyId, StartMode> modes{{sole(0), StartMode::normal()}, {sole(1), StartMode::normal()}};
    Topology topo = Topology::from_graph(g);
    Trace t = run(topo, behaviors, inputs, modes, {1, 1000});
    CHECK(check_trace_wellformed(t, topo).empty());
    CHECK(local_view(t, sole(0)).received.empty());
}

TEST_CASE("determinism: same seed, same trace bytes")
{
    Graph g = random_connected_graph(5, 0.6, 17);
    for (std::uint64_t seed : {1ULL, 9ULL, 1234ULL}) {
        Setup a = graph_setup(g, chatter(6));
        Setup b = graph_setup(g, chatter(6));
        Trace ta = run(a.topo, a.behaviors, a.inputs, a.modes, {seed, 20000});
        Trace tb = run(b.topo, b.behaviors, b.inputs, b.modes, {seed, 20000});
        CHECK(ta.to_jsonl() == tb.to_jsonl());
    }
    Setup a = graph_setup(g, chatter(6));
    Setup b = graph_setup(g, chatter(6));
    Trace t1 = run(a.topo, a.behaviors, a.inputs, a.modes, {1, 20000});
    Trace t2 = run(b.topo, b.behaviors, b.inputs, b.modes, {2, 20000});
    CHECK(t1.to_jsonl() != t2.to_jsonl()); // different seed, different schedule
}

TEST_CASE("random runs stay well-formed")
{
    std::mt19937_64 rng(99);
    for (int i = 0; i < 50; ++i) {
        Graph g = random_connected_graph(3 + i % 4, 0.5, 1000 + i);
        Setup s = graph_setup(g, chatter(2 + i % 5));
        if (i % 3 == 0) {
            s.modes[sole(0)] = StartMode::delayed_until(20 + i);
        }
        if (i % 4 == 1) {
            s.modes[sole(g.node_count() - 1)] = StartMode::crashed();
        }
        Trace t = run(s.topo, s.behaviors, s.inputs, s.modes, {rng(), 50000});
        auto violations = check_trace_wellformed(t, s.topo);
        CAPTURE(i);
        CHECK(violations.empty());
    }
}

TEST_CASE("wellformedness checker flags hand-built violations")
{
    Graph g(2);
    g.add_edge(0, 1);
    Topology topo = Topology::from_graph(g);

    Trace dup;
    dup.events = {
        {0, EventKind::Activate, sole(0), std::nullopt, std::nullopt, Fixed{}},
        {1, EventKind::Activate, sole(1), std::nullopt, std::nullopt, Fixed{}},
        {2, EventKind::Send, sole(0), std::nullopt, Bytes("p"), std::nullopt},
        {3, EventKind::Deliver, sole(0), sole(1), Bytes("p"), std::nullopt},
        {4, EventKind::Deliver, sole(0), sole(1), Bytes("p"), std::nullopt}, // delivered twice
    };
    CHECK(!check_trace_wellformed(dup, topo).empty());

    Trace fifo;
    fifo.events = {
        {0, EventKind::Activate, sole(0), std::nullopt, std::nullopt, Fixed{}},
        {1, EventKind::Activate, sole(1), std::nullopt, std::nullopt, Fixed{}},
        {2, EventKind::Send, sole(0), std::nullopt, Bytes("a"), std::nullopt},
        {3, EventKind::Send, sole(0), std::nullopt, Bytes("b"), std::nullopt},
        {4, EventKind::Deliver, sole(0), sole(1), Bytes("b"), std::nullopt}, // out of order
        {5, EventKind::Deliver, sole(0), sole(1), Bytes("a"), std::nullopt},
    };
    auto violations = check_trace_wellformed(fifo, topo);
    REQUIRE(!violations.empty());
    CHECK(violations.front().find("out of order") != std::string::npos);

    Trace ghost;
    ghost.events = {
        {0, EventKind::Activate, sole(0), std::nullopt, std::nullopt, Fixed{}},
        {1, EventKind::Activate, sole(1), std::nullopt, std::nullopt, Fixed{}},
        {2, EventKind::Deliver, sole(0), sole(1), Bytes("q"), std::nullopt}, // never sent
    };
    CHECK(!check_trace_wellformed(ghost, topo).empty());

    Trace after_halt;
    after_halt.events = {
        {0, EventKind::Activate, sole(0), std::nullopt, std::nullopt, Fixed{}},
        {1, EventKind::Halt, sole(0), std::nullopt, std::nullopt, std::nullopt},
        {2, EventKind::Send, sole(0), std::nullopt, Bytes("zombie"), std::nullopt},
    };
    CHECK(!check_trace_wellformed(after_halt, topo).empty());
}

TEST_CASE("trace jsonl round-trip")
{
    Graph g(2);
    g.add_edge(0, 1);
    Setup s = graph_setup(g, ping_once(Bytes("\x01\x02\xff")));
    Trace t = run(s.topo, s.behaviors, s.inputs, s.modes, {4, 1000});
    Trace back = Trace::from_jsonl(t.to_jsonl());
    CHECK(back.events == t.events);
    CHECK_THROWS_AS(Trace::from_jsonl("{broken"), std::invalid_argument);
}

TEST_CASE("guided run replays a recorded schedule")
{
    Graph g(3);
    g.add_edge(0, 1);
    g.add_edge(1, 2);
    g.add_edge(0, 2);
    Setup s = graph_setup(g, chatter(3));
    Trace original = run(s.topo, s.behaviors, s.inputs, s.modes, {5, 10000});

    std::vector<Directive> plan;
    for (const Event& e : original.events) {
        if (e.kind == EventKind::Activate) {
            plan.push_back({DirectiveKind::Activate, e.actor, {}, {}});
        } else if (e.kind == EventKind::Deliver) {
            plan.push_back({DirectiveKind::Deliver, e.actor, *e.peer, {}});
        }
    }
    Setup s2 = graph_setup(g, chatter(3));
    GuidedResult res = run_guided(s2.topo, s2.behaviors, {}, s2.inputs, s2.modes, plan, {777, 10000});
    CHECK(!res.fault.has_value());
    CHECK(res.trace.events == original.events); // same deliveries, same emergent events

    // breaking the plan reports the position
    plan.insert(plan.begin(), {DirectiveKind::Deliver, sole(0), sole(1), {}});
    Setup s3 = graph_setup(g, chatter(3));
    GuidedResult bad = run_guided(s3.topo, s3.behaviors, {}, s3.inputs, s3.modes, plan, {777, 10000});
    REQUIRE(bad.fault.has_value());
    CHECK(bad.fault_index == 0);
}

TEST_CASE("scripted nodes emit on plan directives only")
{
    Graph g(2);
    g.add_edge(0, 1);
    Topology topo = Topology::from_graph(g);
    std::map<CopyId, BehaviorFactory> behaviors{{sole(1), ping_once(Bytes("v"))}};
    std::map<CopyId, ScriptedNode> scripts{{sole(0), ScriptedNode{{Bytes("s1"), Bytes("s2")}}}};
    std::map<CopyId, Fixed> inputs{{sole(0), {}}, {sole(1), {}}};
    std::map<CopyId, StartMode> modes{{sole(0), StartMode::normal()}, {sole(1), StartMode::normal()}};

    std::vector<Directive> plan{
        {DirectiveKind::Activate, sole(0), {}, {}},
        {DirectiveKind::Activate, sole(1), {}, {}},
        {DirectiveKind::Emit, sole(0), {}, {}},
        {DirectiveKind::Deliver, sole(0), sole(1), {}},
        {DirectiveKind::Emit, sole(0), {}, {}},
        {DirectiveKind::ScriptDecide, sole(0), {}, Fixed::parse("9")},
        {DirectiveKind::ScriptHalt, sole(0), {}, {}},
    };
    GuidedResult res = run_guided(topo, behaviors, scripts, inputs, modes, plan, {1, 1000});
    REQUIRE(!res.fault.has_value());
    CHECK(check_trace_wellformed(res.trace, topo).empty());
    LocalView v1 = local_view(res.trace, sole(1));
    REQUIRE(v1.received.size() >= 1);
    CHECK(v1.received[0].payload == Bytes("s1"));
    LocalView v0 = local_view(res.trace, sole(0));
    CHECK(v0.decided == Fixed::parse("9"));
    CHECK(v0.halted);

    // emitting past the script is a guided fault
    std::vector<Directive> over{{DirectiveKind::Activate, sole(0), {}, {}},
                                {DirectiveKind::Emit, sole(0), {}, {}},
                                {DirectiveKind::Emit, sole(0), {}, {}},
                                {DirectiveKind::Emit, sole(0), {}, {}}};
    std::map<CopyId, ScriptedNode> short_script{{sole(0), ScriptedNode{{Bytes("only")}}}};
    std::map<CopyId, BehaviorFactory> b2{{sole(1), ping_once(Bytes("v"))}};
    GuidedResult fault = run_guided(topo, b2, short_script, inputs, modes, over, {1, 1000});
    REQUIRE(fault.fault.has_value());
    CHECK(fault.fault_index == 2);
}

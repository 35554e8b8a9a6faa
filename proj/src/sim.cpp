#include "lbcast/sim.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <deque>
#include <sstream>

namespace lbcast {

using ordered_json = nlohmann::ordered_json;

std::string tag_name(Tag t)
{
    switch (t) {
    case Tag::Sole: return "sole";
    case Tag::Crash: return "crash";
    case Tag::Slow: return "slow";
    case Tag::Lo: return "lo";
    case Tag::Hi: return "hi";
    }
    throw std::logic_error("bad tag");
}

Tag tag_from_name(const std::string& name)
{
    if (name == "sole") return Tag::Sole;
    if (name == "crash") return Tag::Crash;
    if (name == "slow") return Tag::Slow;
    if (name == "lo") return Tag::Lo;
    if (name == "hi") return Tag::Hi;
    throw std::invalid_argument("unknown copy tag: " + name);
}

std::string CopyId::str() const
{
    if (tag == Tag::Sole) {
        return std::to_string(orig);
    }
    return std::to_string(orig) + ":" + tag_name(tag);
}

CopyId CopyId::parse(const std::string& text)
{
    auto colon = text.find(':');
    CopyId c;
    if (colon == std::string::npos) {
        c.orig = std::stoi(text);
        c.tag = Tag::Sole;
    } else {
        c.orig = std::stoi(text.substr(0, colon));
        c.tag = tag_from_name(text.substr(colon + 1));
    }
    return c;
}

Topology::Topology(std::set<CopyId> copies) : copies_(std::move(copies)) {}

Topology Topology::from_graph(const Graph& g)
{
    std::set<CopyId> copies;
    for (NodeId u : g.nodes()) {
        copies.insert(sole(u));
    }
    Topology t(copies);
    for (const auto& [u, v] : g.edges()) {
        t.add_undirected(sole(u), sole(v));
    }
    return t;
}

void Topology::check_copy(CopyId c) const
{
    if (!copies_.count(c)) {
        throw std::invalid_argument("unknown copy " + c.str());
    }
}

void Topology::add_undirected(CopyId a, CopyId b)
{
    check_copy(a);
    check_copy(b);
    if (a == b) {
        throw std::invalid_argument("self-loop at " + a.str());
    }
    auto lo = std::min(a, b), hi = std::max(a, b);
    if (directed_.count({lo, hi}) || directed_.count({hi, lo})) {
        throw std::invalid_argument("edge " + a.str() + "-" + b.str() + " already directed");
    }
    undirected_.insert({lo, hi});
}

void Topology::add_directed(CopyId from, CopyId to)
{
    check_copy(from);
    check_copy(to);
    if (from == to) {
        throw std::invalid_argument("self-loop at " + from.str());
    }
    auto lo = std::min(from, to), hi = std::max(from, to);
    if (undirected_.count({lo, hi})) {
        throw std::invalid_argument("edge " + from.str() + "->" + to.str() + " already undirected");
    }
    directed_.insert({from, to});
}

std::vector<CopyId> Topology::out_neighbors(CopyId u) const
{
    check_copy(u);
    std::set<CopyId> out;
    for (const auto& [a, b] : undirected_) {
        if (a == u) out.insert(b);
        if (b == u) out.insert(a);
    }
    for (const auto& [from, to] : directed_) {
        if (from == u) out.insert(to);
    }
    return {out.begin(), out.end()};
}

std::vector<CopyId> Topology::in_neighbors(CopyId u) const
{
    check_copy(u);
    std::set<CopyId> in;
    for (const auto& [a, b] : undirected_) {
        if (a == u) in.insert(b);
        if (b == u) in.insert(a);
    }
    for (const auto& [from, to] : directed_) {
        if (to == u) in.insert(from);
    }
    return {in.begin(), in.end()};
}

std::string StartMode::str() const
{
    switch (kind) {
    case StartKind::Normal: return "normal";
    case StartKind::Crashed: return "crashed";
    case StartKind::DelayedUntil: return "delayed:" + std::to_string(step);
    }
    throw std::logic_error("bad start mode");
}

StartMode StartMode::parse(const std::string& text)
{
    if (text == "normal") return normal();
    if (text == "crashed") return crashed();
    if (text.rfind("delayed:", 0) == 0) {
        return delayed_until(std::stoll(text.substr(8)));
    }
    throw std::invalid_argument("unknown start mode: " + text);
}

std::string event_kind_name(EventKind k)
{
    switch (k) {
    case EventKind::Activate: return "activate";
    case EventKind::Send: return "send";
    case EventKind::Deliver: return "deliver";
    case EventKind::Decide: return "decide";
    case EventKind::Halt: return "halt";
    }
    throw std::logic_error("bad event kind");
}

EventKind event_kind_from_name(const std::string& name)
{
    if (name == "activate") return EventKind::Activate;
    if (name == "send") return EventKind::Send;
    if (name == "deliver") return EventKind::Deliver;
    if (name == "decide") return EventKind::Decide;
    if (name == "halt") return EventKind::Halt;
    throw std::invalid_argument("unknown event kind: " + name);
}

std::string Trace::to_jsonl() const
{
    std::ostringstream out;
    for (const Event& e : events) {
        ordered_json j;
        j["step"] = e.step;
        j["kind"] = event_kind_name(e.kind);
        j["sender"] = e.actor.str();
        j["receiver"] = e.peer ? ordered_json(e.peer->str()) : ordered_json(nullptr);
        j["payload"] = e.payload ? ordered_json(to_hex(*e.payload)) : ordered_json(nullptr);
        j["value"] = e.value ? ordered_json(e.value->str()) : ordered_json(nullptr);
        out << j.dump() << "\n";
    }
    return out.str();
}

Trace Trace::from_jsonl(const std::string& text)
{
    Trace t;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw std::invalid_argument("trace line " + std::to_string(lineno) + ": " + e.what());
        }
        Event e;
        e.step = j.at("step").get<std::int64_t>();
        e.kind = event_kind_from_name(j.at("kind").get<std::string>());
        e.actor = CopyId::parse(j.at("sender").get<std::string>());
        if (!j.at("receiver").is_null()) {
            e.peer = CopyId::parse(j.at("receiver").get<std::string>());
        }
        if (!j.at("payload").is_null()) {
            e.payload = from_hex(j.at("payload").get<std::string>());
        }
        if (!j.at("value").is_null()) {
            e.value = Fixed::parse(j.at("value").get<std::string>());
        }
        t.events.push_back(std::move(e));
    }
    return t;
}

LocalView local_view(const Trace& trace, CopyId node)
{
    LocalView v;
    for (const Event& e : trace.events) {
        switch (e.kind) {
        case EventKind::Activate:
            if (e.actor == node) {
                v.activated = true;
                v.activate_step = e.step;
                v.input = e.value;
            }
            break;
        case EventKind::Deliver:
            if (e.peer && *e.peer == node) {
                v.received.push_back({e.step, e.actor.orig, e.payload.value_or(Bytes{})});
            }
            break;
        case EventKind::Decide:
            if (e.actor == node && !v.decided) {
                v.decided = e.value;
                v.decide_step = e.step;
            }
            break;
        case EventKind::Halt:
            if (e.actor == node) {
                v.halted = true;
                v.halt_step = e.step;
            }
            break;
        default:
            break;
        }
    }
    return v;
}

namespace {

using Link = std::pair<CopyId, CopyId>;

struct NodeState {
    Behavior* behavior = nullptr; // owned via behaviors_store
    const ScriptedNode* script = nullptr;
    std::size_t script_pos = 0;
    StartMode mode;
    Fixed input;
    bool activated = false;
    bool halted = false;
    bool crashed = false;
};

class Exec {
  public:
    Exec(const Topology& topology, const std::map<CopyId, BehaviorFactory>& behaviors,
         const std::map<CopyId, ScriptedNode>& scripts, const std::map<CopyId, Fixed>& inputs,
         const std::map<CopyId, StartMode>& start_modes, RunConfig cfg)
        : topology_(topology), cfg_(cfg)
    {
        for (CopyId c : topology.copies()) {
            NodeState st;
            auto mode_it = start_modes.find(c);
            if (mode_it == start_modes.end()) {
                throw std::invalid_argument("missing start mode for " + c.str());
            }
            st.mode = mode_it->second;
            st.crashed = st.mode.kind == StartKind::Crashed;
            auto input_it = inputs.find(c);
            if (input_it == inputs.end()) {
                throw std::invalid_argument("missing input for " + c.str());
            }
            st.input = input_it->second;
            if (auto s = scripts.find(c); s != scripts.end()) {
                st.script = &s->second;
            } else {
                auto b = behaviors.find(c);
                if (b == behaviors.end()) {
                    throw std::invalid_argument("missing behavior for " + c.str());
                }
                behaviors_store_.push_back(b->second());
                st.behavior = behaviors_store_.back().get();
            }
            states_.emplace(c, std::move(st));
            out_nbrs_.emplace(c, topology.out_neighbors(c));
        }
    }

    Trace take_trace() { return std::move(trace_); }

    // seeded fallback loop: activate everything whose time has come, then
    // deliver the eligible queue head with the smallest per-link hash draw
    void random_loop()
    {
        while (true) {
            activate_ready();
            if (step_limit_hit()) return;
            auto pick = pick_delivery();
            if (!pick) {
                // nothing deliverable; jump to the next activation threshold
                std::int64_t next = next_activation_threshold();
                if (next < 0) {
                    trace_.outcome = RunOutcome::Quiescent;
                    return;
                }
                step_ = std::max(step_, next);
                continue;
            }
            deliver(pick->first, pick->second);
            if (step_limit_hit()) return;
        }
    }

    bool apply(const Directive& d, std::string& error)
    {
        auto& st = state(d.a);
        switch (d.kind) {
        case DirectiveKind::Activate:
            if (st.crashed || st.activated || st.halted) {
                error = "activate " + d.a.str() + ": not activatable";
                return false;
            }
            activate(d.a);
            return true;
        case DirectiveKind::Deliver: {
            auto& rst = state(d.b);
            auto q = queues_.find({d.a, d.b});
            if (q == queues_.end() || q->second.empty()) {
                error = "deliver " + d.a.str() + "->" + d.b.str() + ": no pending message";
                return false;
            }
            if (!rst.activated || rst.halted || rst.crashed) {
                error = "deliver " + d.a.str() + "->" + d.b.str() + ": receiver not live";
                return false;
            }
            deliver(d.a, d.b);
            return true;
        }
        case DirectiveKind::Emit: {
            if (!st.script) {
                error = "emit " + d.a.str() + ": node is not scripted";
                return false;
            }
            if (st.halted || !st.activated) {
                error = "emit " + d.a.str() + ": node not live";
                return false;
            }
            if (st.script_pos >= st.script->sends.size()) {
                error = "emit " + d.a.str() + ": script exhausted";
                return false;
            }
            broadcast(d.a, st.script->sends[st.script_pos]);
            st.script_pos++;
            return true;
        }
        case DirectiveKind::ScriptDecide:
            if (!st.script || st.halted) {
                error = "decide " + d.a.str() + ": not a live scripted node";
                return false;
            }
            push_event({step_++, EventKind::Decide, d.a, std::nullopt, std::nullopt, d.value});
            return true;
        case DirectiveKind::ScriptHalt:
            if (!st.script || st.halted) {
                error = "halt " + d.a.str() + ": not a live scripted node";
                return false;
            }
            halt(d.a);
            return true;
        }
        error = "bad directive";
        return false;
    }

    bool step_limit_hit()
    {
        if (step_ >= cfg_.max_steps) {
            trace_.outcome = RunOutcome::StepLimit;
            return true;
        }
        return false;
    }

  private:
    NodeState& state(CopyId c)
    {
        auto it = states_.find(c);
        if (it == states_.end()) {
            throw std::invalid_argument("unknown copy " + c.str());
        }
        return it->second;
    }

    void push_event(Event e) { trace_.events.push_back(std::move(e)); }

    std::int64_t activation_threshold(const NodeState& st) const
    {
        return st.mode.kind == StartKind::DelayedUntil ? st.mode.step : 0;
    }

    void activate_ready()
    {
        for (auto& [c, st] : states_) {
            if (st.activated || st.crashed || st.halted) continue;
            if (activation_threshold(st) <= step_) {
                activate(c);
                if (step_ >= cfg_.max_steps) return;
            }
        }
    }

    std::int64_t next_activation_threshold() const
    {
        std::int64_t best = -1;
        for (const auto& [c, st] : states_) {
            if (st.activated || st.crashed || st.halted) continue;
            std::int64_t t = activation_threshold(st);
            if (best < 0 || t < best) best = t;
        }
        return best;
    }

    void activate(CopyId c)
    {
        auto& st = state(c);
        st.activated = true;
        push_event({step_++, EventKind::Activate, c, std::nullopt, std::nullopt, st.input});
        if (st.behavior) {
            process_actions(c, st.behavior->on_init(st.input));
        }
    }

    void deliver(CopyId s, CopyId r)
    {
        auto& q = queues_[{s, r}];
        Bytes payload = std::move(q.front());
        q.pop_front();
        delivered_[{s, r}]++;
        push_event({step_++, EventKind::Deliver, s, r, payload, std::nullopt});
        auto& rst = state(r);
        if (rst.behavior) {
            process_actions(r, rst.behavior->on_message(s.orig, payload));
        }
    }

    void broadcast(CopyId from, const Bytes& payload)
    {
        push_event({step_++, EventKind::Send, from, std::nullopt, payload, std::nullopt});
        for (CopyId t : out_nbrs_.at(from)) {
            const auto& tst = states_.at(t);
            if (tst.halted || tst.crashed) continue; // dropped silently
            queues_[{from, t}].push_back(payload);
        }
    }

    void halt(CopyId c)
    {
        auto& st = state(c);
        push_event({step_++, EventKind::Halt, c, std::nullopt, std::nullopt, std::nullopt});
        st.halted = true;
        // pending deliveries to a terminated node are dropped
        for (auto& [link, q] : queues_) {
            if (link.second == c) q.clear();
        }
    }

    void process_actions(CopyId c, const std::vector<Action>& actions)
    {
        for (const Action& a : actions) {
            auto& st = state(c);
            if (st.halted) break; // silence after halt
            if (std::holds_alternative<BroadcastAction>(a)) {
                broadcast(c, std::get<BroadcastAction>(a).payload);
            } else if (std::holds_alternative<DecideAction>(a)) {
                push_event({step_++, EventKind::Decide, c, std::nullopt, std::nullopt,
                            std::get<DecideAction>(a).value});
            } else {
                halt(c);
            }
        }
    }

    // smallest hash draw among eligible queue heads; ties break on link order
    std::optional<Link> pick_delivery()
    {
        std::optional<Link> best;
        std::uint64_t best_key = 0;
        for (auto& [link, q] : queues_) {
            if (q.empty()) continue;
            const auto& rst = states_.at(link.second);
            if (!rst.activated || rst.halted || rst.crashed) continue;
            std::uint64_t base = splitmix64(splitmix64(splitmix64(cfg_.seed) ^ link.first.code()) ^ link.second.code());
            auto dit = delivered_.find(link);
            std::uint64_t k = dit == delivered_.end() ? 0 : dit->second;
            std::uint64_t key = splitmix64(base ^ k);
            if (!best || key < best_key) {
                best = link;
                best_key = key;
            }
        }
        return best;
    }

    const Topology& topology_;
    RunConfig cfg_;
    std::map<CopyId, NodeState> states_;
    std::map<CopyId, std::vector<CopyId>> out_nbrs_;
    std::map<Link, std::deque<Bytes>> queues_;
    std::map<Link, std::uint64_t> delivered_;
    std::vector<std::unique_ptr<Behavior>> behaviors_store_;
    Trace trace_;
    std::int64_t step_ = 0;
};

} // namespace

Trace run(const Topology& topology, const std::map<CopyId, BehaviorFactory>& behaviors,
          const std::map<CopyId, Fixed>& inputs, const std::map<CopyId, StartMode>& start_modes, RunConfig cfg)
{
    Exec e(topology, behaviors, {}, inputs, start_modes, cfg);
    e.random_loop();
    return e.take_trace();
}

GuidedResult run_guided(const Topology& topology, const std::map<CopyId, BehaviorFactory>& behaviors,
                        const std::map<CopyId, ScriptedNode>& scripts, const std::map<CopyId, Fixed>& inputs,
                        const std::map<CopyId, StartMode>& start_modes, const std::vector<Directive>& plan,
                        RunConfig cfg)
{
    Exec e(topology, behaviors, scripts, inputs, start_modes, cfg);
    GuidedResult result;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        if (e.step_limit_hit()) break;
        std::string error;
        if (!e.apply(plan[i], error)) {
            result.fault = error;
            result.fault_index = i;
            result.trace = e.take_trace();
            return result;
        }
    }
    if (!result.fault) {
        e.random_loop();
    }
    result.trace = e.take_trace();
    return result;
}

std::vector<std::string> check_trace_wellformed(const Trace& trace, const Topology& topology)
{
    std::vector<std::string> violations;
    auto complain = [&](std::int64_t step, const std::string& what) {
        violations.push_back("step " + std::to_string(step) + ": " + what);
    };

    std::map<CopyId, std::vector<Bytes>> sends;
    std::map<Link, std::uint64_t> delivered;
    std::map<CopyId, bool> activated, halted;
    std::map<CopyId, std::vector<CopyId>> out_nbrs;
    for (CopyId c : topology.copies()) {
        out_nbrs[c] = topology.out_neighbors(c);
    }

    std::int64_t prev_step = -1;
    for (const Event& e : trace.events) {
        if (e.step <= prev_step) {
            complain(e.step, "steps not strictly increasing");
        }
        prev_step = e.step;
        if (!topology.has_copy(e.actor)) {
            complain(e.step, "unknown node " + e.actor.str());
            continue;
        }
        switch (e.kind) {
        case EventKind::Activate:
            if (activated[e.actor]) complain(e.step, "duplicate activation of " + e.actor.str());
            if (halted[e.actor]) complain(e.step, "activation after halt of " + e.actor.str());
            activated[e.actor] = true;
            break;
        case EventKind::Send:
            if (!activated[e.actor]) complain(e.step, "send by unactivated " + e.actor.str());
            if (halted[e.actor]) complain(e.step, "send by halted " + e.actor.str());
            if (!e.payload) complain(e.step, "send without payload");
            sends[e.actor].push_back(e.payload.value_or(Bytes{}));
            break;
        case EventKind::Deliver: {
            if (!e.peer) {
                complain(e.step, "deliver without receiver");
                break;
            }
            CopyId r = *e.peer;
            if (!topology.has_copy(r)) {
                complain(e.step, "deliver to unknown node " + r.str());
                break;
            }
            const auto& nbrs = out_nbrs[e.actor];
            if (!std::binary_search(nbrs.begin(), nbrs.end(), r)) {
                complain(e.step, "deliver " + e.actor.str() + "->" + r.str() + " without an edge");
            }
            if (!activated[r]) complain(e.step, "deliver to unactivated " + r.str());
            if (halted[r]) complain(e.step, "deliver to halted " + r.str());
            std::uint64_t k = delivered[{e.actor, r}]++;
            const auto& sent = sends[e.actor];
            if (k >= sent.size()) {
                complain(e.step, "deliver " + e.actor.str() + "->" + r.str() + " outruns sends");
            } else if (e.payload.value_or(Bytes{}) != sent[k]) {
                complain(e.step, "deliver " + e.actor.str() + "->" + r.str() +
                                     " out of order or corrupted (message " + std::to_string(k) + ")");
            }
            break;
        }
        case EventKind::Decide:
            if (!activated[e.actor]) complain(e.step, "decide by unactivated " + e.actor.str());
            if (halted[e.actor]) complain(e.step, "decide by halted " + e.actor.str());
            if (!e.value) complain(e.step, "decide without value");
            break;
        case EventKind::Halt:
            if (!activated[e.actor]) complain(e.step, "halt by unactivated " + e.actor.str());
            if (halted[e.actor]) complain(e.step, "duplicate halt of " + e.actor.str());
            halted[e.actor] = true;
            break;
        }
    }

    if (trace.outcome == RunOutcome::Quiescent) {
        // fairness: every send reaches every out-neighbor that stayed live
        for (const auto& [s, payloads] : sends) {
            for (CopyId r : out_nbrs[s]) {
                if (halted[r] || !activated[r]) continue;
                std::uint64_t got = delivered.count({s, r}) ? delivered.at({s, r}) : 0;
                if (got != payloads.size()) {
                    complain(-1, "quiescent run left " + std::to_string(payloads.size() - got) +
                                     " undelivered messages on link " + s.str() + "->" + r.str());
                }
            }
        }
    }
    return violations;
}

} // namespace lbcast

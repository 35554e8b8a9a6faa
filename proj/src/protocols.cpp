#include "lbcast/protocols.hpp"

#include <algorithm>

namespace lbcast {

void ProtocolConfig::validate() const
{
    if (epsilon <= Fixed{}) {
        throw std::invalid_argument("epsilon must be positive");
    }
    if (!(lower < upper)) {
        throw std::invalid_argument("need lower < upper");
    }
    if (!(upper - lower > epsilon)) {
        throw std::invalid_argument("need upper - lower > epsilon");
    }
    if (n < 2 || f < 1 || f >= n) {
        throw std::invalid_argument("need n >= 2 and 0 < f < n");
    }
}

int ProtocolConfig::round_count() const
{
    validate();
    const std::int64_t width = (upper - lower).units();
    std::int64_t reach = epsilon.units();
    int k = 0;
    while (reach < width) {
        reach *= 2;
        ++k;
    }
    return k + 1;
}

// --- relay layer -----------------------------------------------------------

RelayLayer::RelayLayer(const Graph& g, int f, NodeId self)
    : graph_(g), f_(f), self_(self), n_(g.node_count())
{
    if (vertex_connectivity(g) < 2 * f + 1) {
        throw std::invalid_argument("relay layer needs vertex connectivity >= 2f+1");
    }
}

Bytes RelayLayer::origin_payload(int round, Fixed value) const
{
    return round_value_msg(self_, round, value);
}

bool RelayLayer::has_accepted(NodeId origin, int round) const
{
    return accepted_.count({origin, round}) > 0;
}

std::optional<Fixed> RelayLayer::accepted_value(NodeId origin, int round) const
{
    auto it = accepted_.find({origin, round});
    if (it == accepted_.end()) return std::nullopt;
    return it->second;
}

bool RelayLayer::disjoint_family_exists(const std::vector<std::set<NodeId>>& interiors, int need) const
{
    // exact search; candidate counts stay small at the scales the relay runs
    std::vector<int> chosen;
    std::function<bool(std::size_t, int)> go = [&](std::size_t from, int left) {
        if (left == 0) return true;
        for (std::size_t i = from; i < interiors.size(); ++i) {
            bool ok = true;
            for (int j : chosen) {
                const auto& a = interiors[i];
                const auto& b = interiors[j];
                for (NodeId x : a) {
                    if (b.count(x)) {
                        ok = false;
                        break;
                    }
                }
                if (!ok) break;
            }
            if (!ok) continue;
            chosen.push_back(static_cast<int>(i));
            if (go(i + 1, left - 1)) return true;
            chosen.pop_back();
        }
        return false;
    };
    return go(0, need);
}

RelayLayer::Incoming RelayLayer::on_message(NodeId sender, const Msg& m)
{
    Incoming out;
    if (m.origin == self_) {
        return out;
    }
    Bytes raw = encode(m);
    if (seen_.count(raw)) {
        return out;
    }
    seen_.insert(raw);

    bool valid = false;
    std::set<NodeId> interior;
    if (m.kind == MsgKind::RoundValue) {
        // origin's own broadcast, authenticated by the link
        valid = m.path.empty() && sender == m.origin;
    } else if (m.kind == MsgKind::Relay) {
        valid = m.path.size() >= 2 && m.path.front() == m.origin && m.path.back() == sender;
        if (valid) {
            std::set<NodeId> dedup(m.path.begin(), m.path.end());
            valid = dedup.size() == m.path.size() && !dedup.count(self_);
        }
        if (valid) {
            interior.insert(m.path.begin() + 1, m.path.end());
        }
    } else {
        return out; // witness traffic is not relay traffic
    }
    if (!valid) {
        return out;
    }

    const bool was_accepted = has_accepted(m.origin, m.round);
    if (!was_accepted) {
        if (m.kind == MsgKind::RoundValue) {
            accepted_[{m.origin, m.round}] = m.value;
            out.newly_accepted.push_back({m.origin, m.round, m.value});
        } else {
            auto& fam = candidates_[{m.origin, m.round, m.value.units()}];
            fam.push_back(interior);
            if (disjoint_family_exists(fam, f_ + 1)) {
                accepted_[{m.origin, m.round}] = m.value;
                out.newly_accepted.push_back({m.origin, m.round, m.value});
            }
        }
    }

    // forward with ourselves appended so others gather more paths
    std::vector<NodeId> new_path = m.path;
    if (m.kind == MsgKind::RoundValue) {
        new_path = {m.origin};
    }
    new_path.push_back(self_);
    if (static_cast<int>(new_path.size()) <= n_) {
        Bytes fwd = encode({MsgKind::Relay, m.origin, m.round, m.value, new_path});
        if (!forwarded_.count(fwd)) {
            forwarded_.insert(fwd);
            out.forwards.push_back(std::move(fwd));
        }
    }
    return out;
}

// --- approx consensus ------------------------------------------------------

namespace {

Fixed trimmed_midpoint(std::vector<Fixed> values, int f)
{
    std::sort(values.begin(), values.end());
    if (static_cast<int>(values.size()) <= 2 * f) {
        throw std::logic_error("not enough values to trim");
    }
    Fixed lo = values[f];
    Fixed hi = values[values.size() - 1 - f];
    return Fixed::midpoint(lo, hi);
}

class ApproxBehavior : public Behavior {
  public:
    ApproxBehavior(ProtocolConfig cfg, std::shared_ptr<const Graph> g, NodeId self)
        : cfg_(cfg), graph_(std::move(g)), self_(self), complete_(graph_->is_complete()), rounds_(cfg.round_count())
    {
        if (!complete_) {
            relay_.emplace(*graph_, cfg_.f, self_);
        }
    }

    std::vector<Action> on_init(Fixed input) override
    {
        value_ = input;
        std::vector<Action> actions;
        start_round(actions);
        progress(actions);
        return actions;
    }

    std::vector<Action> on_message(NodeId sender, const Bytes& payload) override
    {
        std::vector<Action> actions;
        if (halted_) {
            return actions;
        }
        auto msg = decode(payload);
        if (!msg) {
            return actions;
        }
        if (msg->kind == MsgKind::Witness) {
            if (complete_ && msg->origin == sender) {
                std::set<NodeId> origins(msg->path.begin(), msg->path.end());
                witness_sets_[msg->round].emplace(sender, std::move(origins));
            }
        } else if (complete_) {
            if (msg->kind == MsgKind::RoundValue && msg->origin == sender && msg->origin != self_) {
                record(msg->origin, msg->round, msg->value);
            }
        } else {
            auto in = relay_->on_message(sender, *msg);
            for (const auto& acc : in.newly_accepted) {
                record(acc.origin, acc.round, acc.value);
            }
            for (Bytes& fwd : in.forwards) {
                actions.push_back(BroadcastAction{std::move(fwd)});
            }
        }
        progress(actions);
        return actions;
    }

  private:
    // round 0 marks a final value: the origin has decided and this stands in
    // for any round it never got around to disseminating
    static constexpr int kFinalRound = 0;

    void record(NodeId origin, int round, Fixed value)
    {
        if (round == kFinalRound) {
            finals_.emplace(origin, value);
        } else {
            accepted_[round].emplace(origin, value);
        }
    }

    bool knows(NodeId origin, int round) const
    {
        auto it = accepted_.find(round);
        return (it != accepted_.end() && it->second.count(origin)) || finals_.count(origin);
    }

    // per-origin round values, letting a final fill any gap
    std::map<NodeId, Fixed> effective(int round) const
    {
        std::map<NodeId, Fixed> out;
        if (auto it = accepted_.find(round); it != accepted_.end()) {
            out = it->second;
        }
        for (const auto& [o, v] : finals_) {
            out.emplace(o, v);
        }
        return out;
    }

    void start_round(std::vector<Action>& actions)
    {
        accepted_[round_].emplace(self_, value_);
        actions.push_back(BroadcastAction{round_value_msg(self_, round_, value_)});
    }

    void progress(std::vector<Action>& actions)
    {
        const int quorum = cfg_.n - cfg_.f;
        bool moved = true;
        while (moved && !decided_) {
            moved = false;
            auto acc = effective(round_);
            if (complete_) {
                if (!witness_sent_.count(round_) && static_cast<int>(acc.size()) >= quorum) {
                    std::vector<NodeId> origins;
                    for (const auto& [o, v] : acc) origins.push_back(o);
                    witness_sets_[round_].emplace(self_, std::set<NodeId>(origins.begin(), origins.end()));
                    actions.push_back(BroadcastAction{encode({MsgKind::Witness, self_, round_, value_, origins})});
                    witness_sent_.insert(round_);
                    moved = true;
                }
                if (witness_sent_.count(round_)) {
                    int covered = 0;
                    for (const auto& [w, set] : witness_sets_[round_]) {
                        bool subset = true;
                        for (NodeId o : set) {
                            if (!knows(o, round_)) {
                                subset = false;
                                break;
                            }
                        }
                        if (subset) ++covered;
                    }
                    if (covered >= quorum) {
                        finish_round(actions);
                        moved = true;
                    }
                }
            } else if (static_cast<int>(acc.size()) >= quorum) {
                finish_round(actions);
                moved = true;
            }
        }
        // deciding is not the end: keep relaying until enough finals are in,
        // otherwise late nodes can lose their last disjoint paths
        if (decided_ && !halted_ && static_cast<int>(finals_.size()) >= quorum) {
            actions.push_back(HaltAction{});
            halted_ = true;
        }
    }

    void finish_round(std::vector<Action>& actions)
    {
        std::vector<Fixed> values;
        for (const auto& [o, v] : effective(round_)) values.push_back(v);
        value_ = trimmed_midpoint(std::move(values), cfg_.f);
        ++round_;
        if (round_ > rounds_) {
            decided_ = true;
            finals_.emplace(self_, value_);
            actions.push_back(BroadcastAction{round_value_msg(self_, kFinalRound, value_)});
            actions.push_back(DecideAction{value_});
            return;
        }
        start_round(actions);
    }

    ProtocolConfig cfg_;
    std::shared_ptr<const Graph> graph_;
    NodeId self_;
    bool complete_;
    int rounds_;
    std::optional<RelayLayer> relay_;
    Fixed value_;
    int round_ = 1;
    bool decided_ = false;
    bool halted_ = false;
    std::map<int, std::map<NodeId, Fixed>> accepted_;
    std::map<NodeId, Fixed> finals_;
    std::map<int, std::map<NodeId, std::set<NodeId>>> witness_sets_;
    std::set<int> witness_sent_;
};

class NaiveBehavior : public Behavior {
  public:
    NaiveBehavior(ProtocolConfig cfg, NodeId self, int rounds) : cfg_(cfg), self_(self), rounds_(rounds)
    {
        if (rounds < 1) {
            throw std::invalid_argument("naive victim needs rounds >= 1");
        }
    }

    std::vector<Action> on_init(Fixed input) override
    {
        value_ = input;
        collected_[1][self_] = value_;
        std::vector<Action> actions;
        actions.push_back(BroadcastAction{round_value_msg(self_, 1, value_)});
        progress(actions);
        return actions;
    }

    std::vector<Action> on_message(NodeId, const Bytes& payload) override
    {
        std::vector<Action> actions;
        if (done_) {
            return actions;
        }
        auto msg = decode(payload);
        if (!msg || msg->kind != MsgKind::RoundValue) {
            return actions;
        }
        if (!seen_.count(payload)) {
            seen_.insert(payload);
            // flood on, and trust whatever the claim says
            actions.push_back(BroadcastAction{payload});
            collected_[msg->round].emplace(msg->origin, msg->value);
        }
        progress(actions);
        return actions;
    }

  private:
    void progress(std::vector<Action>& actions)
    {
        while (!done_ && static_cast<int>(collected_[round_].size()) >= cfg_.n - cfg_.f) {
            std::vector<Fixed> values;
            for (const auto& [o, v] : collected_[round_]) values.push_back(v);
            value_ = Fixed::average(values);
            ++round_;
            if (round_ > rounds_) {
                actions.push_back(DecideAction{value_});
                actions.push_back(HaltAction{});
                done_ = true;
                return;
            }
            collected_[round_].emplace(self_, value_);
            actions.push_back(BroadcastAction{round_value_msg(self_, round_, value_)});
        }
    }

    ProtocolConfig cfg_;
    NodeId self_;
    int rounds_;
    Fixed value_;
    int round_ = 1;
    bool done_ = false;
    std::map<int, std::map<NodeId, Fixed>> collected_;
    std::set<Bytes> seen_;
};

class WaitForAllBehavior : public Behavior {
  public:
    WaitForAllBehavior(ProtocolConfig cfg, NodeId self, int rounds) : cfg_(cfg), self_(self), rounds_(rounds) {}

    std::vector<Action> on_init(Fixed input) override
    {
        value_ = input;
        collected_[1][self_] = value_;
        std::vector<Action> actions;
        actions.push_back(BroadcastAction{round_value_msg(self_, 1, value_)});
        progress(actions);
        return actions;
    }

    std::vector<Action> on_message(NodeId, const Bytes& payload) override
    {
        std::vector<Action> actions;
        if (done_) return actions;
        auto msg = decode(payload);
        if (!msg || msg->kind != MsgKind::RoundValue) return actions;
        if (!seen_.count(payload)) {
            seen_.insert(payload);
            actions.push_back(BroadcastAction{payload});
            collected_[msg->round].emplace(msg->origin, msg->value);
        }
        progress(actions);
        return actions;
    }

  private:
    void progress(std::vector<Action>& actions)
    {
        while (!done_ && static_cast<int>(collected_[round_].size()) >= cfg_.n) {
            std::vector<Fixed> values;
            for (const auto& [o, v] : collected_[round_]) values.push_back(v);
            value_ = Fixed::average(values);
            ++round_;
            if (round_ > rounds_) {
                actions.push_back(DecideAction{value_});
                actions.push_back(HaltAction{});
                done_ = true;
                return;
            }
            collected_[round_].emplace(self_, value_);
            actions.push_back(BroadcastAction{round_value_msg(self_, round_, value_)});
        }
    }

    ProtocolConfig cfg_;
    NodeId self_;
    int rounds_;
    Fixed value_;
    int round_ = 1;
    bool done_ = false;
    std::map<int, std::map<NodeId, Fixed>> collected_;
    std::set<Bytes> seen_;
};

class CrashBehavior : public Behavior {
  public:
    std::vector<Action> on_init(Fixed) override { return {}; }
    std::vector<Action> on_message(NodeId, const Bytes&) override { return {}; }
};

class ReplayBehavior : public Behavior {
  public:
    explicit ReplayBehavior(std::vector<Bytes> script) : script_(std::move(script)) {}

    std::vector<Action> on_init(Fixed) override { return next(); }
    std::vector<Action> on_message(NodeId, const Bytes&) override { return next(); }

  private:
    std::vector<Action> next()
    {
        std::vector<Action> actions;
        if (pos_ < script_.size()) {
            actions.push_back(BroadcastAction{script_[pos_++]});
        }
        if (pos_ >= script_.size()) {
            actions.push_back(HaltAction{});
        }
        return actions;
    }

    std::vector<Bytes> script_;
    std::size_t pos_ = 0;
};

class DecideInputBehavior : public Behavior {
  public:
    std::vector<Action> on_init(Fixed input) override { return {DecideAction{input}, HaltAction{}}; }
    std::vector<Action> on_message(NodeId, const Bytes&) override { return {}; }
};

class DecideConstantBehavior : public Behavior {
  public:
    explicit DecideConstantBehavior(Fixed v) : v_(v) {}
    std::vector<Action> on_init(Fixed) override { return {DecideAction{v_}, HaltAction{}}; }
    std::vector<Action> on_message(NodeId, const Bytes&) override { return {}; }

  private:
    Fixed v_;
};

class ByzantineStream : public Behavior {
  public:
    ByzantineStream(NodeId self, int rounds, std::function<Fixed(int)> value_for) : self_(self), rounds_(rounds), value_for_(std::move(value_for)) {}

    std::vector<Action> on_init(Fixed) override
    {
        std::vector<Action> actions;
        for (int r = 1; r <= rounds_; ++r) {
            actions.push_back(BroadcastAction{round_value_msg(self_, r, value_for_(r))});
        }
        actions.push_back(HaltAction{});
        return actions;
    }

    std::vector<Action> on_message(NodeId, const Bytes&) override { return {}; }

  private:
    NodeId self_;
    int rounds_;
    std::function<Fixed(int)> value_for_;
};

} // namespace

BehaviorFactory approx_consensus_behavior(const ProtocolConfig& cfg, const Graph& g, NodeId self)
{
    cfg.validate();
    if (cfg.n != g.node_count()) {
        throw std::invalid_argument("config n does not match graph");
    }
    auto feas = check_feasibility(g, cfg.f);
    if (!feas.feasible()) {
        throw std::invalid_argument("graph infeasible for f=" + std::to_string(cfg.f) + ": n=" +
                                    std::to_string(feas.n) + " kappa=" + std::to_string(feas.kappa));
    }
    auto shared = std::make_shared<const Graph>(g);
    return [cfg, shared, self]() { return std::make_unique<ApproxBehavior>(cfg, shared, self); };
}

BehaviorFactory naive_behavior(const ProtocolConfig& cfg, const Graph& g, NodeId self, int rounds)
{
    if (self < 0 || self >= g.node_count()) {
        throw std::invalid_argument("bad node id for naive victim");
    }
    return [cfg, self, rounds]() { return std::make_unique<NaiveBehavior>(cfg, self, rounds); };
}

BehaviorFactory crash_behavior()
{
    return []() { return std::make_unique<CrashBehavior>(); };
}

BehaviorFactory replay_behavior(std::vector<Bytes> script)
{
    return [script]() { return std::make_unique<ReplayBehavior>(script); };
}

BehaviorFactory decide_input_behavior()
{
    return []() { return std::make_unique<DecideInputBehavior>(); };
}

BehaviorFactory decide_constant_behavior(Fixed value)
{
    return [value]() { return std::make_unique<DecideConstantBehavior>(value); };
}

BehaviorFactory wait_for_all_behavior(const ProtocolConfig& cfg, NodeId self, int rounds)
{
    return [cfg, self, rounds]() { return std::make_unique<WaitForAllBehavior>(cfg, self, rounds); };
}

BehaviorFactory byzantine_extreme(const ProtocolConfig& cfg, NodeId self, Fixed value)
{
    int rounds = cfg.round_count();
    return [self, rounds, value]() {
        return std::make_unique<ByzantineStream>(self, rounds, [value](int) { return value; });
    };
}

BehaviorFactory byzantine_random_in_range(const ProtocolConfig& cfg, NodeId self, std::uint64_t seed)
{
    int rounds = cfg.round_count();
    Fixed lo = cfg.lower, hi = cfg.upper;
    return [self, rounds, lo, hi, seed]() {
        auto pick = [lo, hi, seed, self](int r) {
            std::uint64_t h = splitmix64(splitmix64(seed ^ static_cast<std::uint64_t>(self) * 0x9e3779b9ULL) ^
                                         static_cast<std::uint64_t>(r));
            std::uint64_t span = static_cast<std::uint64_t>((hi - lo).units()) + 1;
            return lo + Fixed::from_units(static_cast<std::int64_t>(h % span));
        };
        return std::make_unique<ByzantineStream>(self, rounds, pick);
    };
}

BehaviorFactory byzantine_silent()
{
    return crash_behavior();
}

// --- condition checker -----------------------------------------------------

std::map<NodeId, Fixed> decisions_of(const Trace& trace, const NodeSet& faulty)
{
    std::map<NodeId, Fixed> out;
    for (const Event& e : trace.events) {
        if (e.kind == EventKind::Decide && !faulty.count(e.actor.orig) && e.value) {
            out.emplace(e.actor.orig, *e.value);
        }
    }
    return out;
}

ConditionReport check_conditions(const Trace& trace, const NodeSet& faulty,
                                 const std::map<NodeId, Fixed>& inputs, Fixed epsilon)
{
    ConditionReport rep;
    auto decisions = decisions_of(trace, faulty);
    std::set<NodeId> halted;
    for (const Event& e : trace.events) {
        if (e.kind == EventKind::Halt) {
            halted.insert(e.actor.orig);
        }
    }

    std::optional<Fixed> in_min, in_max;
    for (const auto& [u, v] : inputs) {
        if (faulty.count(u)) continue;
        if (!in_min || v < *in_min) in_min = v;
        if (!in_max || v > *in_max) in_max = v;
    }

    for (const auto& [u, v] : inputs) {
        if (faulty.count(u)) continue;
        auto d = decisions.find(u);
        if (d == decisions.end() || !halted.count(u)) {
            if (rep.termination.holds) {
                rep.termination = {false, "node " + std::to_string(u) + " never decided and halted"};
            }
            continue;
        }
        if (in_min && (d->second < *in_min || d->second > *in_max) && rep.validity.holds) {
            rep.validity = {false, "node " + std::to_string(u) + " decided " + d->second.str() +
                                       " outside [" + in_min->str() + ", " + in_max->str() + "]"};
        }
    }

    for (auto it = decisions.begin(); it != decisions.end(); ++it) {
        for (auto jt = std::next(it); jt != decisions.end(); ++jt) {
            if ((it->second - jt->second).abs() > epsilon && rep.agreement.holds) {
                rep.agreement = {false, "nodes " + std::to_string(it->first) + " and " + std::to_string(jt->first) +
                                            " decided " + it->second.str() + " vs " + jt->second.str()};
            }
        }
    }
    return rep;
}

std::map<int, std::vector<Fixed>> round_values_by_round(const Trace& trace, const NodeSet& faulty)
{
    std::map<int, std::vector<Fixed>> out;
    for (const Event& e : trace.events) {
        if (e.kind != EventKind::Send || !e.payload || faulty.count(e.actor.orig)) continue;
        auto msg = decode(*e.payload);
        if (msg && msg->kind == MsgKind::RoundValue && msg->origin == e.actor.orig && msg->round >= 1) {
            out[msg->round].push_back(msg->value);
        }
    }
    return out;
}

} // namespace lbcast

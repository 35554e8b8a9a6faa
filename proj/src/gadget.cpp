#include "lbcast/gadget.hpp"

#include <algorithm>
#include <array>
#include <sstream>

namespace lbcast {

namespace {

void require(bool cond, const std::string& what)
{
    if (!cond) {
        throw std::invalid_argument(what);
    }
}

bool disjoint(const NodeSet& a, const NodeSet& b)
{
    for (NodeId x : a) {
        if (b.count(x)) return false;
    }
    return true;
}

NodeSet union_all(std::initializer_list<const NodeSet*> sets)
{
    NodeSet out;
    for (const NodeSet* s : sets) {
        out.insert(s->begin(), s->end());
    }
    return out;
}

} // namespace

void validate_three_partition(const Graph& g, const ThreePartition& p, int f)
{
    require(!p.a.empty() && !p.b.empty(), "partition parts A and B must be non-empty");
    require(disjoint(p.a, p.b) && disjoint(p.a, p.c) && disjoint(p.b, p.c), "partition parts must be disjoint");
    NodeSet all = union_all({&p.a, &p.b, &p.c});
    require(static_cast<int>(all.size()) == g.node_count(), "partition must cover the node set");
    for (NodeId u : all) {
        require(u >= 0 && u < g.node_count(), "partition contains unknown node");
    }
    require(static_cast<int>(p.a.size()) <= f && static_cast<int>(p.b.size()) <= f &&
                static_cast<int>(p.c.size()) <= f,
            "every partition part must have size <= f");
}

void validate_cut_partition(const Graph& g, const CutPartition& p, int f)
{
    require(!p.a.empty() && !p.b.empty(), "sides A and B must be non-empty");
    require(disjoint(p.a, p.b) && disjoint(p.a, p.c1) && disjoint(p.a, p.c2) && disjoint(p.b, p.c1) &&
                disjoint(p.b, p.c2) && disjoint(p.c1, p.c2),
            "partition parts must be disjoint");
    NodeSet all = union_all({&p.a, &p.b, &p.c1, &p.c2});
    require(static_cast<int>(all.size()) == g.node_count(), "partition must cover the node set");
    require(static_cast<int>(p.c1.size()) <= f && static_cast<int>(p.c2.size()) <= f,
            "cut halves must have size <= f");
    for (NodeId u : p.a) {
        for (NodeId v : p.b) {
            require(!g.has_edge(u, v), "no edge may join A and B");
        }
    }
}

GadgetGraph build_theorem1_gadget(const Graph& g, const ThreePartition& p, const ProtocolConfig& cfg,
                                  std::int64_t delta, bool mirror)
{
    require(g.is_complete(), "node-count construction needs a complete source graph");
    validate_three_partition(g, p, cfg.f);

    GadgetGraph gg;
    gg.source = g;
    gg.theorem = 1;
    gg.mirror = mirror;
    gg.three = p;

    std::set<CopyId> copies;
    auto copies_of = [&](NodeId u) -> std::vector<CopyId> {
        if (p.c.count(u)) {
            return {CopyId{u, Tag::Crash}, CopyId{u, Tag::Slow}};
        }
        return {sole(u)};
    };
    for (NodeId u : g.nodes()) {
        for (CopyId c : copies_of(u)) {
            copies.insert(c);
        }
    }
    gg.topology = Topology(copies);

    for (const auto& [u, v] : g.edges()) {
        const bool uc = p.c.count(u) > 0, vc = p.c.count(v) > 0;
        if (!uc && !vc) {
            gg.topology.add_undirected(sole(u), sole(v));
        } else if (uc && vc) {
            gg.topology.add_undirected({u, Tag::Crash}, {v, Tag::Crash});
            gg.topology.add_undirected({u, Tag::Slow}, {v, Tag::Slow});
        } else {
            NodeId out = uc ? v : u;
            NodeId in = uc ? u : v;
            gg.topology.add_undirected(sole(out), {in, Tag::Slow});
        }
    }

    for (CopyId c : copies) {
        if (c.tag == Tag::Crash) {
            gg.inputs[c] = cfg.upper;
            gg.start_modes[c] = StartMode::crashed();
        } else if (c.tag == Tag::Slow) {
            gg.inputs[c] = mirror ? cfg.lower : cfg.upper;
            gg.start_modes[c] = StartMode::delayed_until(delta);
        } else {
            gg.inputs[c] = p.a.count(c.orig) ? cfg.lower : cfg.upper;
            gg.start_modes[c] = StartMode::normal();
        }
    }
    return gg;
}

GadgetGraph build_theorem2_gadget(const Graph& g, const CutPartition& p, const ProtocolConfig& cfg,
                                  std::int64_t delta)
{
    validate_cut_partition(g, p, cfg.f);

    GadgetGraph gg;
    gg.source = g;
    gg.theorem = 2;
    gg.cut = p;

    enum Part { PA, PB, PC1, PC2 };
    auto part_of = [&](NodeId u) {
        if (p.a.count(u)) return PA;
        if (p.b.count(u)) return PB;
        if (p.c1.count(u)) return PC1;
        return PC2;
    };

    std::set<CopyId> copies;
    for (NodeId u : g.nodes()) {
        switch (part_of(u)) {
        case PA:
        case PB:
            copies.insert({u, Tag::Lo});
            copies.insert({u, Tag::Hi});
            break;
        case PC1:
            copies.insert({u, Tag::Lo});
            copies.insert({u, Tag::Hi});
            copies.insert({u, Tag::Crash});
            break;
        case PC2:
            copies.insert(sole(u));
            break;
        }
    }
    gg.topology = Topology(copies);

    for (const auto& [u, v] : g.edges()) {
        Part pu = part_of(u), pv = part_of(v);
        // orient so the pair below is in a canonical order
        NodeId x = u, y = v;
        Part px = pu, py = pv;
        if (px > py) {
            std::swap(x, y);
            std::swap(px, py);
        }
        if ((px == PA && py == PA) || (px == PB && py == PB)) {
            gg.topology.add_undirected({x, Tag::Lo}, {y, Tag::Lo});
            gg.topology.add_undirected({x, Tag::Hi}, {y, Tag::Hi});
        } else if (px == PC1 && py == PC1) {
            gg.topology.add_undirected({x, Tag::Lo}, {y, Tag::Lo});
            gg.topology.add_undirected({x, Tag::Hi}, {y, Tag::Hi});
            gg.topology.add_undirected({x, Tag::Crash}, {y, Tag::Crash});
        } else if (px == PC2 && py == PC2) {
            gg.topology.add_undirected(sole(x), sole(y));
        } else if (px == PC1 && py == PC2) {
            gg.topology.add_undirected({x, Tag::Hi}, sole(y));
            gg.topology.add_directed(sole(y), {x, Tag::Lo});
        } else if ((px == PA || px == PB) && py == PC1) {
            gg.topology.add_undirected({x, Tag::Lo}, {y, Tag::Lo});
            gg.topology.add_undirected({x, Tag::Hi}, {y, Tag::Hi});
        } else if (px == PA && py == PC2) {
            gg.topology.add_undirected({x, Tag::Lo}, sole(y));
            gg.topology.add_directed(sole(y), {x, Tag::Hi});
        } else if (px == PB && py == PC2) {
            gg.topology.add_undirected({x, Tag::Hi}, sole(y));
            gg.topology.add_directed(sole(y), {x, Tag::Lo});
        } else {
            throw std::logic_error("unexpected A-B edge survived validation");
        }
    }

    for (CopyId c : copies) {
        const Part part = part_of(c.orig);
        if (c.tag == Tag::Crash) {
            gg.inputs[c] = cfg.upper;
            gg.start_modes[c] = StartMode::crashed();
        } else if (c.tag == Tag::Lo) {
            gg.inputs[c] = cfg.lower;
            gg.start_modes[c] = part == PC1 ? StartMode::delayed_until(delta) : StartMode::normal();
        } else if (c.tag == Tag::Hi) {
            gg.inputs[c] = cfg.upper;
            gg.start_modes[c] = part == PC1 ? StartMode::delayed_until(delta) : StartMode::normal();
        } else {
            gg.inputs[c] = cfg.upper;
            gg.start_modes[c] = StartMode::normal();
        }
    }
    return gg;
}

std::vector<std::string> validate_gadget(const GadgetGraph& gg)
{
    std::vector<std::string> violations;
    const Graph& g = gg.source;

    for (const auto& [a, b] : gg.topology.undirected_edges()) {
        if (a.orig == b.orig) {
            violations.push_back("copies of node " + std::to_string(a.orig) + " are adjacent");
        } else if (!g.has_edge(a.orig, b.orig)) {
            violations.push_back("edge " + a.str() + "-" + b.str() + " does not project onto a source edge");
        }
    }
    for (const auto& [from, to] : gg.topology.directed_edges()) {
        if (from.orig == to.orig) {
            violations.push_back("copies of node " + std::to_string(from.orig) + " are adjacent");
        } else if (!g.has_edge(from.orig, to.orig)) {
            violations.push_back("edge " + from.str() + "->" + to.str() + " does not project onto a source edge");
        }
    }

    for (CopyId x : gg.topology.copies()) {
        std::map<NodeId, int> per_original;
        for (CopyId in : gg.topology.in_neighbors(x)) {
            per_original[in.orig]++;
        }
        for (const auto& [v, count] : per_original) {
            if (count > 1) {
                violations.push_back("copy " + x.str() + " hears " + std::to_string(count) + " copies of node " +
                                     std::to_string(v));
            }
        }
    }
    return violations;
}

std::map<CopyId, BehaviorFactory> lift_behaviors(const GadgetGraph& gg,
                                                 const std::map<NodeId, BehaviorFactory>& algo)
{
    std::map<CopyId, BehaviorFactory> out;
    for (CopyId c : gg.topology.copies()) {
        auto it = algo.find(c.orig);
        if (it == algo.end()) {
            throw std::invalid_argument("no behavior for node " + std::to_string(c.orig));
        }
        out[c] = it->second;
    }
    return out;
}

GadgetText parse_gadget_text(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::optional<int> want;
    std::set<CopyId> copies;
    std::vector<std::array<std::string, 3>> edges; // tag, a, b
    GadgetText out;
    std::map<CopyId, Fixed> inputs;
    std::map<CopyId, StartMode> modes;
    auto bad = [&](const std::string& what) {
        return std::invalid_argument("gadget line " + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        try {
            if (tag == "n") {
                int n = 0;
                if (!(ls >> n)) throw bad("bad copy count");
                want = n;
            } else if (tag == "c") {
                std::string c;
                if (!(ls >> c)) throw bad("bad copy line");
                copies.insert(CopyId::parse(c));
            } else if (tag == "e" || tag == "d") {
                std::string a, b;
                if (!(ls >> a >> b)) throw bad("bad edge line");
                edges.push_back({tag, a, b});
            } else if (tag == "i") {
                std::string c, v;
                if (!(ls >> c >> v)) throw bad("bad input line");
                inputs[CopyId::parse(c)] = Fixed::parse(v);
            } else if (tag == "m") {
                std::string c, m;
                if (!(ls >> c >> m)) throw bad("bad mode line");
                modes[CopyId::parse(c)] = StartMode::parse(m);
            } else {
                throw bad("unknown record '" + tag + "'");
            }
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception& e) {
            throw bad(e.what());
        }
    }
    if (!want || static_cast<int>(copies.size()) != *want) {
        throw std::invalid_argument("gadget text: copy count mismatch");
    }
    out.topology = Topology(copies);
    for (const auto& [kind, a, b] : edges) {
        if (kind == "e") {
            out.topology.add_undirected(CopyId::parse(a), CopyId::parse(b));
        } else {
            out.topology.add_directed(CopyId::parse(a), CopyId::parse(b));
        }
    }
    out.inputs = std::move(inputs);
    out.start_modes = std::move(modes);
    return out;
}

std::string GadgetGraph::serialize() const
{
    std::ostringstream out;
    out << "n " << topology.copies().size() << "\n";
    for (CopyId c : topology.copies()) {
        out << "c " << c.str() << "\n";
    }
    for (const auto& [a, b] : topology.undirected_edges()) {
        out << "e " << a.str() << " " << b.str() << "\n";
    }
    for (const auto& [from, to] : topology.directed_edges()) {
        out << "d " << from.str() << " " << to.str() << "\n";
    }
    for (const auto& [c, v] : inputs) {
        out << "i " << c.str() << " " << v.str() << "\n";
    }
    for (const auto& [c, m] : start_modes) {
        out << "m " << c.str() << " " << m.str() << "\n";
    }
    return out.str();
}

} // namespace lbcast

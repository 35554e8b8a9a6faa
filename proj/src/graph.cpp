#include "lbcast/graph.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lbcast {

Graph::Graph(int n) : n_(n)
{
    if (n < 1) {
        throw std::invalid_argument("graph needs at least one node");
    }
}

Graph Graph::complete(int n)
{
    Graph g(n);
    for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
            g.add_edge(u, v);
        }
    }
    return g;
}

Graph Graph::cycle(int n)
{
    Graph g(n);
    for (int u = 0; u < n; ++u) {
        g.add_edge(u, (u + 1) % n);
    }
    return g;
}

void Graph::check_node(NodeId u) const
{
    if (u < 0 || u >= n_) {
        throw std::invalid_argument("node id " + std::to_string(u) + " out of range");
    }
}

void Graph::add_edge(NodeId u, NodeId v)
{
    check_node(u);
    check_node(v);
    if (u == v) {
        throw std::invalid_argument("self-loop at node " + std::to_string(u));
    }
    edges_.insert({std::min(u, v), std::max(u, v)});
}

bool Graph::has_edge(NodeId u, NodeId v) const
{
    return edges_.count({std::min(u, v), std::max(u, v)}) > 0;
}

bool Graph::is_complete() const
{
    return static_cast<long>(edges_.size()) == static_cast<long>(n_) * (n_ - 1) / 2;
}

std::vector<NodeId> Graph::neighbors(NodeId u) const
{
    check_node(u);
    std::vector<NodeId> out;
    for (const auto& [a, b] : edges_) {
        if (a == u) out.push_back(b);
        if (b == u) out.push_back(a);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<NodeId> Graph::nodes() const
{
    std::vector<NodeId> out(n_);
    for (int i = 0; i < n_; ++i) out[i] = i;
    return out;
}

std::vector<std::vector<NodeId>> Graph::components_without(const NodeSet& removed) const
{
    std::vector<bool> gone(n_, false);
    for (NodeId u : removed) {
        check_node(u);
        gone[u] = true;
    }
    std::vector<std::vector<NodeId>> adj(n_);
    for (const auto& [a, b] : edges_) {
        if (!gone[a] && !gone[b]) {
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
    }
    std::vector<std::vector<NodeId>> comps;
    std::vector<bool> seen(n_, false);
    for (int s = 0; s < n_; ++s) {
        if (gone[s] || seen[s]) continue;
        std::vector<NodeId> comp;
        std::queue<NodeId> q;
        q.push(s);
        seen[s] = true;
        while (!q.empty()) {
            NodeId u = q.front();
            q.pop();
            comp.push_back(u);
            for (NodeId v : adj[u]) {
                if (!seen[v]) {
                    seen[v] = true;
                    q.push(v);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
    }
    return comps;
}

bool Graph::connected_without(const NodeSet& removed) const
{
    return components_without(removed).size() <= 1;
}

Graph Graph::parse(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::optional<Graph> g;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "n") {
            int n = 0;
            if (!(ls >> n) || n < 1) {
                throw std::invalid_argument("line " + std::to_string(lineno) + ": bad node count");
            }
            if (g) {
                throw std::invalid_argument("line " + std::to_string(lineno) + ": duplicate n line");
            }
            g.emplace(n);
        } else if (tag == "e") {
            int u = 0, v = 0;
            if (!(ls >> u >> v)) {
                throw std::invalid_argument("line " + std::to_string(lineno) + ": bad edge line");
            }
            if (!g) {
                throw std::invalid_argument("line " + std::to_string(lineno) + ": edge before n line");
            }
            try {
                g->add_edge(u, v);
            } catch (const std::invalid_argument& e) {
                throw std::invalid_argument("line " + std::to_string(lineno) + ": " + e.what());
            }
        } else {
            throw std::invalid_argument("line " + std::to_string(lineno) + ": unknown record '" + tag + "'");
        }
    }
    if (!g) {
        throw std::invalid_argument("graph file has no n line");
    }
    return *g;
}

Graph Graph::load_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open graph file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string Graph::serialize() const
{
    std::ostringstream out;
    out << "n " << n_ << "\n";
    for (const auto& [u, v] : edges_) {
        out << "e " << u << " " << v << "\n";
    }
    return out.str();
}

void validate_fault_model(const Graph& g, FaultModel fm)
{
    if (fm.f <= 0 || fm.f >= g.node_count()) {
        throw std::invalid_argument("fault bound f=" + std::to_string(fm.f) +
                                    " must satisfy 0 < f < n=" + std::to_string(g.node_count()));
    }
}

NodeSet CutPartition::cut() const
{
    NodeSet out = c1;
    out.insert(c2.begin(), c2.end());
    return out;
}

namespace {

// Unit-capacity max-flow on the node-split digraph; counts internally
// disjoint s-t paths for non-adjacent s, t.
int st_vertex_connectivity(const Graph& g, NodeId s, NodeId t)
{
    const int n = g.node_count();
    // node v -> v_in = 2v, v_out = 2v+1
    const int big = 2 * n;
    std::vector<std::vector<int>> cap(2 * n, std::vector<int>(2 * n, 0));
    for (int v = 0; v < n; ++v) {
        cap[2 * v][2 * v + 1] = (v == s || v == t) ? big : 1;
    }
    for (const auto& [u, v] : g.edges()) {
        cap[2 * u + 1][2 * v] = big;
        cap[2 * v + 1][2 * u] = big;
    }
    const int src = 2 * s + 1, dst = 2 * t;
    int flow = 0;
    while (true) {
        std::vector<int> prev(2 * n, -1);
        std::queue<int> q;
        q.push(src);
        prev[src] = src;
        while (!q.empty() && prev[dst] == -1) {
            int u = q.front();
            q.pop();
            for (int v = 0; v < 2 * n; ++v) {
                if (prev[v] == -1 && cap[u][v] > 0) {
                    prev[v] = u;
                    q.push(v);
                }
            }
        }
        if (prev[dst] == -1) break;
        for (int v = dst; v != src; v = prev[v]) {
            cap[prev[v]][v] -= 1;
            cap[v][prev[v]] += 1;
        }
        ++flow;
        if (flow > n) break; // defensive; cannot exceed n
    }
    return flow;
}

std::vector<std::pair<NodeId, NodeId>> nonadjacent_pairs(const Graph& g)
{
    std::vector<std::pair<NodeId, NodeId>> pairs;
    const int n = g.node_count();
    for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
            if (!g.has_edge(u, v)) {
                pairs.push_back({u, v});
            }
        }
    }
    return pairs;
}

} // namespace

int vertex_connectivity_serial(const Graph& g)
{
    const int n = g.node_count();
    if (g.is_complete()) {
        return n - 1;
    }
    if (!g.connected()) {
        return 0;
    }
    int best = n - 1;
    for (const auto& [u, v] : nonadjacent_pairs(g)) {
        best = std::min(best, st_vertex_connectivity(g, u, v));
    }
    return best;
}

int vertex_connectivity(const Graph& g)
{
    const int n = g.node_count();
    if (g.is_complete()) {
        return n - 1;
    }
    if (!g.connected()) {
        return 0;
    }
    auto pairs = nonadjacent_pairs(g);
#ifdef _OPENMP
    if (n >= 24) {
        int best = n - 1;
#pragma omp parallel for schedule(dynamic) reduction(min : best)
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            best = std::min(best, st_vertex_connectivity(g, pairs[i].first, pairs[i].second));
        }
        return best;
    }
#endif
    int best = n - 1;
    for (const auto& [u, v] : pairs) {
        best = std::min(best, st_vertex_connectivity(g, u, v));
    }
    return best;
}

std::optional<NodeSet> find_vertex_cut(const Graph& g, int k)
{
    if (k < 0) {
        throw std::invalid_argument("cut size bound must be non-negative");
    }
    const int n = g.node_count();
    // size-then-lexicographic enumeration keeps the result stable for a
    // fixed graph encoding
    for (int size = 0; size <= std::min(k, n - 2); ++size) {
        std::vector<int> idx(size);
        for (int i = 0; i < size; ++i) idx[i] = i;
        while (true) {
            NodeSet cand(idx.begin(), idx.end());
            if (g.components_without(cand).size() >= 2) {
                return cand;
            }
            int i = size - 1;
            while (i >= 0 && idx[i] == n - size + i) --i;
            if (i < 0) break;
            ++idx[i];
            for (int j = i + 1; j < size; ++j) idx[j] = idx[j - 1] + 1;
        }
    }
    return std::nullopt;
}

std::pair<NodeSet, NodeSet> bipartition_around_cut(const Graph& g, const NodeSet& cut)
{
    auto comps = g.components_without(cut);
    if (comps.size() < 2) {
        throw std::invalid_argument("given set is not a vertex cut");
    }
    NodeSet a(comps[0].begin(), comps[0].end());
    NodeSet b;
    for (std::size_t i = 1; i < comps.size(); ++i) {
        b.insert(comps[i].begin(), comps[i].end());
    }
    return {a, b};
}

std::pair<NodeSet, NodeSet> split_set(const NodeSet& s, int f)
{
    if (static_cast<int>(s.size()) > 2 * f) {
        throw std::invalid_argument("set of size " + std::to_string(s.size()) +
                                    " cannot split into halves of size <= " + std::to_string(f));
    }
    NodeSet first, second;
    int taken = 0;
    const int want = std::min<int>(f, static_cast<int>(s.size()));
    for (NodeId u : s) {
        if (taken < want) {
            first.insert(u);
            ++taken;
        } else {
            second.insert(u);
        }
    }
    return {first, second};
}

ThreePartition three_partition(const Graph& g, int f)
{
    const int n = g.node_count();
    if (f < 1 || n <= f) {
        throw std::invalid_argument("need n > f >= 1");
    }
    if (n > 3 * f) {
        throw std::invalid_argument("n=" + std::to_string(n) + " exceeds 3f=" + std::to_string(3 * f) +
                                    "; three-way partition with parts <= f impossible");
    }
    const int size_a = (n + 2) / 3;
    const int size_b = (n - size_a + 1) / 2;
    ThreePartition p;
    for (int u = 0; u < n; ++u) {
        if (u < size_a) {
            p.a.insert(u);
        } else if (u < size_a + size_b) {
            p.b.insert(u);
        } else {
            p.c.insert(u);
        }
    }
    return p;
}

FeasibilityReport check_feasibility(const Graph& g, int f)
{
    validate_fault_model(g, FaultModel{f});
    FeasibilityReport r;
    r.n = g.node_count();
    r.f = f;
    r.kappa = vertex_connectivity(g);
    r.count_ok = r.n >= 3 * f + 1;
    r.connectivity_ok = r.kappa >= 2 * f + 1;
    if (!r.count_ok) {
        r.count_witness = three_partition(g, f);
    }
    if (!r.connectivity_ok) {
        auto cut = find_vertex_cut(g, 2 * f);
        if (cut) {
            auto [a, b] = bipartition_around_cut(g, *cut);
            auto [c1, c2] = split_set(*cut, f);
            r.connectivity_witness = CutPartition{a, b, c1, c2};
        }
    }
    return r;
}

} // namespace lbcast

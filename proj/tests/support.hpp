#pragma once

#include "lbcast/graph.hpp"
#include "lbcast/sim.hpp"

#include <random>

namespace lbcast::testing {

// Independent reference for vertex connectivity: try every vertex subset by
// increasing size and report the first whose removal disconnects what is
// left; complete graphs fall back to n-1.
inline int brute_force_connectivity(const Graph& g)
{
    const int n = g.node_count();
    for (int size = 0; size <= n - 2; ++size) {
        std::vector<int> idx(size);
        for (int i = 0; i < size; ++i) idx[i] = i;
        while (true) {
            NodeSet cand(idx.begin(), idx.end());
            if (g.components_without(cand).size() >= 2) {
                return size;
            }
            int i = size - 1;
            while (i >= 0 && idx[i] == n - size + i) --i;
            if (i < 0) break;
            ++idx[i];
            for (int j = i + 1; j < size; ++j) idx[j] = idx[j - 1] + 1;
        }
    }
    return n - 1;
}

inline Graph diamond_graph()
{
    Graph g(4); // 0 and 3 are the separated pair, 1 and 2 the cut
    g.add_edge(0, 1);
    g.add_edge(0, 2);
    g.add_edge(3, 1);
    g.add_edge(3, 2);
    g.add_edge(1, 2);
    return g;
}

inline Graph petersen_graph()
{
    Graph g(10);
    for (int i = 0; i < 5; ++i) {
        g.add_edge(i, (i + 1) % 5);       // outer cycle
        g.add_edge(5 + i, 5 + (i + 2) % 5); // inner pentagram
        g.add_edge(i, 5 + i);             // spokes
    }
    return g;
}

inline Graph wheel_graph(int rim)
{
    Graph g(rim + 1);
    for (int i = 1; i <= rim; ++i) {
        g.add_edge(0, i);
        g.add_edge(i, i % rim + 1);
    }
    return g;
}

inline Graph random_graph(int n, double p, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    Graph g(n);
    for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
            if (coin(rng) < p) {
                g.add_edge(u, v);
            }
        }
    }
    return g;
}

inline Graph random_connected_graph(int n, double p, std::uint64_t seed)
{
    for (std::uint64_t attempt = 0;; ++attempt) {
        Graph g = random_graph(n, p, seed + attempt * 7919);
        if (g.connected()) {
            return g;
        }
    }
}

} // namespace lbcast::testing

#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace lbcast {

using NodeId = int;
using NodeSet = std::set<NodeId>;

// Undirected simple graph over dense node ids 0..n-1.
class Graph {
  public:
    Graph() = default;
    explicit Graph(int n);

    static Graph complete(int n);
    static Graph cycle(int n);

    int node_count() const { return n_; }
    const std::set<std::pair<NodeId, NodeId>>& edges() const { return edges_; }

    void add_edge(NodeId u, NodeId v);
    bool has_edge(NodeId u, NodeId v) const;
    bool is_complete() const;

    // Sorted neighbor list.
    std::vector<NodeId> neighbors(NodeId u) const;
    std::vector<NodeId> nodes() const;

    // Connectivity of the subgraph induced by keeping `keep`; empty set is
    // treated as connected.
    bool connected_without(const NodeSet& removed) const;
    bool connected() const { return connected_without({}); }

    // Components of g - removed, each sorted, ordered by smallest member.
    std::vector<std::vector<NodeId>> components_without(const NodeSet& removed) const;

    // Text format: `n <count>` then `e <u> <v>` lines; `#` starts a comment.
    static Graph parse(const std::string& text);
    static Graph load_file(const std::string& path);
    std::string serialize() const;

  private:
    void check_node(NodeId u) const;

    int n_ = 0;
    std::set<std::pair<NodeId, NodeId>> edges_;
};

struct FaultModel {
    int f = 0;
};

// Requires 0 < f < n.
void validate_fault_model(const Graph& g, FaultModel fm);

struct ThreePartition {
    NodeSet a;
    NodeSet b;
    NodeSet c;
};

struct CutPartition {
    NodeSet a;
    NodeSet b;
    NodeSet c1;
    NodeSet c2;

    NodeSet cut() const;
};

// Minimum number of vertex removals that disconnect g; n-1 for a complete
// graph, 0 when already disconnected. Computed by max-flow over the node
// split transformation; `vertex_connectivity_serial` is the plain loop kept
// as the reference path, the default dispatches to an OpenMP-parallel sweep
// over source/sink pairs for larger graphs.
int vertex_connectivity(const Graph& g);
int vertex_connectivity_serial(const Graph& g);

// First vertex cut of size <= k in size-then-lexicographic order, if any.
std::optional<NodeSet> find_vertex_cut(const Graph& g, int k);

// (A, B): A = component of g - cut containing the smallest node id, B = rest.
// Throws if cut is not a vertex cut.
std::pair<NodeSet, NodeSet> bipartition_around_cut(const Graph& g, const NodeSet& cut);

// Deterministic lowest-id-first split into two sets of size <= f each.
std::pair<NodeSet, NodeSet> split_set(const NodeSet& s, int f);

// Deterministic partition with |A|,|B|,|C| <= f, A and B non-empty.
// Requires f >= 1 and f < n <= 3f.
ThreePartition three_partition(const Graph& g, int f);

struct FeasibilityReport {
    int n = 0;
    int f = 0;
    int kappa = 0;
    bool count_ok = false;        // n >= 3f+1
    bool connectivity_ok = false; // kappa >= 2f+1
    std::optional<ThreePartition> count_witness;
    std::optional<CutPartition> connectivity_witness;

    bool feasible() const { return count_ok && connectivity_ok; }
};

FeasibilityReport check_feasibility(const Graph& g, int f);

} // namespace lbcast

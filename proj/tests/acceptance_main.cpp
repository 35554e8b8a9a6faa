// Acceptance suite: one line per criterion, each timed against its budget.
// Criteria 2 and 3 drive the installed CLI binary (LBCAST_BIN) end to end;
// everything else runs in-process.

#include "lbcast/forge.hpp"
#include "lbcast/scenario.hpp"
#include "lbcast/sweep.hpp"

#include "support.hpp"

#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace lbcast;
using namespace lbcast::testing;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

struct Criterion {
    std::string name;
    double budget_s;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    std::vector<std::string> problems;

    Criterion(std::string n, double budget) : name(std::move(n)), budget_s(budget) {}

    void expect(bool ok, const std::string& what)
    {
        if (!ok) problems.push_back(what);
    }

    void finish()
    {
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (secs > budget_s) {
            problems.push_back("runtime " + std::to_string(secs) + "s exceeds " + std::to_string(budget_s) + "s");
        }
        char line[512];
        if (problems.empty()) {
            std::snprintf(line, sizeof(line), "PASS  %-55s (%6.2fs)", name.c_str(), secs);
            std::cout << line << "\n";
        } else {
            std::snprintf(line, sizeof(line), "FAIL  %-55s (%6.2fs)", name.c_str(), secs);
            std::cout << line << "\n";
            for (const auto& p : problems) {
                std::cout << "      - " << p << "\n";
            }
            ++g_failures;
        }
    }
};

ProtocolConfig config(int n, int f)
{
    ProtocolConfig cfg;
    cfg.epsilon = Fixed::parse("0.01");
    cfg.lower = Fixed::from_int(0);
    cfg.upper = Fixed::from_int(1);
    cfg.n = n;
    cfg.f = f;
    return cfg;
}

std::map<NodeId, BehaviorFactory> naive_victims(const Graph& g, const ProtocolConfig& cfg)
{
    std::map<NodeId, BehaviorFactory> out;
    for (NodeId u : g.nodes()) {
        out[u] = naive_behavior(cfg, g, u, 8);
    }
    return out;
}

struct CmdResult {
    int exit_code = -1;
    std::string output;
};

CmdResult run_cli(const std::string& args)
{
    CmdResult res;
    const char* bin = std::getenv("LBCAST_BIN");
    if (!bin) {
        res.output = "LBCAST_BIN not set";
        return res;
    }
    std::string cmd = std::string(bin) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) {
        res.output = "popen failed";
        return res;
    }
    std::array<char, 4096> buf{};
    std::size_t got;
    while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) {
        res.output.append(buf.data(), got);
    }
    int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

fs::path scratch_dir()
{
    fs::path dir = fs::temp_directory_path() / "lbcast_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& p, const std::string& content)
{
    std::ofstream out(p);
    out << content;
}

// ---------------------------------------------------------------------------

void criterion_structural_lemma()
{
    Criterion c("1. structural lemma on 200+ random gadgets per theorem", 10.0);
    std::mt19937_64 rng(424242);

    int built = 0;
    while (built < 200) {
        int f = 1 + static_cast<int>(rng() % 3);
        int low = std::max(2, f + 1);
        int n = low + static_cast<int>(rng() % (3 * f - low + 1));
        Graph g = Graph::complete(n);
        // random partition honoring the size bounds
        std::vector<NodeId> ids(n);
        for (int i = 0; i < n; ++i) ids[i] = i;
        std::shuffle(ids.begin(), ids.end(), rng);
        int na = 1 + static_cast<int>(rng() % f);
        int nb = 1 + static_cast<int>(rng() % f);
        if (na + nb > n || n - na - nb > f) continue;
        ThreePartition p;
        std::size_t i = 0;
        for (int k = 0; k < na; ++k) p.a.insert(ids[i++]);
        for (int k = 0; k < nb; ++k) p.b.insert(ids[i++]);
        while (i < ids.size()) p.c.insert(ids[i++]);

        auto gg = build_theorem1_gadget(g, p, config(n, f), rng() % 1000);
        c.expect(validate_gadget(gg).empty(), "audit violation in a node-count gadget");
        c.expect(gg.topology.copies().size() == static_cast<std::size_t>(n) + p.c.size(),
                 "copy-count formula n + |C| broken");
        ++built;
    }

    built = 0;
    while (built < 200) {
        int f = 1 + static_cast<int>(rng() % 2);
        int n = 4 + static_cast<int>(rng() % 5);
        Graph g = random_connected_graph(n, 0.3 + 0.1 * (rng() % 3), rng());
        auto cut = find_vertex_cut(g, 2 * f);
        if (!cut || static_cast<int>(cut->size()) > 2 * f) continue;
        auto [a, b] = bipartition_around_cut(g, *cut);
        auto [c1, c2] = split_set(*cut, f);
        CutPartition p{a, b, c1, c2};
        auto gg = build_theorem2_gadget(g, p, config(n, f), rng() % 1000);
        c.expect(validate_gadget(gg).empty(), "audit violation in a connectivity gadget");
        c.expect(gg.topology.copies().size() == 2 * p.a.size() + 2 * p.b.size() + 3 * p.c1.size() + p.c2.size(),
                 "copy-count formula 2|A| + 2|B| + 3|C1| + |C2| broken");
        ++built;
    }
    c.finish();
}

void criterion_diamond_theorem2()
{
    Criterion c("2. diamond connectivity forge end-to-end", 5.0);
    fs::path dir = scratch_dir();
    write_text(dir / "diamond.txt", "n 4\ne 0 1\ne 0 2\ne 3 1\ne 3 2\ne 1 2\n");
    std::string bundle = (dir / "bundle").string();

    auto forge = run_cli("forge --graph " + (dir / "diamond.txt").string() +
                         " --f 1 --epsilon 0.01 --lower 0 --upper 1 --victim naive --seed 3 --theorem 2 --out " +
                         bundle);
    c.expect(forge.exit_code == 0, "forge exit code " + std::to_string(forge.exit_code) + ": " + forge.output);
    c.expect(forge.output.find("violated-agreement") != std::string::npos, "verdict is not violated-agreement");
    c.expect(forge.output.find("E1 node 0: 0.000000000000") != std::string::npos, "missing witness a -> 0");
    c.expect(forge.output.find("E1 node 3: 1.000000000000") != std::string::npos, "missing witness b -> 1");

    auto recheck = run_cli("recheck " + bundle);
    c.expect(recheck.exit_code == 0, "recheck exit code " + std::to_string(recheck.exit_code));

    // replay soundness, recomputed in-process for every non-faulty node
    Graph g = diamond_graph();
    ProtocolConfig cfg = config(4, 1);
    auto rep = verify_theorem2(g, 1, cfg, naive_victims(g, cfg), 3, 200000);
    c.expect(rep.verdict.kind == VerdictKind::ViolatedAgreement, "in-process verdict differs");
    for (const auto& e : rep.executions) {
        if (e.name == "E1") continue;
        const Trace& t = rep.traces.at(e.name == "E2" ? "e2" : "e3");
        for (const auto& [u, copy] : e.view_map) {
            auto cmp = check_view_models(local_view(t, sole(u)), local_view(rep.traces.at("gadget"), copy));
            c.expect(cmp.ok, e.name + " node " + std::to_string(u) + " view mismatch: " + cmp.divergence);
        }
    }
    for (const auto& cert : rep.certificates) {
        c.expect(cert.ok, cert.execution + " certificate failed for node " + std::to_string(cert.node));
    }
    c.finish();
}

void criterion_triangle_theorem1()
{
    Criterion c("3. complete-triangle node-count forge end-to-end", 5.0);
    fs::path dir = scratch_dir();
    write_text(dir / "k3.txt", "n 3\ne 0 1\ne 0 2\ne 1 2\n");

    auto forge = run_cli("forge --graph " + (dir / "k3.txt").string() +
                         " --f 1 --epsilon 0.01 --lower 0 --upper 1 --victim naive --seed 3 --theorem 1 --out " +
                         (dir / "b1").string());
    c.expect(forge.exit_code == 0, "forge exit code " + std::to_string(forge.exit_code) + ": " + forge.output);
    c.expect(forge.output.find("violated-validity") != std::string::npos, "verdict is not violated-validity");
    c.expect(forge.output.find("E2 node 1") != std::string::npos, "no B-side witness");

    auto recheck = run_cli("recheck " + (dir / "b1").string());
    c.expect(recheck.exit_code == 0, "recheck exit code " + std::to_string(recheck.exit_code));

    // the swapped branch must trigger for a victim whose crash-run outputs sit at U
    auto mirror = run_cli("forge --graph " + (dir / "k3.txt").string() +
                          " --f 1 --victim const:1 --seed 3 --theorem 1 --out " + (dir / "b2").string());
    c.expect(mirror.exit_code == 0, "mirror forge exit code " + std::to_string(mirror.exit_code));
    c.expect(mirror.output.find("mirror branch") != std::string::npos, "mirror branch not taken");
    c.expect(mirror.output.find("violated-validity") != std::string::npos, "mirror verdict wrong");

    Graph g = Graph::complete(3);
    ProtocolConfig cfg = config(3, 1);
    auto base = verify_theorem1(g, 1, cfg, naive_victims(g, cfg), 3, 100000);
    c.expect(!base.mirror, "naive victim unexpectedly hit the mirror branch");
    auto rep = verify_theorem1(g, 1, cfg,
                               {{0, decide_constant_behavior(Fixed::from_int(1))},
                                {1, decide_constant_behavior(Fixed::from_int(1))},
                                {2, decide_constant_behavior(Fixed::from_int(1))}},
                               3, 100000);
    c.expect(rep.mirror, "constant victim missed the mirror branch");
    c.finish();
}

void criterion_possibility()
{
    Criterion c("4. correct protocol passes 100 seeds x 3 strategies x 2 graphs", 60.0);
    fs::path dir = scratch_dir();
    write_text(dir / "k4.txt", Graph::complete(4).serialize());
    write_text(dir / "wheel7.txt", wheel_graph(6).serialize());

    if (vertex_connectivity(wheel_graph(6)) != 3) {
        c.expect(false, "wheel graph connectivity is not 3");
    }

    for (const std::string graph : {"k4.txt", "wheel7.txt"}) {
        Graph g = Graph::load_file((dir / graph).string());
        for (const std::string strategy : {"none", "crash", "extreme"}) {
            ScenarioConfig sc;
            sc.graph_file = (dir / graph).string();
            sc.f = 1;
            sc.victim = "approx";
            sc.inputs_spec = "split";
            if (strategy != "none") {
                sc.fault_set = {g.node_count() - 1};
                sc.strategy = strategy == "crash" ? "silent" : "extreme";
            }
            auto entries = sweep_seeds(g, sc, 1, 100, true);
            for (const auto& e : entries) {
                c.expect(e.all_conditions,
                         graph + "/" + strategy + " seed " + std::to_string(e.seed) + ": " + e.failure);
            }
        }
    }
    c.finish();
}

void criterion_connectivity_oracle()
{
    Criterion c("5. flow connectivity equals brute force (n<=6 exhaustive)", 120.0);

    for (int n = 2; n <= 6; ++n) {
        const int pairs = n * (n - 1) / 2;
        const long total = 1L << pairs;
        std::vector<std::pair<NodeId, NodeId>> all_pairs;
        for (int u = 0; u < n; ++u) {
            for (int v = u + 1; v < n; ++v) {
                all_pairs.push_back({u, v});
            }
        }
        long bad = 0;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 256) reduction(+ : bad)
#endif
        for (long code = 0; code < total; ++code) {
            Graph g(n);
            for (int b = 0; b < pairs; ++b) {
                if (code >> b & 1) {
                    g.add_edge(all_pairs[b].first, all_pairs[b].second);
                }
            }
            if (!g.connected()) continue;
            if (vertex_connectivity(g) != brute_force_connectivity(g) ||
                vertex_connectivity_serial(g) != brute_force_connectivity(g)) {
                ++bad;
            }
        }
        c.expect(bad == 0, std::to_string(bad) + " disagreements at n=" + std::to_string(n));
    }

    int bad7 = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Graph g = random_graph(7, 0.2 + 0.1 * (seed % 6), seed * 131 + 7);
        if (vertex_connectivity(g) != brute_force_connectivity(g)) {
            ++bad7;
        }
    }
    c.expect(bad7 == 0, std::to_string(bad7) + " disagreements on random 7-node graphs");
    c.finish();
}

namespace zoo {

// deterministic behavior family for the engine stress battery
class Worker : public Behavior {
  public:
    Worker(int flavor, int budget) : flavor_(flavor), budget_(budget) {}
    std::vector<Action> on_init(Fixed input) override
    {
        value_ = input;
        if (flavor_ == 0) return {};
        if (flavor_ == 1) return {DecideAction{value_}, HaltAction{}};
        return {BroadcastAction{Bytes(1, static_cast<char>('a' + flavor_))}};
    }
    std::vector<Action> on_message(NodeId sender, const Bytes& payload) override
    {
        if (--budget_ <= 0) {
            return {DecideAction{value_}, HaltAction{}};
        }
        if (flavor_ % 3 == 2) {
            return {BroadcastAction{payload}};
        }
        return {BroadcastAction{payload + static_cast<char>('0' + sender % 10)}};
    }

  private:
    int flavor_;
    int budget_;
    Fixed value_;
};

} // namespace zoo

void criterion_simulator_invariants()
{
    Criterion c("6. 500 random runs well-formed, 50 repeat pairs identical", 30.0);
    std::mt19937_64 rng(7777);

    auto random_setup = [&](std::uint64_t seed) {
        std::mt19937_64 local(seed);
        int n = 2 + static_cast<int>(local() % 7);
        std::set<CopyId> copies;
        for (int i = 0; i < n; ++i) copies.insert(sole(i));
        Topology topo(copies);
        for (int u = 0; u < n; ++u) {
            for (int v = u + 1; v < n; ++v) {
                switch (local() % 4) {
                case 0: topo.add_undirected(sole(u), sole(v)); break;
                case 1: topo.add_directed(sole(u), sole(v)); break;
                case 2: topo.add_directed(sole(v), sole(u)); break;
                default: break;
                }
            }
        }
        std::map<CopyId, BehaviorFactory> behaviors;
        std::map<CopyId, Fixed> inputs;
        std::map<CopyId, StartMode> modes;
        for (int i = 0; i < n; ++i) {
            int flavor = static_cast<int>(local() % 5);
            int budget = 1 + static_cast<int>(local() % 6);
            behaviors[sole(i)] = [flavor, budget]() { return std::make_unique<zoo::Worker>(flavor, budget); };
            inputs[sole(i)] = Fixed::from_int(static_cast<int>(local() % 5));
            switch (local() % 5) {
            case 0: modes[sole(i)] = StartMode::delayed_until(static_cast<std::int64_t>(local() % 60)); break;
            case 1: modes[sole(i)] = StartMode::crashed(); break;
            default: modes[sole(i)] = StartMode::normal(); break;
            }
        }
        return std::make_tuple(topo, behaviors, inputs, modes);
    };

    for (int i = 0; i < 500; ++i) {
        std::uint64_t setup_seed = rng();
        auto [topo, behaviors, inputs, modes] = random_setup(setup_seed);
        Trace t = run(topo, behaviors, inputs, modes, {rng(), 30000});
        auto violations = check_trace_wellformed(t, topo);
        c.expect(violations.empty(), "run " + std::to_string(i) + ": " +
                                         (violations.empty() ? "" : violations.front()));
    }

    for (int i = 0; i < 50; ++i) {
        std::uint64_t setup_seed = rng();
        std::uint64_t run_seed = rng();
        auto [topo1, behaviors1, inputs1, modes1] = random_setup(setup_seed);
        auto [topo2, behaviors2, inputs2, modes2] = random_setup(setup_seed);
        Trace a = run(topo1, behaviors1, inputs1, modes1, {run_seed, 30000});
        Trace b = run(topo2, behaviors2, inputs2, modes2, {run_seed, 30000});
        c.expect(a.to_jsonl() == b.to_jsonl(), "repeat pair " + std::to_string(i) + " diverged");
    }
    c.finish();
}

void criterion_round_halving()
{
    Criterion c("7. fault-free rounds halve the value interval on K4", 10.0);
    Graph g = Graph::complete(4);
    ProtocolConfig cfg = config(4, 1);
    std::vector<std::vector<Fixed>> input_sets{
        {Fixed::from_int(0), Fixed::from_int(0), Fixed::from_int(1), Fixed::from_int(1)},
        {Fixed::from_int(0), Fixed::parse("0.01"), Fixed::parse("0.99"), Fixed::from_int(1)},
    };
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto& inputs = input_sets[seed % input_sets.size()];
        Topology topo = Topology::from_graph(g);
        std::map<CopyId, BehaviorFactory> behaviors;
        std::map<CopyId, Fixed> cinputs;
        std::map<CopyId, StartMode> modes;
        for (NodeId u : g.nodes()) {
            behaviors[sole(u)] = approx_consensus_behavior(cfg, g, u);
            cinputs[sole(u)] = inputs[u];
            modes[sole(u)] = StartMode::normal();
        }
        Trace t = run(topo, behaviors, cinputs, modes, {seed, 100000});
        auto rounds = round_values_by_round(t, {});
        c.expect(rounds.size() >= 8, "seed " + std::to_string(seed) + ": too few rounds recorded");
        std::optional<std::int64_t> prev;
        for (const auto& [r, vals] : rounds) {
            auto [mn, mx] = std::minmax_element(vals.begin(), vals.end());
            std::int64_t width = (*mx - *mn).units();
            if (prev) {
                c.expect(width <= (*prev + 1) / 2, "seed " + std::to_string(seed) + " round " +
                                                       std::to_string(r) + ": width did not halve");
            }
            prev = width;
        }
    }
    c.finish();
}

} // namespace

int main()
{
    criterion_structural_lemma();
    criterion_diamond_theorem2();
    criterion_triangle_theorem1();
    criterion_possibility();
    criterion_connectivity_oracle();
    criterion_simulator_invariants();
    criterion_round_halving();

    if (g_failures == 0) {
        std::cout << "all acceptance criteria hold\n";
        return 0;
    }
    std::cout << g_failures << " criteria failed\n";
    return 1;
}

// Compares the OpenMP-parallel paths against their serial references:
// multi-seed scenario sweeps and the connectivity kernel. Results must match
// bit for bit; only the wall time may differ.

#include "lbcast/graph.hpp"
#include "lbcast/sweep.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace lbcast;
namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Graph random_connected(int n, double p, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    while (true) {
        Graph g(n);
        for (int u = 0; u < n; ++u) {
            for (int v = u + 1; v < n; ++v) {
                if (coin(rng) < p) g.add_edge(u, v);
            }
        }
        if (g.connected()) return g;
    }
}

void bench_sweep()
{
    fs::path dir = fs::temp_directory_path() / "lbcast_bench";
    fs::create_directories(dir);
    Graph wheel(7);
    for (int i = 1; i <= 6; ++i) {
        wheel.add_edge(0, i);
        wheel.add_edge(i, i % 6 + 1);
    }
    {
        std::ofstream out(dir / "wheel7.txt");
        out << wheel.serialize();
    }

    ScenarioConfig sc;
    sc.graph_file = (dir / "wheel7.txt").string();
    sc.f = 1;
    sc.victim = "approx";
    sc.inputs_spec = "split";
    sc.fault_set = {6};
    sc.strategy = "extreme";

    const std::uint64_t first = 1, last = 200;

    auto t0 = std::chrono::steady_clock::now();
    auto serial = sweep_seeds(wheel, sc, first, last, false);
    double ts = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    auto parallel = sweep_seeds(wheel, sc, first, last, true);
    double tp = seconds_since(t0);

    bool same = serial.size() == parallel.size();
    for (std::size_t i = 0; same && i < serial.size(); ++i) {
        same = serial[i].seed == parallel[i].seed && serial[i].all_conditions == parallel[i].all_conditions &&
               serial[i].failure == parallel[i].failure;
    }
    std::printf("sweep   200 runs   serial %6.2fs   parallel %6.2fs   speedup %4.2fx   results %s\n", ts, tp,
                ts / tp, same ? "identical" : "DIFFER");
}

void bench_connectivity()
{
    std::vector<Graph> graphs;
    for (std::uint64_t s = 0; s < 6; ++s) {
        graphs.push_back(random_connected(90, 0.08, 1000 + s));
    }

    auto t0 = std::chrono::steady_clock::now();
    std::vector<int> serial;
    for (const Graph& g : graphs) {
        serial.push_back(vertex_connectivity_serial(g));
    }
    double ts = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    std::vector<int> parallel;
    for (const Graph& g : graphs) {
        parallel.push_back(vertex_connectivity(g));
    }
    double tp = seconds_since(t0);

    std::printf("kappa   6 graphs   serial %6.2fs   parallel %6.2fs   speedup %4.2fx   results %s\n", ts, tp,
                ts / tp, serial == parallel ? "identical" : "DIFFER");
}

} // namespace

int main()
{
#ifdef _OPENMP
    std::printf("openmp enabled, %d threads\n", omp_get_max_threads());
#else
    std::printf("built without openmp; both paths run serially\n");
#endif
    bench_sweep();
    bench_connectivity();
    return 0;
}

#include "lbcast/forge.hpp"
#include "lbcast/scenario.hpp"
#include "lbcast/sweep.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace lbcast;

namespace {

void write_text(const fs::path& path, const std::string& content)
{
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << content;
}

std::string node_set_str(const NodeSet& s)
{
    std::string out = "{";
    bool first = true;
    for (NodeId u : s) {
        if (!first) out += ", ";
        out += std::to_string(u);
        first = false;
    }
    return out + "}";
}

int cmd_check(const std::string& graph_file, int f)
{
    Graph g = Graph::load_file(graph_file);
    FeasibilityReport r = check_feasibility(g, f);
    std::cout << "n = " << r.n << "\n";
    std::cout << "kappa = " << r.kappa << "\n";
    std::cout << "node count:   " << (r.count_ok ? "ok" : "fails") << " (need n >= " << 3 * f + 1 << ")\n";
    std::cout << "connectivity: " << (r.connectivity_ok ? "ok" : "fails") << " (need kappa >= " << 2 * f + 1
              << ")\n";
    if (r.count_witness) {
        std::cout << "witness partition: A=" << node_set_str(r.count_witness->a)
                  << " B=" << node_set_str(r.count_witness->b) << " C=" << node_set_str(r.count_witness->c)
                  << "\n";
    }
    if (r.connectivity_witness) {
        std::cout << "witness cut: " << node_set_str(r.connectivity_witness->cut())
                  << " separating A=" << node_set_str(r.connectivity_witness->a)
                  << " from B=" << node_set_str(r.connectivity_witness->b) << "\n";
    }
    std::cout << (r.feasible() ? "feasible" : "infeasible") << "\n";
    return r.feasible() ? 0 : 1;
}

void print_conditions(const ConditionReport& rep)
{
    auto line = [](const char* name, const ConditionCheck& c) {
        std::cout << name << ": " << (c.holds ? "ok" : ("VIOLATED -- " + c.witness)) << "\n";
    };
    line("agreement  ", rep.agreement);
    line("validity   ", rep.validity);
    line("termination", rep.termination);
}

int cmd_simulate(const ScenarioConfig& sc, std::optional<std::pair<std::uint64_t, std::uint64_t>> seeds)
{
    Graph g = Graph::load_file(sc.graph_file);
    if (seeds) {
        auto entries = sweep_seeds(g, sc, seeds->first, seeds->second, true);
        int failures = 0;
        for (const auto& e : entries) {
            if (!e.all_conditions) {
                ++failures;
                std::cout << "seed " << e.seed << ": " << e.failure << "\n";
            }
        }
        std::cout << entries.size() << " runs, " << failures << " condition failures\n";
        return failures == 0 ? 0 : 1;
    }
    SimResult res = simulate_scenario(g, sc, sc.seed);
    fs::path out_dir(sc.out_dir);
    write_text(out_dir / "trace.jsonl", res.trace.to_jsonl());
    write_text(out_dir / "scenario.txt", sc.serialize());
    std::cout << "trace: " << (out_dir / "trace.jsonl").string() << "\n";
    print_conditions(res.conditions);
    return res.conditions.all_hold() ? 0 : 1;
}

int cmd_forge(const ScenarioConfig& sc)
{
    Graph g = Graph::load_file(sc.graph_file);
    ProtocolConfig cfg = sc.protocol_config(g.node_count());
    auto victims = victim_behaviors(g, sc);

    ForgeReport rep;
    if (sc.theorem == 1) {
        rep = verify_theorem1(g, sc.f, cfg, victims, sc.seed, sc.max_steps, sc.mirror_auto);
    } else if (sc.theorem == 2) {
        rep = verify_theorem2(g, sc.f, cfg, victims, sc.seed, sc.max_steps);
    } else {
        throw std::invalid_argument("--theorem must be 1 or 2");
    }
    rep.scenario_text = sc.serialize();
    write_bundle(rep, sc.out_dir);

    std::cout << "theorem " << rep.theorem << (rep.mirror ? " (mirror branch)" : "") << ", delta = " << rep.delta
              << "\n";
    std::cout << "verdict: " << verdict_kind_name(rep.verdict.kind) << "\n";
    std::cout << rep.verdict.detail << "\n";
    for (const auto& w : rep.verdict.witnesses) {
        std::cout << "  " << w.execution << " node " << w.node << ": "
                  << (w.output ? w.output->str() : std::string("(none)")) << " -- " << w.note << "\n";
    }
    for (const auto& note : rep.notes) {
        std::cout << "note: " << note << "\n";
    }
    std::cout << "bundle: " << sc.out_dir << "\n";
    switch (rep.verdict.kind) {
    case VerdictKind::ViolatedValidity:
    case VerdictKind::ViolatedAgreement:
    case VerdictKind::VictimDidNotTerminate:
        return 0;
    case VerdictKind::VictimSurvived:
        return 1;
    }
    return 2;
}

int cmd_recheck(const std::string& bundle)
{
    RecheckResult res = recheck_bundle(bundle);
    for (const auto& m : res.messages) {
        std::cout << m << "\n";
    }
    switch (res.outcome) {
    case RecheckOutcome::Reproduced:
        std::cout << "verdict reproduced\n";
        return 0;
    case RecheckOutcome::Mismatch:
        std::cout << "verdict NOT reproduced\n";
        return 1;
    case RecheckOutcome::Malformed:
        std::cout << "malformed bundle\n";
        return 2;
    }
    return 2;
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text)
{
    auto dots = text.find("..");
    if (dots == std::string::npos) {
        throw std::invalid_argument("--seeds wants the form a..b");
    }
    std::uint64_t a = std::stoull(text.substr(0, dots));
    std::uint64_t b = std::stoull(text.substr(dots + 2));
    if (b < a) {
        throw std::invalid_argument("--seeds range is empty");
    }
    return {a, b};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"asynchronous approximate consensus simulator and counterexample forge "
                 "for the local-broadcast model"};
    app.require_subcommand(1);

    ScenarioConfig sc;
    std::string seeds_range;

    auto add_scenario_flags = [&](CLI::App* cmd, bool with_faults) {
        cmd->add_option("--graph", sc.graph_file, "graph file")->required();
        cmd->add_option("--f", sc.f, "fault bound");
        cmd->add_option("--epsilon", [&sc](const std::vector<std::string>& v) {
            sc.epsilon = Fixed::parse(v.front());
            return true;
        }, "agreement tolerance");
        cmd->add_option("--lower", [&sc](const std::vector<std::string>& v) {
            sc.lower = Fixed::parse(v.front());
            return true;
        }, "input lower bound L");
        cmd->add_option("--upper", [&sc](const std::vector<std::string>& v) {
            sc.upper = Fixed::parse(v.front());
            return true;
        }, "input upper bound U");
        cmd->add_option("--victim", sc.victim, "victim algorithm: approx|naive|own-input|const:<v>|wait-all");
        cmd->add_option("--rounds", sc.rounds, "victim round count (0 = derive)");
        cmd->add_option("--seed", sc.seed, "schedule seed");
        cmd->add_option("--max-steps", sc.max_steps, "event budget per run");
        cmd->add_option("--out", sc.out_dir, "output directory");
        if (with_faults) {
            cmd->add_option("--inputs", sc.inputs_spec, "unanimous-L|unanimous-U|split|v0,v1,...");
            cmd->add_option("--faulty", [&sc](const std::vector<std::string>& v) {
                sc.fault_set.clear();
                std::istringstream in(v.front());
                std::string item;
                while (std::getline(in, item, ',')) {
                    if (!item.empty()) sc.fault_set.insert(std::stoi(item));
                }
                return true;
            }, "comma-separated Byzantine node ids");
            cmd->add_option("--strategy", sc.strategy, "crash|silent|extreme|random");
        }
    };

    auto* check = app.add_subcommand("check", "feasibility of the two network conditions");
    std::string check_graph;
    int check_f = 1;
    check->add_option("--graph", check_graph, "graph file")->required();
    check->add_option("--f", check_f, "fault bound")->required();

    auto* simulate = app.add_subcommand("simulate", "run a scenario and judge the three conditions");
    add_scenario_flags(simulate, true);
    simulate->add_option("--seeds", seeds_range, "seed range a..b, fanned out concurrently");

    auto* forge = app.add_subcommand("forge", "run an impossibility construction against a victim");
    add_scenario_flags(forge, false);
    forge->add_option("--theorem", sc.theorem, "1 (node count) or 2 (connectivity)")->required();
    forge->add_flag("--mirror-auto,!--no-mirror-auto", sc.mirror_auto,
                    "pick the swapped branch from the crash-run outputs (default on)");

    auto* recheck = app.add_subcommand("recheck", "reproduce a bundle's verdict from its traces");
    std::string bundle_dir;
    recheck->add_option("bundle", bundle_dir, "report bundle directory")->required();

    try {
        app.parse(argc, argv);
        if (check->parsed()) {
            return cmd_check(check_graph, check_f);
        }
        if (simulate->parsed()) {
            std::optional<std::pair<std::uint64_t, std::uint64_t>> seeds;
            if (!seeds_range.empty()) {
                seeds = parse_seed_range(seeds_range);
            }
            return cmd_simulate(sc, seeds);
        }
        if (forge->parsed()) {
            return cmd_forge(sc);
        }
        if (recheck->parsed()) {
            return cmd_recheck(bundle_dir);
        }
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string output;
};

std::string binary()
{
    const char* path = std::getenv("LBCAST_BIN");
    REQUIRE_MESSAGE(path != nullptr, "LBCAST_BIN must point at the CLI binary");
    return path;
}

CmdResult run_cli(const std::string& args)
{
    CmdResult res;
    std::string cmd = binary() + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::size_t got;
    while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) {
        res.output.append(buf.data(), got);
    }
    int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

struct Workspace {
    fs::path dir;
    Workspace() : dir(fs::temp_directory_path() / "lbcast_cli_ws")
    {
        fs::remove_all(dir);
        fs::create_directories(dir);
        write("k4.txt", "n 4\ne 0 1\ne 0 2\ne 0 3\ne 1 2\ne 1 3\ne 2 3\n");
        write("k3.txt", "n 3\ne 0 1\ne 0 2\ne 1 2\n");
        write("diamond.txt", "n 4\ne 0 1\ne 0 2\ne 3 1\ne 3 2\ne 1 2\n");
        write("broken.txt", "n 2\ne 0 5\n");
    }
    ~Workspace() { fs::remove_all(dir); }

    void write(const std::string& name, const std::string& content)
    {
        std::ofstream out(dir / name);
        out << content;
    }
    std::string file(const std::string& name) const { return (dir / name).string(); }
    std::string out(const std::string& name) const { return (dir / name).string(); }
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::string text;
    std::getline(in, text, '\0');
    return text;
}

} // namespace

TEST_CASE("check exit codes and witnesses")
{
    Workspace ws;
    auto ok = run_cli("check --graph " + ws.file("k4.txt") + " --f 1");
    CHECK(ok.exit_code == 0);
    CHECK(ok.output.find("feasible") != std::string::npos);

    auto small = run_cli("check --graph " + ws.file("k3.txt") + " --f 1");
    CHECK(small.exit_code == 1);
    CHECK(small.output.find("witness partition") != std::string::npos);

    auto thin = run_cli("check --graph " + ws.file("diamond.txt") + " --f 1");
    CHECK(thin.exit_code == 1);
    CHECK(thin.output.find("witness cut: {1, 2}") != std::string::npos);

    auto bad = run_cli("check --graph " + ws.file("broken.txt") + " --f 1");
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("line 2") != std::string::npos);

    auto missing = run_cli("check --graph " + ws.file("nope.txt") + " --f 1");
    CHECK(missing.exit_code == 2);
}

TEST_CASE("simulate exit codes")
{
    Workspace ws;
    auto ok = run_cli("simulate --graph " + ws.file("k4.txt") +
                      " --f 1 --inputs split --faulty 3 --strategy extreme --seed 5 --out " + ws.out("s_ok"));
    CHECK(ok.exit_code == 0);
    CHECK(ok.output.find("agreement  : ok") != std::string::npos);
    CHECK(fs::exists(fs::path(ws.out("s_ok")) / "trace.jsonl"));

    auto naive = run_cli("simulate --graph " + ws.file("k4.txt") +
                         " --f 1 --victim naive --inputs split --faulty 3 --strategy extreme --seed 5 --out " +
                         ws.out("s_naive"));
    CHECK(naive.exit_code == 1);
    CHECK(naive.output.find("VIOLATED") != std::string::npos);

    auto toomany = run_cli("simulate --graph " + ws.file("k4.txt") +
                           " --f 1 --inputs split --faulty 2,3 --strategy extreme --out " + ws.out("s_bad"));
    CHECK(toomany.exit_code == 2);

    auto outofrange = run_cli("simulate --graph " + ws.file("k4.txt") +
                              " --f 1 --inputs 0,0,0,7 --out " + ws.out("s_bad2"));
    CHECK(outofrange.exit_code == 2);
}

TEST_CASE("simulate runs are byte-reproducible")
{
    Workspace ws;
    std::string flags = "simulate --graph " + ws.file("k4.txt") + " --f 1 --inputs split --seed 9 --out ";
    CHECK(run_cli(flags + ws.out("r1")).exit_code == 0);
    CHECK(run_cli(flags + ws.out("r2")).exit_code == 0);
    CHECK(slurp(fs::path(ws.out("r1")) / "trace.jsonl") == slurp(fs::path(ws.out("r2")) / "trace.jsonl"));
}

TEST_CASE("seed sweeps")
{
    Workspace ws;
    auto sweep = run_cli("simulate --graph " + ws.file("k4.txt") +
                         " --f 1 --inputs split --faulty 0 --strategy crash --seeds 1..20");
    CHECK(sweep.exit_code == 0);
    CHECK(sweep.output.find("20 runs, 0 condition failures") != std::string::npos);
}

TEST_CASE("forge and recheck round trip")
{
    Workspace ws;
    auto t1 = run_cli("forge --graph " + ws.file("k3.txt") + " --f 1 --victim naive --theorem 1 --seed 3 --out " +
                      ws.out("f1"));
    CHECK(t1.exit_code == 0);
    CHECK(t1.output.find("violated-validity") != std::string::npos);

    auto t2 = run_cli("forge --graph " + ws.file("diamond.txt") +
                      " --f 1 --victim naive --theorem 2 --seed 3 --out " + ws.out("f2"));
    CHECK(t2.exit_code == 0);
    CHECK(t2.output.find("violated-agreement") != std::string::npos);
    CHECK(t2.output.find("E1 node 0: 0.000000000000") != std::string::npos);
    CHECK(t2.output.find("E1 node 3: 1.000000000000") != std::string::npos);

    CHECK(run_cli("recheck " + ws.out("f1")).exit_code == 0);
    CHECK(run_cli("recheck " + ws.out("f2")).exit_code == 0);

    // inapplicable constructions
    auto na1 = run_cli("forge --graph " + ws.file("k4.txt") + " --f 1 --victim naive --theorem 1 --out " +
                       ws.out("na1"));
    CHECK(na1.exit_code == 2);
    auto na2 = run_cli("forge --graph " + ws.file("k4.txt") + " --f 1 --victim naive --theorem 2 --out " +
                       ws.out("na2"));
    CHECK(na2.exit_code == 2);

    // the correct protocol refuses to exist on an infeasible graph
    auto approx = run_cli("forge --graph " + ws.file("diamond.txt") +
                          " --f 1 --victim approx --theorem 2 --out " + ws.out("na3"));
    CHECK(approx.exit_code == 2);
    CHECK(approx.output.find("infeasible") != std::string::npos);
}

TEST_CASE("recheck on damaged bundles")
{
    Workspace ws;
    REQUIRE(run_cli("forge --graph " + ws.file("diamond.txt") +
                    " --f 1 --victim naive --theorem 2 --seed 4 --out " + ws.out("fb"))
                .exit_code == 0);

    auto trace_path = fs::path(ws.out("fb")) / "e3.trace.jsonl";
    std::string text = slurp(trace_path);
    auto pos = text.find("\"payload\":\"01");
    REQUIRE(pos != std::string::npos);
    text[pos + 12] = text[pos + 12] == '3' ? '4' : '3';
    {
        std::ofstream out(trace_path);
        out << text;
    }
    CHECK(run_cli("recheck " + ws.out("fb")).exit_code == 1);

    std::string report = slurp(fs::path(ws.out("fb")) / "report.json");
    {
        std::ofstream out(fs::path(ws.out("fb")) / "report.json");
        out << report.substr(0, report.size() / 2);
    }
    CHECK(run_cli("recheck " + ws.out("fb")).exit_code == 2);
}

#include "doctest.h"

#include "support.hpp"

#include "decem/cli.hpp"
#include "decem/errors.hpp"
#include "decem/evaluation.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace decem;
using testing::bench_path;
namespace fs = std::filesystem;

namespace {

struct Invocation {
    int code;
    std::string out, err;
};

Invocation invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "decem");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("decem_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("solve writes a policy, run logs and a summary") {
    const auto dir = scratch("solve");
    auto r = invoke({"solve", "--model", bench_path("broadcast"), "--nodes", "2", "2", "--restarts", "3", "--seed", "5",
                     "--max-iters", "40", "--out", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "policy.json"));
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(fs::exists(dir / "timing.json"));
    for (int i = 0; i < 3; ++i) CHECK(fs::exists(dir / "runs" / ("restart-" + std::to_string(i) + ".jsonl")));

    auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(summary == nlohmann::json::parse(r.out));
    auto model = load_model(bench_path("broadcast"));
    PolicyProvenance prov;
    auto policy = load_policy((dir / "policy.json").string(), &prov);
    CHECK(validate_policy(policy, model).empty());
    CHECK(prov.model_hash == model_hash(model));
    CHECK(prov.seed.has_value());
}

TEST_CASE("solve output does not depend on the job count") {
    const auto a = scratch("jobs1"), b = scratch("jobs3");
    const std::vector<std::string> base{"solve", "--model", bench_path("dectiger"), "--restarts", "4", "--seed", "11",
                                        "--max-iters", "30"};
    auto args_a = base, args_b = base;
    args_a.insert(args_a.end(), {"--jobs", "1", "--out", a.string()});
    args_b.insert(args_b.end(), {"--jobs", "3", "--out", b.string()});
    REQUIRE(invoke(args_a).code == 0);
    REQUIRE(invoke(args_b).code == 0);
    CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));
    CHECK(slurp(a / "policy.json") == slurp(b / "policy.json"));
}

TEST_CASE("solve with zero iterations returns the random start") {
    const auto dir = scratch("zero");
    REQUIRE(invoke({"solve", "--model", bench_path("dectiger"), "--restarts", "1", "--seed", "2", "--max-iters", "0",
                    "--out", dir.string()})
                .code == 0);
    auto model = load_model(bench_path("dectiger"));
    auto policy = load_policy((dir / "policy.json").string());
    auto start = init_random(model, 2, 2, cli::restart_seed(2, 0));
    CHECK(policy.agent1.action_probs == start.agent1.action_probs);
    CHECK(policy.agent2.node_transition == start.agent2.node_transition);
}

TEST_CASE("csv summary format") {
    const auto dir = scratch("csv");
    REQUIRE(invoke({"solve", "--model", bench_path("broadcast"), "--restarts", "2", "--max-iters", "10", "--format",
                    "csv", "--out", dir.string()})
                .code == 0);
    const auto text = slurp(dir / "summary.csv");
    CHECK(text.rfind("problem,n1,n2,restart,iters,likelihood,value,ms", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}

TEST_CASE("evaluate and simulate read an exported policy") {
    const auto dir = scratch("eval");
    REQUIRE(invoke({"solve", "--model", bench_path("dectiger"), "--restarts", "1", "--max-iters", "50", "--out",
                    dir.string()})
                .code == 0);
    const auto policy_file = (dir / "policy.json").string();
    auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));

    auto ev = invoke({"evaluate", "--model", bench_path("dectiger"), "--policy", policy_file});
    REQUIRE(ev.code == 0);
    const double v = nlohmann::json::parse(ev.out)["v_b0"].get<double>();
    CHECK(std::abs(v - summary["best_value"].get<double>()) < 1e-6);

    const std::vector<std::string> sim{"simulate", "--model", bench_path("dectiger"), "--policy", policy_file,
                                       "--episodes", "3000", "--seed", "4"};
    auto s1 = invoke(sim), s2 = invoke(sim);
    REQUIRE(s1.code == 0);
    CHECK(s1.out == s2.out);
    auto j = nlohmann::json::parse(s1.out);
    CHECK(std::abs(j["mean"].get<double>() - v) < 5.0 * j["std_error"].get<double>() + j["truncation_bias"].get<double>());
}

TEST_CASE("bench runs a suite and reports misses") {
    const auto dir = scratch("bench");
    {
        std::ofstream suite(dir / "suite.json");
        suite << nlohmann::json{
                     {"suite", "tiny"},
                     {"entries",
                      {{{"problem", "broadcast"},
                        {"model", bench_path("broadcast")},
                        {"sizes", {1, {2, 1}}},
                        {"restarts", 2},
                        {"seed", 1},
                        {"max_iters", 20},
                        {"min_value", -1000.0}},
                       {{"problem", "tiger"},
                        {"model", bench_path("dectiger")},
                        {"sizes", {1}},
                        {"restarts", 1},
                        {"max_iters", 5},
                        {"min_value", 1000.0}}}}}
                     .dump(2);
    }
    auto r = invoke({"bench", "--suite", (dir / "suite.json").string()});
    CHECK(r.code == 0);
    std::istringstream rows(r.out);
    std::string header;
    std::getline(rows, header);
    CHECK(header == "problem,n1,n2,restart,iters,likelihood,value,ms");
    std::size_t n = 0;
    for (std::string line; std::getline(rows, line);) ++n;
    CHECK(n == 2 * 2 + 1);

    auto ci = invoke({"bench", "--suite", (dir / "suite.json").string(), "--ci", "--format", "json"});
    CHECK(ci.code == cli::kExitBenchMiss);
    auto j = nlohmann::json::parse(ci.out);
    CHECK(j["results"].size() == 3);
}

TEST_CASE("suite files are checked") {
    CHECK_THROWS_AS(cli::suite_from_json(nlohmann::json{{"entries", {{{"problem", "x"}, {"model", "missing.dpomdp"},
                                                                      {"sizes", {2}}}}}},
                                         "/nonexistent"),
                    ParseError);
    CHECK_THROWS_AS(cli::suite_from_json(nlohmann::json{{"entries", 3}}, "."), ParseError);
    auto suite = cli::load_suite(testing::data_path("suites/table1.json"));
    CHECK(!suite.entries.empty());
}

TEST_CASE("exit codes") {
    CHECK(invoke({"solve", "--model", "/nonexistent.dpomdp"}).code == cli::kExitInput);
    CHECK(invoke({"solve", "--model", bench_path("broadcast"), "--cutoff", "sometimes"}).code == cli::kExitInput);
    CHECK(invoke({"solve", "--model", bench_path("broadcast"), "--restarts", "0"}).code == cli::kExitInput);
    CHECK(invoke({"evaluate", "--model", bench_path("broadcast"), "--policy", "/nonexistent.json"}).code ==
          cli::kExitInput);
    CHECK(invoke({"frobnicate"}).code == cli::kExitInput);
    CHECK(invoke({"--help"}).code == 0);

    // policy for another model
    const auto dir = scratch("mismatch");
    REQUIRE(invoke({"solve", "--model", bench_path("dectiger"), "--restarts", "1", "--max-iters", "1", "--out",
                    dir.string()})
                .code == 0);
    CHECK(invoke({"evaluate", "--model", bench_path("broadcast"), "--policy", (dir / "policy.json").string()}).code ==
          cli::kExitInput);
}

TEST_CASE("the installed binary reports input errors through its exit status") {
    const std::string cmd = std::string(DECEM_BINARY) + " solve --model /nonexistent.dpomdp 2>/dev/null";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 1);
}

#include "decem/cli.hpp"

#include <ostream>
#include <sstream>
#include <vector>

#include "CLI11.hpp"

namespace decem::cli {

namespace {

struct CutoffValidator : CLI::Validator {
    CutoffValidator() {
        name_ = "CUTOFF";
        func_ = [](const std::string& s) {
            try {
                CutoffMode::parse(s);
                return std::string();
            } catch (const std::invalid_argument& e) {
                return std::string(e.what());
            }
        };
    }
};

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Expectation-maximization planner for two-agent DEC-POMDP finite-state controllers", "decem"};
    app.require_subcommand(1);

    SolveConfig solve;
    std::vector<std::size_t> nodes{2, 2};
    std::string cutoff = "adaptive:1e-8", solve_format = "json";
    auto* s = app.add_subcommand("solve", "Optimize controllers with seeded EM restarts");
    s->add_option("--model", solve.model_path, "Problem file (.dpomdp)")->required()->check(CLI::ExistingFile);
    s->add_option("--nodes", nodes, "Controller sizes N1 N2")->expected(2)->check(CLI::PositiveNumber);
    s->add_option("--restarts", solve.restarts, "Independent random starts")->check(CLI::PositiveNumber);
    s->add_option("--seed", solve.seed, "Master seed");
    s->add_option("--max-iters", solve.max_iters, "EM iteration limit per restart");
    s->add_option("--lik-tol", solve.lik_tol, "Stop when the relative likelihood gain falls below this")
        ->check(CLI::PositiveNumber);
    s->add_option("--cutoff", cutoff, "Message horizon: fixed:K or adaptive:EPS")->check(CutoffValidator());
    s->add_option("--audit-every", solve.audit_every, "Exact evaluation every J iterations (0: final only)");
    s->add_option("--out", solve.output_path, "Output directory");
    s->add_option("--format", solve_format, "Summary format")->check(CLI::IsMember({"json", "csv"}));
    s->add_option("--jobs", solve.jobs, "Restarts run concurrently")->check(CLI::PositiveNumber);

    EvaluateConfig eval;
    auto* e = app.add_subcommand("evaluate", "Exact value of a controller");
    e->add_option("--model", eval.model_path)->required()->check(CLI::ExistingFile);
    e->add_option("--policy", eval.policy_path)->required()->check(CLI::ExistingFile);
    e->add_option("--tol", eval.tol, "Bellman residual tolerance")->check(CLI::PositiveNumber);
    e->add_option("--out", eval.output_path, "Report file (default: stdout)");

    SimulateConfig sim;
    auto* m = app.add_subcommand("simulate", "Monte-Carlo estimate of a controller's value");
    m->add_option("--model", sim.model_path)->required()->check(CLI::ExistingFile);
    m->add_option("--policy", sim.policy_path)->required()->check(CLI::ExistingFile);
    m->add_option("--episodes", sim.episodes)->check(CLI::PositiveNumber);
    m->add_option("--horizon", sim.horizon, "Steps per episode (0: until gamma^h < 1e-6)");
    m->add_option("--seed", sim.seed);
    m->add_option("--jobs", sim.jobs)->check(CLI::PositiveNumber);
    m->add_option("--out", sim.output_path, "Report file (default: stdout)");

    BenchConfig bench;
    std::string bench_format = "csv";
    auto* b = app.add_subcommand("bench", "Run a benchmark suite");
    b->add_option("--suite", bench.suite_path)->required()->check(CLI::ExistingFile);
    b->add_option("--out", bench.output_path, "Results file (default: stdout)");
    b->add_option("--format", bench_format)->check(CLI::IsMember({"json", "csv"}));
    b->add_option("--jobs", bench.jobs)->check(CLI::PositiveNumber);
    b->add_flag("--ci", bench.ci, "Exit with status 3 if any entry misses its threshold");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& ex) {
        std::ostringstream o, x;
        const int code = app.exit(ex, o, x);
        out << o.str();
        err << x.str();
        return code == 0 ? kExitOk : kExitInput;
    }

    if (s->parsed()) {
        solve.nodes1 = nodes[0];
        solve.nodes2 = nodes[1];
        solve.cutoff = CutoffMode::parse(cutoff);
        solve.format = parse_format(solve_format);
        return cmd_solve(solve, out, err);
    }
    if (e->parsed()) return cmd_evaluate(eval, out, err);
    if (m->parsed()) return cmd_simulate(sim, out, err);
    bench.format = parse_format(bench_format);
    return cmd_bench(bench, out, err);
}

} // namespace decem::cli

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "decem/controller.hpp"
#include "decem/em.hpp"
#include "decem/model.hpp"

namespace decem::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitBenchMiss = 3;

enum class OutputFormat { Json, Csv };

OutputFormat parse_format(const std::string& text);

struct SolveConfig {
    std::string model_path;
    std::size_t nodes1 = 2, nodes2 = 2;
    std::size_t restarts = 10;
    std::uint64_t seed = 0;
    std::size_t max_iters = 1000;
    double lik_tol = 1e-8;
    CutoffMode cutoff = CutoffMode::adaptive();
    std::size_t audit_every = 0;
    std::string output_path; // directory; empty writes nothing
    OutputFormat format = OutputFormat::Json;
    unsigned jobs = 1;

    /// Throws std::invalid_argument on zero counts or non-positive tolerances.
    void validate() const;
};

/// One EM run from a seeded random start.
struct RestartResult {
    std::size_t restart = 0;
    std::uint64_t seed = 0; // seed passed to init_random
    JointPolicy policy;
    EmRunLog log;
    std::size_t iters = 0;
    double likelihood = 0.0;
    double value = 0.0;      // audited exact value of the returned policy
    double worst_drop = 0.0; // most negative L_{i+1} - L_i (0 when none)
    double ms = 0.0;
};

struct SolveOutcome {
    std::string problem;
    std::string model_hash;
    std::vector<RestartResult> restarts;
    std::size_t best = 0; // index of the highest audited value
    double total_ms = 0.0;
};

/// Seed for the random start of restart `r`.
std::uint64_t restart_seed(std::uint64_t seed, std::size_t r);

/// Runs cfg.restarts independent EM runs (cfg.jobs at a time). The result
/// does not depend on cfg.jobs.
SolveOutcome run_restarts(const DecPomdpModel& model, const std::string& problem, const SolveConfig& cfg);

/// Deterministic summary: configuration, per-restart results and the best
/// restart. Wall times are left out so identical runs give identical bytes.
nlohmann::json solve_summary(const SolveConfig& cfg, const SolveOutcome& outcome);

/// Loads and validates a model, throwing ParseError with every violation listed.
DecPomdpModel load_valid_model(const std::string& path);

/// Problem name used in reports: the model file's stem.
std::string problem_name(const std::string& model_path);

int cmd_solve(const SolveConfig& cfg, std::ostream& out, std::ostream& err);

struct EvaluateConfig {
    std::string model_path;
    std::string policy_path;
    std::string output_path; // empty: stdout
    double tol = 1e-9;
};

int cmd_evaluate(const EvaluateConfig& cfg, std::ostream& out, std::ostream& err);

struct SimulateConfig {
    std::string model_path;
    std::string policy_path;
    std::size_t episodes = 10000;
    std::size_t horizon = 0;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    std::string output_path;
};

int cmd_simulate(const SimulateConfig& cfg, std::ostream& out, std::ostream& err);

/// One benchmark configuration: a model solved at one or more controller
/// sizes, each with its own best-of-restarts pass threshold.
struct BenchEntry {
    std::string problem;
    std::string model_path; // resolved against the suite file's directory
    std::vector<std::pair<std::size_t, std::size_t>> sizes;
    std::size_t restarts = 10;
    std::uint64_t seed = 0;
    std::size_t max_iters = 1000;
    double lik_tol = 1e-8;
    CutoffMode cutoff = CutoffMode::adaptive();
    std::optional<double> reference;      // published value, for the report only
    std::optional<double> min_value;      // pass threshold on the best audited value
    std::optional<double> min_likelihood; // pass threshold on the best likelihood
};

struct BenchSuite {
    std::string name;
    std::vector<BenchEntry> entries;
};

/// Reads a suite JSON file. Throws ParseError on malformed content or when a
/// referenced model is missing or invalid.
BenchSuite load_suite(const std::string& path);
BenchSuite suite_from_json(const nlohmann::json& j, const std::string& base_dir);

/// One CSV row: problem,n1,n2,restart,iters,likelihood,value,ms
struct BenchRow {
    std::string problem;
    std::size_t n1 = 0, n2 = 0, restart = 0, iters = 0;
    double likelihood = 0.0, value = 0.0, ms = 0.0;
    double worst_drop = 0.0;
};

struct BenchResult {
    std::string problem;
    std::size_t n1 = 0, n2 = 0;
    double best_value = 0.0, mean_value = 0.0, best_likelihood = 0.0;
    double total_ms = 0.0;
    std::optional<double> reference, min_value, min_likelihood;
    bool pass = true;
};

struct BenchReport {
    std::string suite;
    std::vector<BenchRow> rows;
    std::vector<BenchResult> results;
    bool all_pass = true;
};

BenchReport run_suite(const BenchSuite& suite, unsigned jobs = 1);

void write_bench_csv(std::ostream& out, const BenchReport& report);
nlohmann::json bench_to_json(const BenchReport& report);

struct BenchConfig {
    std::string suite_path;
    std::string output_path; // file; empty: stdout
    OutputFormat format = OutputFormat::Csv;
    unsigned jobs = 1;
    bool ci = false;
};

int cmd_bench(const BenchConfig& cfg, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a subcommand; returns the exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace decem::cli

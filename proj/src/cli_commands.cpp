#include "decem/cli.hpp"

#include "decem/errors.hpp"
#include "decem/evaluation.hpp"
#include "decem/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace decem::cli {

namespace fs = std::filesystem;

OutputFormat parse_format(const std::string& text) {
    if (text == "json") return OutputFormat::Json;
    if (text == "csv") return OutputFormat::Csv;
    throw std::invalid_argument("format must be json or csv, got '" + text + "'");
}

void SolveConfig::validate() const {
    if (nodes1 == 0 || nodes2 == 0) throw std::invalid_argument("controller sizes must be at least 1");
    if (restarts == 0) throw std::invalid_argument("restarts must be at least 1");
    if (!(lik_tol > 0.0)) throw std::invalid_argument("likelihood tolerance must be positive");
    if (cutoff.kind == CutoffMode::Kind::Adaptive && !(cutoff.epsilon > 0.0))
        throw std::invalid_argument("adaptive cutoff needs a positive epsilon");
    if (jobs == 0) throw std::invalid_argument("jobs must be at least 1");
}

std::uint64_t restart_seed(std::uint64_t seed, std::size_t r) { return derive_seed(seed, 0x5eed0000ULL + r); }

std::string problem_name(const std::string& model_path) { return fs::path(model_path).stem().string(); }

DecPomdpModel load_valid_model(const std::string& path) {
    DecPomdpModel m = load_model(path);
    auto report = validate_model(m);
    if (!report.empty()) {
        std::string msg = path + ": model is invalid";
        for (const auto& v : report) msg += "\n  " + v.message;
        throw ParseError(msg);
    }
    return m;
}

namespace {

/// Runs task(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& task) {
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    for (unsigned j = 0; j < jobs; ++j)
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& w : workers) w.join();
    if (failure) std::rethrow_exception(failure);
}

double worst_drop(const EmRunLog& log) {
    double worst = 0.0;
    for (std::size_t i = 1; i < log.records.size(); ++i)
        worst = std::min(worst, log.records[i].likelihood - log.records[i - 1].likelihood);
    return worst;
}

RestartResult run_one(const DecPomdpModel& model, std::size_t n1, std::size_t n2, std::uint64_t base_seed,
                      std::size_t r, const EmConfig& em) {
    RestartResult rr;
    rr.restart = r;
    rr.seed = restart_seed(base_seed, r);
    auto result = em_solve(model, init_random(model, n1, n2, rr.seed), em);
    rr.policy = std::move(result.policy);
    rr.log = std::move(result.log);
    const auto& last = rr.log.records.back();
    rr.iters = last.iter;
    rr.likelihood = last.likelihood;
    rr.value = last.value_exact.value_or(last.value_thm1);
    rr.worst_drop = worst_drop(rr.log);
    rr.ms = last.ms;
    return rr;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw std::invalid_argument("cannot create output directory '" + dir + "'");
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream f(path);
    if (!f) throw std::invalid_argument("cannot write '" + path.string() + "'");
    return f;
}

/// Runs a command body, mapping exceptions onto exit statuses.
int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }
}

} // namespace

SolveOutcome run_restarts(const DecPomdpModel& model, const std::string& problem, const SolveConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    EmConfig em;
    em.max_iters = cfg.max_iters;
    em.lik_tol = cfg.lik_tol;
    em.cutoff = cfg.cutoff;
    em.audit_every = cfg.audit_every;

    SolveOutcome out;
    out.problem = problem;
    out.model_hash = model_hash(model);
    out.restarts.resize(cfg.restarts);
    parallel_for(cfg.restarts, cfg.jobs, [&](std::size_t r) {
        out.restarts[r] = run_one(model, cfg.nodes1, cfg.nodes2, cfg.seed, r, em);
    });
    for (std::size_t r = 1; r < out.restarts.size(); ++r)
        if (out.restarts[r].value > out.restarts[out.best].value) out.best = r;
    out.total_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

nlohmann::json solve_summary(const SolveConfig& cfg, const SolveOutcome& outcome) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : outcome.restarts)
        runs.push_back({{"restart", r.restart},
                        {"seed", r.seed},
                        {"iters", r.iters},
                        {"likelihood", r.likelihood},
                        {"value", r.value},
                        {"reason", to_string(r.log.reason)},
                        {"cutoff", r.log.cutoff},
                        {"policy_hash", policy_hash(r.policy)}});
    const auto& best = outcome.restarts.at(outcome.best);
    return {{"problem", outcome.problem},
            {"model_hash", outcome.model_hash},
            {"nodes", {cfg.nodes1, cfg.nodes2}},
            {"seed", cfg.seed},
            {"max_iters", cfg.max_iters},
            {"lik_tol", cfg.lik_tol},
            {"cutoff", cfg.cutoff.to_string()},
            {"audit_every", cfg.audit_every},
            {"best_restart", outcome.best},
            {"best_value", best.value},
            {"best_likelihood", best.likelihood},
            {"restarts", runs}};
}

int cmd_solve(const SolveConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        cfg.validate();
        const DecPomdpModel model = load_valid_model(cfg.model_path);
        const SolveOutcome outcome = run_restarts(model, problem_name(cfg.model_path), cfg);
        for (const auto& r : outcome.restarts)
            if (!r.log.warning.empty()) err << "warning: restart " << r.restart << ": " << r.log.warning << '\n';
        const auto summary = solve_summary(cfg, outcome);

        if (!cfg.output_path.empty()) {
            ensure_dir(cfg.output_path);
            const fs::path dir(cfg.output_path);
            const auto& best = outcome.restarts[outcome.best];
            PolicyProvenance prov{best.seed, best.iters, outcome.model_hash};
            save_policy((dir / "policy.json").string(), best.policy, prov);
            ensure_dir((dir / "runs").string());
            for (const auto& r : outcome.restarts) {
                auto f = open_out(dir / "runs" / ("restart-" + std::to_string(r.restart) + ".jsonl"));
                write_run_log(f, r.log, policy_hash(r.policy));
            }
            if (cfg.format == OutputFormat::Json) {
                open_out(dir / "summary.json") << summary.dump(2) << '\n';
            } else {
                BenchReport table;
                for (const auto& r : outcome.restarts)
                    table.rows.push_back({outcome.problem, cfg.nodes1, cfg.nodes2, r.restart, r.iters, r.likelihood,
                                          r.value, r.ms, r.worst_drop});
                auto f = open_out(dir / "summary.csv");
                write_bench_csv(f, table);
            }
            nlohmann::json timing = {{"total_ms", outcome.total_ms}, {"restart_ms", nlohmann::json::array()}};
            for (const auto& r : outcome.restarts) timing["restart_ms"].push_back(r.ms);
            open_out(dir / "timing.json") << timing.dump(2) << '\n';
        }
        out << summary.dump(2) << '\n';
        return kExitOk;
    });
}

int cmd_evaluate(const EvaluateConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const DecPomdpModel model = load_valid_model(cfg.model_path);
        const JointPolicy policy = load_policy(cfg.policy_path);
        auto report = validate_policy(policy, model);
        if (!report.empty()) {
            std::string msg = "policy does not fit the model";
            for (const auto& v : report) msg += "\n  " + v.message;
            throw DimensionError(msg);
        }
        EvalOptions opts;
        opts.tol = cfg.tol;
        const auto j = evaluation_report(evaluate_exact(model, policy, opts));
        if (cfg.output_path.empty())
            out << j.dump(2) << '\n';
        else
            open_out(cfg.output_path) << j.dump(2) << '\n';
        return kExitOk;
    });
}

int cmd_simulate(const SimulateConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const DecPomdpModel model = load_valid_model(cfg.model_path);
        const JointPolicy policy = load_policy(cfg.policy_path);
        SimulationOptions opts;
        opts.episodes = cfg.episodes;
        opts.horizon = cfg.horizon;
        opts.seed = cfg.seed;
        opts.jobs = cfg.jobs;
        const auto est = simulate(model, policy, opts);
        auto j = simulation_report(est);
        j["truncation_bias"] = truncation_bias(model, est.horizon);
        if (cfg.output_path.empty())
            out << j.dump(2) << '\n';
        else
            open_out(cfg.output_path) << j.dump(2) << '\n';
        return kExitOk;
    });
}

namespace {

std::pair<std::size_t, std::size_t> parse_size(const nlohmann::json& j) {
    if (j.is_number_unsigned()) return {j.get<std::size_t>(), j.get<std::size_t>()};
    if (j.is_array() && j.size() == 2) return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
    throw ParseError("controller size must be N or [N1, N2]");
}

} // namespace

BenchSuite suite_from_json(const nlohmann::json& j, const std::string& base_dir) {
    if (!j.is_object() || !j.contains("entries") || !j["entries"].is_array())
        throw ParseError("suite must be an object with an 'entries' array");
    BenchSuite suite;
    suite.name = j.value("suite", std::string("suite"));
    for (const auto& e : j["entries"]) {
        BenchEntry b;
        if (!e.contains("model")) throw ParseError("suite entry without 'model'");
        fs::path model = e["model"].get<std::string>();
        if (model.is_relative()) model = fs::path(base_dir) / model;
        b.model_path = model.lexically_normal().string();
        b.problem = e.value("problem", problem_name(b.model_path));
        if (!e.contains("sizes") || !e["sizes"].is_array() || e["sizes"].empty())
            throw ParseError("suite entry '" + b.problem + "' needs a non-empty 'sizes' array");
        for (const auto& s : e["sizes"]) {
            b.sizes.push_back(parse_size(s));
            if (b.sizes.back().first == 0 || b.sizes.back().second == 0)
                throw ParseError("suite entry '" + b.problem + "' has a zero controller size");
        }
        b.restarts = e.value("restarts", b.restarts);
        b.seed = e.value("seed", b.seed);
        b.max_iters = e.value("max_iters", b.max_iters);
        b.lik_tol = e.value("lik_tol", b.lik_tol);
        if (b.restarts == 0 || !(b.lik_tol > 0.0))
            throw ParseError("suite entry '" + b.problem + "' needs restarts >= 1 and lik_tol > 0");
        if (e.contains("cutoff")) {
            try {
                b.cutoff = CutoffMode::parse(e["cutoff"].get<std::string>());
            } catch (const std::invalid_argument& ex) {
                throw ParseError("suite entry '" + b.problem + "': " + ex.what());
            }
        }
        if (e.contains("reference")) b.reference = e["reference"].get<double>();
        if (e.contains("min_value")) b.min_value = e["min_value"].get<double>();
        if (e.contains("min_likelihood")) b.min_likelihood = e["min_likelihood"].get<double>();
        suite.entries.push_back(std::move(b));
    }
    return suite;
}

BenchSuite load_suite(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open suite file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    BenchSuite suite = suite_from_json(j, fs::path(path).parent_path().string());
    for (const auto& e : suite.entries) {
        if (!fs::exists(e.model_path)) throw ParseError(path + ": model file '" + e.model_path + "' does not exist");
        load_valid_model(e.model_path);
    }
    return suite;
}

BenchReport run_suite(const BenchSuite& suite, unsigned jobs) {
    struct Task {
        std::size_t entry, size, restart;
    };
    std::vector<DecPomdpModel> models;
    std::vector<Task> tasks;
    for (std::size_t e = 0; e < suite.entries.size(); ++e) {
        models.push_back(load_valid_model(suite.entries[e].model_path));
        for (std::size_t s = 0; s < suite.entries[e].sizes.size(); ++s)
            for (std::size_t r = 0; r < suite.entries[e].restarts; ++r) tasks.push_back({e, s, r});
    }
    std::vector<RestartResult> runs(tasks.size());
    parallel_for(tasks.size(), jobs, [&](std::size_t i) {
        const auto& t = tasks[i];
        const auto& entry = suite.entries[t.entry];
        EmConfig em;
        em.max_iters = entry.max_iters;
        em.lik_tol = entry.lik_tol;
        em.cutoff = entry.cutoff;
        const auto [n1, n2] = entry.sizes[t.size];
        runs[i] = run_one(models[t.entry], n1, n2, entry.seed, t.restart, em);
    });

    BenchReport report;
    report.suite = suite.name;
    std::size_t i = 0;
    for (const auto& entry : suite.entries)
        for (const auto& [n1, n2] : entry.sizes) {
            BenchResult res;
            res.problem = entry.problem;
            res.n1 = n1;
            res.n2 = n2;
            res.reference = entry.reference;
            res.min_value = entry.min_value;
            res.min_likelihood = entry.min_likelihood;
            res.best_value = -INFINITY;
            res.best_likelihood = -INFINITY;
            double sum = 0.0;
            for (std::size_t r = 0; r < entry.restarts; ++r, ++i) {
                const auto& run = runs[i];
                report.rows.push_back({entry.problem, n1, n2, r, run.iters, run.likelihood, run.value, run.ms,
                                       run.worst_drop});
                res.best_value = std::max(res.best_value, run.value);
                res.best_likelihood = std::max(res.best_likelihood, run.likelihood);
                res.total_ms += run.ms;
                sum += run.value;
            }
            res.mean_value = sum / static_cast<double>(entry.restarts);
            if (res.min_value && res.best_value < *res.min_value) res.pass = false;
            if (res.min_likelihood && res.best_likelihood < *res.min_likelihood) res.pass = false;
            report.all_pass = report.all_pass && res.pass;
            report.results.push_back(res);
        }
    return report;
}

void write_bench_csv(std::ostream& out, const BenchReport& report) {
    out << "problem,n1,n2,restart,iters,likelihood,value,ms\n";
    char buf[128];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof buf, ",%zu,%zu,%zu,%zu,%.17g,%.17g,%.3f\n", r.n1, r.n2, r.restart, r.iters,
                      r.likelihood, r.value, r.ms);
        out << r.problem << buf;
    }
}

nlohmann::json bench_to_json(const BenchReport& report) {
    nlohmann::json rows = nlohmann::json::array(), results = nlohmann::json::array();
    for (const auto& r : report.rows)
        rows.push_back({{"problem", r.problem},
                        {"n1", r.n1},
                        {"n2", r.n2},
                        {"restart", r.restart},
                        {"iters", r.iters},
                        {"likelihood", r.likelihood},
                        {"value", r.value},
                        {"ms", r.ms},
                        {"worst_likelihood_drop", r.worst_drop}});
    for (const auto& r : report.results) {
        nlohmann::json j = {{"problem", r.problem},     {"n1", r.n1},
                            {"n2", r.n2},               {"best_value", r.best_value},
                            {"mean_value", r.mean_value}, {"best_likelihood", r.best_likelihood},
                            {"total_ms", r.total_ms},   {"pass", r.pass}};
        if (r.reference) j["reference"] = *r.reference;
        if (r.min_value) j["min_value"] = *r.min_value;
        if (r.min_likelihood) j["min_likelihood"] = *r.min_likelihood;
        results.push_back(j);
    }
    return {{"suite", report.suite}, {"all_pass", report.all_pass}, {"results", results}, {"rows", rows}};
}

int cmd_bench(const BenchConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (cfg.jobs == 0) throw std::invalid_argument("jobs must be at least 1");
        const BenchSuite suite = load_suite(cfg.suite_path);
        const BenchReport report = run_suite(suite, cfg.jobs);
        auto emit = [&](std::ostream& o) {
            if (cfg.format == OutputFormat::Csv)
                write_bench_csv(o, report);
            else
                o << bench_to_json(report).dump(2) << '\n';
        };
        if (cfg.output_path.empty()) {
            emit(out);
        } else {
            auto f = open_out(cfg.output_path);
            emit(f);
        }
        for (const auto& r : report.results) {
            char buf[256];
            std::snprintf(buf, sizeof buf, "%-14s %zux%zu best %.4f mean %.4f L %.4f%s\n", r.problem.c_str(), r.n1,
                          r.n2, r.best_value, r.mean_value, r.best_likelihood, r.pass ? "" : "  MISS");
            err << buf;
        }
        return (cfg.ci && !report.all_pass) ? kExitBenchMiss : kExitOk;
    });
}

} // namespace decem::cli

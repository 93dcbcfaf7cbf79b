#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "decem/controller.hpp"
#include "decem/model.hpp"

namespace decem {

enum class EvalMethod { Automatic, ValueIteration, DirectSolve };

std::string to_string(EvalMethod m);

struct EvalOptions {
    double tol = 1e-9;
    EvalMethod method = EvalMethod::Automatic;
    /// Automatic picks the direct solve up to this many joint states.
    std::size_t direct_limit = 5000;
    std::size_t max_iterations = 1'000'000;
};

/// V(p,q,s) of a joint controller, indexed [p][q][s].
struct ValueTable {
    std::size_t nodes1 = 0, nodes2 = 0, num_states = 0;
    std::vector<double> v;
    double v_b0 = 0.0;
    double residual = 0.0; // max-norm change of one more Bellman backup
    EvalMethod method = EvalMethod::Automatic;
    double wall_ms = 0.0;

    double at(std::size_t p, std::size_t q, std::size_t s) const {
        return v[(p * nodes2 + q) * num_states + s];
    }
};

/// Solves V = r + gamma M V on the (p, q, s) chain, either by a sparse LU
/// factorization or by value iteration until the backup changes no entry by
/// more than `tol`.
ValueTable evaluate_exact(const DecPomdpModel& model, const JointPolicy& policy, const EvalOptions& options = {});

/// sum_{p,q,s} nu1(p) nu2(q) b0(s) V(p,q,s)
double value_at_belief(const ValueTable& vt, const JointPolicy& policy, std::span<const double> b0);

/// One application of the controller value recursion to `v` (layout [p][q][s]).
std::vector<double> bellman_backup(const DecPomdpModel& model, const JointPolicy& policy,
                                   std::span<const double> v);

/// max |backup(v) - v|
double bellman_residual(const DecPomdpModel& model, const JointPolicy& policy, std::span<const double> v);

struct SimulationEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t episodes = 0;
    std::size_t horizon = 0;
    std::uint64_t seed = 0;
};

struct SimulationOptions {
    std::size_t episodes = 10000;
    std::size_t horizon = 0; // 0: smallest h with gamma^h < 1e-6
    std::uint64_t seed = 0;
    unsigned jobs = 1;
};

/// Smallest h with gamma^h < 1e-6.
std::size_t default_horizon(double gamma);

/// Upper bound on |exact value - expected truncated return| for a horizon:
/// gamma^h * max|R| / (1 - gamma).
double truncation_bias(const DecPomdpModel& model, std::size_t horizon);

/// Monte-Carlo estimate of V(b0) under decentralized execution: each agent
/// samples from its own controller and sees only its own observation.
/// Episode i draws from a stream derived from (seed, i), so the result does
/// not depend on `jobs`.
SimulationEstimate simulate(const DecPomdpModel& model, const JointPolicy& policy, const SimulationOptions& options);

nlohmann::json evaluation_report(const ValueTable& vt);
nlohmann::json simulation_report(const SimulationEstimate& est);

} // namespace decem

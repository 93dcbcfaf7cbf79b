#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "decem/model.hpp"

namespace decem {

/// Stochastic finite-state controller for one agent.
///   action_probs    pi(a|n)        [n][a]
///   node_transition lambda(n'|n,o) [n][o][n']
///   initial_dist    nu(n)          [n]
struct AgentFsc {
    std::size_t num_nodes = 0;
    std::size_t num_actions = 0;
    std::size_t num_obs = 0;
    std::vector<double> action_probs;
    std::vector<double> node_transition;
    std::vector<double> initial_dist;

    static AgentFsc zeros(std::size_t nodes, std::size_t actions, std::size_t obs);

    double pi(std::size_t n, std::size_t a) const { return action_probs[n * num_actions + a]; }
    double lambda(std::size_t n, std::size_t o, std::size_t n2) const {
        return node_transition[(n * num_obs + o) * num_nodes + n2];
    }
    double nu(std::size_t n) const { return initial_dist[n]; }

    std::span<const double> pi_row(std::size_t n) const {
        return std::span<const double>(action_probs).subspan(n * num_actions, num_actions);
    }
    std::span<const double> lambda_row(std::size_t n, std::size_t o) const {
        return std::span<const double>(node_transition).subspan((n * num_obs + o) * num_nodes, num_nodes);
    }
};

/// Agent 1's controller acts over A and reads Y; agent 2's over B and Z.
struct JointPolicy {
    AgentFsc agent1;
    AgentFsc agent2;

    const AgentFsc& agent(int i) const { return i == 1 ? agent1 : agent2; }
    AgentFsc& agent(int i) { return i == 1 ? agent1 : agent2; }
};

/// Random full-support controllers: every row gets uniform(0,1) entries
/// floored at 1e-3, then normalized. Pure function of the arguments.
JointPolicy init_random(const DecPomdpModel& model, std::size_t nodes1, std::size_t nodes2,
                        std::uint64_t seed);

ValidationReport validate_policy(const JointPolicy& policy, const DecPomdpModel& model);

/// Deterministic controller choices for one agent.
struct DeterministicFsc {
    std::vector<std::size_t> action;                 // [n]
    std::vector<std::vector<std::size_t>> next_node; // [n][o]
    std::size_t start_node = 0;
};

/// One-hot controllers. `num_actions`/`num_obs` give the alphabet sizes for
/// agent 1 and agent 2. Throws std::out_of_range on an index outside them.
JointPolicy make_deterministic(const DeterministicFsc& agent1, const DeterministicFsc& agent2,
                               std::size_t num_actions1, std::size_t num_obs1,
                               std::size_t num_actions2, std::size_t num_obs2);

/// Same, taking alphabet sizes from the model.
JointPolicy make_deterministic(const DecPomdpModel& model, const DeterministicFsc& agent1,
                               const DeterministicFsc& agent2);

/// Extra fields carried by an exported policy.
struct PolicyProvenance {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> iterations;
    std::string model_hash;
};

nlohmann::json policy_to_json(const JointPolicy& policy, const PolicyProvenance& provenance = {});
JointPolicy policy_from_json(const nlohmann::json& j, PolicyProvenance* provenance = nullptr);

void save_policy(const std::string& path, const JointPolicy& policy, const PolicyProvenance& provenance = {});
JointPolicy load_policy(const std::string& path, PolicyProvenance* provenance = nullptr);

} // namespace decem

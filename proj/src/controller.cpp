#include "decem/controller.hpp"

#include "decem/errors.hpp"
#include "decem/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace decem {

AgentFsc AgentFsc::zeros(std::size_t nodes, std::size_t actions, std::size_t obs) {
    AgentFsc f;
    f.num_nodes = nodes;
    f.num_actions = actions;
    f.num_obs = obs;
    f.action_probs.assign(nodes * actions, 0.0);
    f.node_transition.assign(nodes * obs * nodes, 0.0);
    f.initial_dist.assign(nodes, 0.0);
    return f;
}

namespace {

constexpr double kInitFloor = 1e-3;

void random_row(Rng& rng, std::span<double> row) {
    double sum = 0.0;
    for (double& v : row) {
        v = std::max(rng.uniform(), kInitFloor);
        sum += v;
    }
    for (double& v : row) v /= sum;
}

AgentFsc random_agent(Rng& rng, std::size_t nodes, std::size_t actions, std::size_t obs) {
    AgentFsc f = AgentFsc::zeros(nodes, actions, obs);
    for (std::size_t n = 0; n < nodes; ++n)
        random_row(rng, std::span<double>(f.action_probs).subspan(n * actions, actions));
    for (std::size_t r = 0; r < nodes * obs; ++r)
        random_row(rng, std::span<double>(f.node_transition).subspan(r * nodes, nodes));
    random_row(rng, f.initial_dist);
    return f;
}

void check_rows(ValidationReport& report, const std::string& table, std::span<const double> data,
                std::size_t row_len, std::size_t rows, std::size_t split = 0) {
    for (std::size_t r = 0; r < rows; ++r) {
        auto row = data.subspan(r * row_len, row_len);
        std::vector<std::size_t> index = split ? std::vector<std::size_t>{r / split, r % split}
                                               : std::vector<std::size_t>{r};
        double sum = 0.0;
        for (std::size_t i = 0; i < row_len; ++i) {
            if (!(row[i] >= 0.0 && row[i] <= 1.0)) {
                auto idx = index;
                idx.push_back(i);
                report.push_back({table, std::move(idx), row[i], "probability outside [0, 1]"});
            }
            sum += row[i];
        }
        if (!(std::abs(sum - 1.0) <= kStochasticTolerance))
            report.push_back({table, std::move(index), sum - 1.0, "row does not sum to 1"});
    }
}

void validate_agent(ValidationReport& report, const AgentFsc& f, const std::string& name,
                    std::size_t actions, std::size_t obs) {
    if (f.num_nodes == 0) report.push_back({name, {}, 0.0, "controller has no nodes"});
    if (f.num_actions != actions)
        report.push_back({name + ".pi", {}, static_cast<double>(f.num_actions),
                          "controller has " + std::to_string(f.num_actions) + " actions, model has " +
                              std::to_string(actions)});
    if (f.num_obs != obs)
        report.push_back({name + ".lambda", {}, static_cast<double>(f.num_obs),
                          "controller reads " + std::to_string(f.num_obs) + " observations, model has " +
                              std::to_string(obs)});
    const std::size_t n = f.num_nodes;
    bool sized = f.action_probs.size() == n * f.num_actions &&
                 f.node_transition.size() == n * f.num_obs * n && f.initial_dist.size() == n;
    if (!sized) {
        report.push_back({name, {}, 0.0, "table sizes do not match the declared node/alphabet counts"});
        return;
    }
    check_rows(report, name + ".pi", f.action_probs, f.num_actions, n);
    check_rows(report, name + ".lambda", f.node_transition, n, n * f.num_obs, f.num_obs);
    check_rows(report, name + ".nu", f.initial_dist, n, 1);
}

AgentFsc deterministic_agent(const DeterministicFsc& d, std::size_t actions, std::size_t obs,
                             const char* who) {
    const std::size_t n = d.action.size();
    if (n == 0) throw std::out_of_range(std::string(who) + ": deterministic controller needs at least one node");
    if (d.next_node.size() != n)
        throw std::out_of_range(std::string(who) + ": next_node needs one row per node");
    if (d.start_node >= n) throw std::out_of_range(std::string(who) + ": start node out of range");
    AgentFsc f = AgentFsc::zeros(n, actions, obs);
    for (std::size_t i = 0; i < n; ++i) {
        if (d.action[i] >= actions) throw std::out_of_range(std::string(who) + ": action index out of range");
        f.action_probs[i * actions + d.action[i]] = 1.0;
        if (d.next_node[i].size() != obs)
            throw std::out_of_range(std::string(who) + ": next_node row needs one entry per observation");
        for (std::size_t o = 0; o < obs; ++o) {
            std::size_t target = d.next_node[i][o];
            if (target >= n) throw std::out_of_range(std::string(who) + ": next node out of range");
            f.node_transition[(i * obs + o) * n + target] = 1.0;
        }
    }
    f.initial_dist[d.start_node] = 1.0;
    return f;
}

nlohmann::json agent_to_json(const AgentFsc& f) {
    nlohmann::json j;
    j["nodes"] = f.num_nodes;
    j["actions"] = f.num_actions;
    j["observations"] = f.num_obs;
    auto rows = [](const std::vector<double>& v, std::size_t len) {
        nlohmann::json out = nlohmann::json::array();
        for (std::size_t i = 0; i < v.size(); i += len)
            out.push_back(std::vector<double>(v.begin() + static_cast<long>(i), v.begin() + static_cast<long>(i + len)));
        return out;
    };
    j["pi"] = rows(f.action_probs, f.num_actions);
    nlohmann::json lam = nlohmann::json::array();
    for (std::size_t n = 0; n < f.num_nodes; ++n) {
        nlohmann::json per_obs = nlohmann::json::array();
        for (std::size_t o = 0; o < f.num_obs; ++o) {
            auto row = f.lambda_row(n, o);
            per_obs.push_back(std::vector<double>(row.begin(), row.end()));
        }
        lam.push_back(per_obs);
    }
    j["lambda"] = lam;
    j["nu"] = f.initial_dist;
    return j;
}

AgentFsc agent_from_json(const nlohmann::json& j, const char* who) {
    try {
        AgentFsc f = AgentFsc::zeros(j.at("nodes").get<std::size_t>(), j.at("actions").get<std::size_t>(),
                                     j.at("observations").get<std::size_t>());
        const auto& pi = j.at("pi");
        const auto& lam = j.at("lambda");
        if (pi.size() != f.num_nodes || lam.size() != f.num_nodes)
            throw ParseError(std::string(who) + ": pi/lambda need one entry per node");
        for (std::size_t n = 0; n < f.num_nodes; ++n) {
            auto row = pi[n].get<std::vector<double>>();
            if (row.size() != f.num_actions) throw ParseError(std::string(who) + ": pi row has the wrong length");
            std::copy(row.begin(), row.end(), f.action_probs.begin() + static_cast<long>(n * f.num_actions));
            if (lam[n].size() != f.num_obs) throw ParseError(std::string(who) + ": lambda needs one row per observation");
            for (std::size_t o = 0; o < f.num_obs; ++o) {
                auto lrow = lam[n][o].get<std::vector<double>>();
                if (lrow.size() != f.num_nodes) throw ParseError(std::string(who) + ": lambda row has the wrong length");
                std::copy(lrow.begin(), lrow.end(),
                          f.node_transition.begin() + static_cast<long>((n * f.num_obs + o) * f.num_nodes));
            }
        }
        f.initial_dist = j.at("nu").get<std::vector<double>>();
        if (f.initial_dist.size() != f.num_nodes) throw ParseError(std::string(who) + ": nu has the wrong length");
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string(who) + ": " + e.what());
    }
}

} // namespace

JointPolicy init_random(const DecPomdpModel& model, std::size_t nodes1, std::size_t nodes2,
                        std::uint64_t seed) {
    if (nodes1 == 0 || nodes2 == 0) throw std::invalid_argument("controller node counts must be at least 1");
    Rng rng(derive_seed(seed, 0x1717));
    JointPolicy p;
    p.agent1 = random_agent(rng, nodes1, model.num_actions1, model.num_obs1);
    p.agent2 = random_agent(rng, nodes2, model.num_actions2, model.num_obs2);
    return p;
}

ValidationReport validate_policy(const JointPolicy& policy, const DecPomdpModel& model) {
    ValidationReport report;
    validate_agent(report, policy.agent1, "agent1", model.num_actions1, model.num_obs1);
    validate_agent(report, policy.agent2, "agent2", model.num_actions2, model.num_obs2);
    return report;
}

JointPolicy make_deterministic(const DeterministicFsc& agent1, const DeterministicFsc& agent2,
                               std::size_t num_actions1, std::size_t num_obs1,
                               std::size_t num_actions2, std::size_t num_obs2) {
    return {deterministic_agent(agent1, num_actions1, num_obs1, "agent1"),
            deterministic_agent(agent2, num_actions2, num_obs2, "agent2")};
}

JointPolicy make_deterministic(const DecPomdpModel& model, const DeterministicFsc& agent1,
                               const DeterministicFsc& agent2) {
    return make_deterministic(agent1, agent2, model.num_actions1, model.num_obs1, model.num_actions2,
                              model.num_obs2);
}

nlohmann::json policy_to_json(const JointPolicy& policy, const PolicyProvenance& provenance) {
    nlohmann::json j;
    j["format"] = "decem-policy-1";
    j["agent1"] = agent_to_json(policy.agent1);
    j["agent2"] = agent_to_json(policy.agent2);
    nlohmann::json meta = nlohmann::json::object();
    if (provenance.seed) meta["seed"] = *provenance.seed;
    if (provenance.iterations) meta["iterations"] = *provenance.iterations;
    if (!provenance.model_hash.empty()) meta["model_hash"] = provenance.model_hash;
    j["provenance"] = meta;
    return j;
}

JointPolicy policy_from_json(const nlohmann::json& j, PolicyProvenance* provenance) {
    if (!j.is_object() || !j.contains("agent1") || !j.contains("agent2"))
        throw ParseError("policy JSON needs 'agent1' and 'agent2'");
    JointPolicy p{agent_from_json(j["agent1"], "agent1"), agent_from_json(j["agent2"], "agent2")};
    if (provenance) {
        *provenance = {};
        if (auto it = j.find("provenance"); it != j.end() && it->is_object()) {
            if (it->contains("seed")) provenance->seed = (*it)["seed"].get<std::uint64_t>();
            if (it->contains("iterations")) provenance->iterations = (*it)["iterations"].get<std::size_t>();
            if (it->contains("model_hash")) provenance->model_hash = (*it)["model_hash"].get<std::string>();
        }
    }
    return p;
}

void save_policy(const std::string& path, const JointPolicy& policy, const PolicyProvenance& provenance) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write policy file '" + path + "'");
    out << policy_to_json(policy, provenance).dump(1) << '\n';
}

JointPolicy load_policy(const std::string& path, PolicyProvenance* provenance) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open policy file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return policy_from_json(j, provenance);
}

} // namespace decem

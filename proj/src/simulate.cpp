#include "decem/evaluation.hpp"
#include "decem/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace decem {

namespace {

/// Sparse outcome lists for sampling.
struct Outcomes {
    std::vector<std::size_t> start;
    std::vector<std::uint32_t> item;
    std::vector<double> prob;

    std::size_t draw(Rng& rng, std::size_t row) const {
        double u = rng.uniform();
        std::size_t lo = start[row], hi = start[row + 1];
        for (std::size_t k = lo; k < hi; ++k) {
            if (u < prob[k]) return item[k];
            u -= prob[k];
        }
        return item[hi - 1];
    }
};

Outcomes collect(std::size_t rows, std::size_t width, const std::vector<double>& table) {
    Outcomes o;
    o.start.reserve(rows + 1);
    for (std::size_t r = 0; r < rows; ++r) {
        o.start.push_back(o.item.size());
        for (std::size_t i = 0; i < width; ++i) {
            double p = table[r * width + i];
            if (p > 0.0) {
                o.item.push_back(static_cast<std::uint32_t>(i));
                o.prob.push_back(p);
            }
        }
    }
    o.start.push_back(o.item.size());
    return o;
}

struct Sampler {
    const DecPomdpModel& m;
    const JointPolicy& policy;
    Outcomes trans, obs, pi1, pi2, lam1, lam2, nu1, nu2, b0;

    Sampler(const DecPomdpModel& model, const JointPolicy& pol)
        : m(model), policy(pol),
          trans(collect(m.num_states * m.num_actions1 * m.num_actions2, m.num_states, m.transition)),
          obs(collect(m.num_states * m.num_actions1 * m.num_actions2, m.num_joint_obs(), m.observation)),
          pi1(collect(pol.agent1.num_nodes, pol.agent1.num_actions, pol.agent1.action_probs)),
          pi2(collect(pol.agent2.num_nodes, pol.agent2.num_actions, pol.agent2.action_probs)),
          lam1(collect(pol.agent1.num_nodes * pol.agent1.num_obs, pol.agent1.num_nodes, pol.agent1.node_transition)),
          lam2(collect(pol.agent2.num_nodes * pol.agent2.num_obs, pol.agent2.num_nodes, pol.agent2.node_transition)),
          nu1(collect(1, pol.agent1.num_nodes, pol.agent1.initial_dist)),
          nu2(collect(1, pol.agent2.num_nodes, pol.agent2.initial_dist)),
          b0(collect(1, m.num_states, m.initial_belief)) {}

    double episode(Rng& rng, std::size_t horizon) const {
        const double gamma = m.discount;
        std::size_t s = b0.draw(rng, 0);
        std::size_t p = nu1.draw(rng, 0);
        std::size_t q = nu2.draw(rng, 0);
        double ret = 0.0, discount = 1.0;
        for (std::size_t t = 0; t < horizon; ++t) {
            // each agent acts on its own node only
            std::size_t a = pi1.draw(rng, p);
            std::size_t b = pi2.draw(rng, q);
            ret += discount * m.R(s, a, b);
            discount *= gamma;
            std::size_t sab = m.r_index(s, a, b);
            std::size_t s2 = trans.draw(rng, sab);
            std::size_t yz = obs.draw(rng, m.r_index(s2, a, b));
            std::size_t y = yz / m.num_obs2, z = yz % m.num_obs2;
            // and updates its node from its own observation component
            p = lam1.draw(rng, p * m.num_obs1 + y);
            q = lam2.draw(rng, q * m.num_obs2 + z);
            s = s2;
        }
        return ret;
    }
};

} // namespace

std::size_t default_horizon(double gamma) {
    if (gamma <= 0.0) return 1;
    std::size_t h = 1;
    double g = gamma;
    while (!(g < 1e-6)) {
        g *= gamma;
        ++h;
    }
    return h;
}

double truncation_bias(const DecPomdpModel& model, std::size_t horizon) {
    double rmax = 0.0;
    for (double r : model.reward) rmax = std::max(rmax, std::abs(r));
    return std::pow(model.discount, static_cast<double>(horizon)) * rmax / (1.0 - model.discount);
}

SimulationEstimate simulate(const DecPomdpModel& model, const JointPolicy& policy, const SimulationOptions& options) {
    if (options.episodes == 0) throw std::invalid_argument("simulation needs at least one episode");
    auto report = validate_policy(policy, model);
    if (!report.empty()) throw std::invalid_argument("policy is not valid for this model: " + report.front().message);
    SimulationEstimate est;
    est.episodes = options.episodes;
    est.horizon = options.horizon ? options.horizon : default_horizon(model.discount);
    est.seed = options.seed;

    const Sampler sampler(model, policy);
    std::vector<double> returns(options.episodes);
    auto run_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Rng rng(derive_seed(options.seed, i));
            returns[i] = sampler.episode(rng, est.horizon);
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(options.episodes)));
    if (jobs == 1) {
        run_range(0, options.episodes);
    } else {
        std::vector<std::thread> workers;
        std::size_t chunk = (options.episodes + jobs - 1) / jobs;
        for (unsigned j = 0; j < jobs; ++j) {
            std::size_t b = j * chunk, e = std::min(options.episodes, b + chunk);
            if (b < e) workers.emplace_back(run_range, b, e);
        }
        for (auto& w : workers) w.join();
    }

    // shifted by the first return so identical returns give exactly zero spread
    const double shift = returns.front();
    double sum = 0.0;
    for (double r : returns) sum += r - shift;
    const double offset = sum / static_cast<double>(options.episodes);
    est.mean = shift + offset;
    if (options.episodes > 1) {
        double ss = 0.0;
        for (double r : returns) ss += (r - shift - offset) * (r - shift - offset);
        double var = ss / static_cast<double>(options.episodes - 1);
        est.std_error = std::sqrt(var / static_cast<double>(options.episodes));
    }
    return est;
}

} // namespace decem

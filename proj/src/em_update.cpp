#include "decem/em.hpp"

#include "decem/errors.hpp"

#include <algorithm>
#include <cmath>

namespace decem {

namespace {

constexpr double kFloor = 1e-12;
constexpr double kZeroNormalizer = 1e-300;
constexpr double kReachable = 1e-12;

struct Dims {
    std::size_t n1, n2, ns, na, nb, ny, nz;

    Dims(const DecPomdpModel& m, const JointPolicy& p)
        : n1(p.agent1.num_nodes), n2(p.agent2.num_nodes), ns(m.num_states), na(m.num_actions1),
          nb(m.num_actions2), ny(m.num_obs1), nz(m.num_obs2) {}

    std::size_t joint(std::size_t p, std::size_t q, std::size_t s) const { return (p * n2 + q) * ns + s; }
    // B2(p', q, z, s')
    std::size_t b2(std::size_t p2, std::size_t q, std::size_t z, std::size_t s2) const {
        return ((p2 * n2 + q) * nz + z) * ns + s2;
    }
    // B1(p, y, q', s')
    std::size_t b1(std::size_t p, std::size_t y, std::size_t q2, std::size_t s2) const {
        return ((p * ny + y) * n2 + q2) * ns + s2;
    }
    // B12(p, y, q, z, s')
    std::size_t b12(std::size_t p, std::size_t y, std::size_t q, std::size_t z, std::size_t s2) const {
        return (((p * ny + y) * n2 + q) * nz + z) * ns + s2;
    }
    // G(p, q, y, z, s')
    std::size_t g(std::size_t p, std::size_t q, std::size_t y, std::size_t z, std::size_t s2) const {
        return (((p * n2 + q) * ny + y) * nz + z) * ns + s2;
    }
};

void check_inputs(const DecPomdpModel& m, const JointPolicy& policy, const MessageSet& msgs) {
    const std::size_t n = policy.agent1.num_nodes * policy.agent2.num_nodes * m.num_states;
    if (policy.agent1.num_actions != m.num_actions1 || policy.agent2.num_actions != m.num_actions2 ||
        policy.agent1.num_obs != m.num_obs1 || policy.agent2.num_obs != m.num_obs2)
        throw DimensionError("policy does not fit the model's action/observation alphabets");
    if (msgs.alpha_hat.size() != n || msgs.beta_hat.size() != n)
        throw DimensionError("messages were computed for different dimensions");
}

void check_agent(int agent) {
    if (agent != 1 && agent != 2) throw std::invalid_argument("agent must be 1 or 2");
}

/// sum_{q'} lambda2(q'|q,z) beta_hat(p',q',s')
std::vector<double> beta_through_agent2(const Dims& d, const JointPolicy& pol, const MessageSet& msgs) {
    std::vector<double> out(d.n1 * d.n2 * d.nz * d.ns, 0.0);
    for (std::size_t p2 = 0; p2 < d.n1; ++p2)
        for (std::size_t q = 0; q < d.n2; ++q)
            for (std::size_t z = 0; z < d.nz; ++z) {
                const auto l2 = pol.agent2.lambda_row(q, z);
                double* row = &out[d.b2(p2, q, z, 0)];
                for (std::size_t q2 = 0; q2 < d.n2; ++q2) {
                    if (l2[q2] == 0.0) continue;
                    const double* bh = &msgs.beta_hat[d.joint(p2, q2, 0)];
                    for (std::size_t s2 = 0; s2 < d.ns; ++s2) row[s2] += l2[q2] * bh[s2];
                }
            }
    return out;
}

/// sum_{p'} lambda1(p'|p,y) beta_hat(p',q',s')
std::vector<double> beta_through_agent1(const Dims& d, const JointPolicy& pol, const MessageSet& msgs) {
    std::vector<double> out(d.n1 * d.ny * d.n2 * d.ns, 0.0);
    for (std::size_t p = 0; p < d.n1; ++p)
        for (std::size_t y = 0; y < d.ny; ++y) {
            const auto l1 = pol.agent1.lambda_row(p, y);
            for (std::size_t p2 = 0; p2 < d.n1; ++p2) {
                if (l1[p2] == 0.0) continue;
                for (std::size_t q2 = 0; q2 < d.n2; ++q2) {
                    double* row = &out[d.b1(p, y, q2, 0)];
                    const double* bh = &msgs.beta_hat[d.joint(p2, q2, 0)];
                    for (std::size_t s2 = 0; s2 < d.ns; ++s2) row[s2] += l1[p2] * bh[s2];
                }
            }
        }
    return out;
}

/// sum_{p'} lambda1(p'|p,y) B2(p',q,z,s')
std::vector<double> beta_through_both(const Dims& d, const JointPolicy& pol, const std::vector<double>& b2) {
    std::vector<double> out(d.n1 * d.ny * d.n2 * d.nz * d.ns, 0.0);
    const std::size_t block = d.n2 * d.nz * d.ns; // B2 and B12 share the (q, z, s') tail
    for (std::size_t p = 0; p < d.n1; ++p)
        for (std::size_t y = 0; y < d.ny; ++y) {
            const auto l1 = pol.agent1.lambda_row(p, y);
            double* row = &out[d.b12(p, y, 0, 0, 0)];
            for (std::size_t p2 = 0; p2 < d.n1; ++p2) {
                if (l1[p2] == 0.0) continue;
                const double* src = &b2[d.b2(p2, 0, 0, 0)];
                for (std::size_t i = 0; i < block; ++i) row[i] += l1[p2] * src[i];
            }
        }
    return out;
}

struct ActionStats {
    std::vector<double> s1, s2;       // [p][a], [q][b]
    std::vector<double> mass1, mass2; // alpha-hat mass per node
};

ActionStats action_stats(const DecPomdpModel& m, const NormalizedRewards& rhat, const SuccessorIndex& succ,
                         const JointPolicy& pol, const MessageSet& msgs) {
    const Dims d(m, pol);
    const auto b12 = beta_through_both(d, pol, beta_through_agent2(d, pol, msgs));
    const double future = msgs.gamma / (1.0 - msgs.gamma);
    ActionStats st;
    st.s1.assign(d.n1 * d.na, 0.0);
    st.s2.assign(d.n2 * d.nb, 0.0);
    st.mass1.assign(d.n1, 0.0);
    st.mass2.assign(d.n2, 0.0);
    std::vector<double> u(d.na * d.nb);
    for (std::size_t p = 0; p < d.n1; ++p)
        for (std::size_t q = 0; q < d.n2; ++q)
            for (std::size_t s = 0; s < d.ns; ++s) {
                const double w = msgs.alpha_hat[d.joint(p, q, s)];
                st.mass1[p] += w;
                st.mass2[q] += w;
                if (w == 0.0) continue;
                for (std::size_t a = 0; a < d.na; ++a)
                    for (std::size_t b = 0; b < d.nb; ++b) {
                        double acc = 0.0;
                        for (const auto& e : succ.block(s, a, b))
                            acc += e.weight * b12[d.b12(p, e.y, q, e.z, e.next_state)];
                        u[a * d.nb + b] = rhat.r_hat[m.r_index(s, a, b)] + future * acc;
                    }
                for (std::size_t a = 0; a < d.na; ++a) {
                    const double pa = pol.agent1.pi(p, a);
                    for (std::size_t b = 0; b < d.nb; ++b) {
                        const double ub = w * u[a * d.nb + b];
                        st.s1[p * d.na + a] += ub * pol.agent2.pi(q, b);
                        st.s2[q * d.nb + b] += ub * pa;
                    }
                }
            }
    return st;
}

struct TransitionStats {
    std::vector<double> l1, l2; // [p][y][p'], [q][z][q'] (before multiplying by lambda)
    std::vector<double> g1, g2; // probability mass entering each (p, y) / (q, z)
};

TransitionStats transition_stats(const DecPomdpModel& m, const SuccessorIndex& succ, const JointPolicy& pol,
                                 const MessageSet& msgs, bool want1, bool want2) {
    const Dims d(m, pol);
    // G(p,q,y,z,s') = sum_{s,a,b} alpha_hat(p,q,s) pi1(a|p) pi2(b|q) P(s'|s,a,b) P(y,z|s',a,b)
    std::vector<double> g(d.n1 * d.n2 * d.ny * d.nz * d.ns, 0.0);
    for (std::size_t p = 0; p < d.n1; ++p)
        for (std::size_t q = 0; q < d.n2; ++q)
            for (std::size_t s = 0; s < d.ns; ++s) {
                const double w = msgs.alpha_hat[d.joint(p, q, s)];
                if (w == 0.0) continue;
                for (std::size_t a = 0; a < d.na; ++a) {
                    const double wa = w * pol.agent1.pi(p, a);
                    if (wa == 0.0) continue;
                    for (std::size_t b = 0; b < d.nb; ++b) {
                        const double wab = wa * pol.agent2.pi(q, b);
                        if (wab == 0.0) continue;
                        for (const auto& e : succ.block(s, a, b)) g[d.g(p, q, e.y, e.z, e.next_state)] += wab * e.weight;
                    }
                }
            }

    TransitionStats st;
    if (want1) {
        const auto b2 = beta_through_agent2(d, pol, msgs);
        st.l1.assign(d.n1 * d.ny * d.n1, 0.0);
        st.g1.assign(d.n1 * d.ny, 0.0);
        for (std::size_t p = 0; p < d.n1; ++p)
            for (std::size_t y = 0; y < d.ny; ++y) {
                double* row = &st.l1[(p * d.ny + y) * d.n1];
                for (std::size_t q = 0; q < d.n2; ++q)
                    for (std::size_t z = 0; z < d.nz; ++z) {
                        const double* gr = &g[d.g(p, q, y, z, 0)];
                        for (std::size_t s2 = 0; s2 < d.ns; ++s2) st.g1[p * d.ny + y] += gr[s2];
                        for (std::size_t p2 = 0; p2 < d.n1; ++p2) {
                            const double* br = &b2[d.b2(p2, q, z, 0)];
                            double acc = 0.0;
                            for (std::size_t s2 = 0; s2 < d.ns; ++s2) acc += gr[s2] * br[s2];
                            row[p2] += acc;
                        }
                    }
            }
    }
    if (want2) {
        const auto b1 = beta_through_agent1(d, pol, msgs);
        st.l2.assign(d.n2 * d.nz * d.n2, 0.0);
        st.g2.assign(d.n2 * d.nz, 0.0);
        for (std::size_t q = 0; q < d.n2; ++q)
            for (std::size_t z = 0; z < d.nz; ++z) {
                double* row = &st.l2[(q * d.nz + z) * d.n2];
                for (std::size_t p = 0; p < d.n1; ++p)
                    for (std::size_t y = 0; y < d.ny; ++y) {
                        const double* gr = &g[d.g(p, q, y, z, 0)];
                        for (std::size_t s2 = 0; s2 < d.ns; ++s2) st.g2[q * d.nz + z] += gr[s2];
                        for (std::size_t q2 = 0; q2 < d.n2; ++q2) {
                            const double* br = &b1[d.b1(p, y, q2, 0)];
                            double acc = 0.0;
                            for (std::size_t s2 = 0; s2 < d.ns; ++s2) acc += gr[s2] * br[s2];
                            row[q2] += acc;
                        }
                    }
            }
    }
    return st;
}

/// Multiplicative update of one row: new ∝ old * stat, with the floor applied
/// to entries that were positive.
void update_row(std::span<const double> old, std::span<const double> stat, double reach, std::span<double> out,
                const std::string& what) {
    double c = 0.0;
    for (std::size_t i = 0; i < old.size(); ++i) {
        const double v = old[i] * stat[i];
        if (!std::isfinite(v)) throw NumericalError("non-finite statistic in " + what);
        out[i] = v;
        c += v;
    }
    if (!(c >= kZeroNormalizer)) {
        if (reach > kReachable)
            throw NumericalError("zero normalizer in " + what + " for a reachable row (mass " + std::to_string(reach) +
                                 ")");
        std::copy(old.begin(), old.end(), out.begin());
        return;
    }
    double c2 = 0.0;
    for (std::size_t i = 0; i < old.size(); ++i) {
        double v = out[i] / c;
        if (old[i] > 0.0) v = std::max(v, kFloor);
        out[i] = v;
        c2 += v;
    }
    for (double& v : out) v /= c2;
}

std::vector<double> apply_actions(const AgentFsc& f, const std::vector<double>& stat, const std::vector<double>& mass,
                                  const std::string& name) {
    std::vector<double> out(f.action_probs.size());
    for (std::size_t n = 0; n < f.num_nodes; ++n)
        update_row(f.pi_row(n), std::span<const double>(stat).subspan(n * f.num_actions, f.num_actions), mass[n],
                   std::span<double>(out).subspan(n * f.num_actions, f.num_actions),
                   name + ".pi row " + std::to_string(n));
    return out;
}

std::vector<double> apply_transitions(const AgentFsc& f, const std::vector<double>& stat,
                                      const std::vector<double>& mass, const std::string& name) {
    std::vector<double> out(f.node_transition.size());
    for (std::size_t n = 0; n < f.num_nodes; ++n)
        for (std::size_t o = 0; o < f.num_obs; ++o) {
            const std::size_t off = (n * f.num_obs + o) * f.num_nodes;
            update_row(f.lambda_row(n, o), std::span<const double>(stat).subspan(off, f.num_nodes),
                       mass[n * f.num_obs + o], std::span<double>(out).subspan(off, f.num_nodes),
                       name + ".lambda row (" + std::to_string(n) + ", " + std::to_string(o) + ")");
        }
    return out;
}

} // namespace

std::vector<double> update_actions(const DecPomdpModel& model, const NormalizedRewards& rhat,
                                   const SuccessorIndex& succ, const JointPolicy& policy, const MessageSet& msgs,
                                   int agent) {
    check_agent(agent);
    check_inputs(model, policy, msgs);
    const auto st = action_stats(model, rhat, succ, policy, msgs);
    return agent == 1 ? apply_actions(policy.agent1, st.s1, st.mass1, "agent1")
                      : apply_actions(policy.agent2, st.s2, st.mass2, "agent2");
}

std::vector<double> update_node_transitions(const DecPomdpModel& model, const SuccessorIndex& succ,
                                            const JointPolicy& policy, const MessageSet& msgs, int agent) {
    check_agent(agent);
    check_inputs(model, policy, msgs);
    const auto st = transition_stats(model, succ, policy, msgs, agent == 1, agent == 2);
    return agent == 1 ? apply_transitions(policy.agent1, st.l1, st.g1, "agent1")
                      : apply_transitions(policy.agent2, st.l2, st.g2, "agent2");
}

std::vector<double> update_initial(const JointPolicy& policy, const MessageSet& msgs, std::span<const double> b0,
                                   int agent) {
    check_agent(agent);
    const auto& f1 = policy.agent1;
    const auto& f2 = policy.agent2;
    const std::size_t ns = b0.size();
    if (msgs.beta_hat.size() != f1.num_nodes * f2.num_nodes * ns)
        throw DimensionError("messages were computed for different dimensions");
    const AgentFsc& f = policy.agent(agent);
    std::vector<double> stat(f.num_nodes, 0.0);
    for (std::size_t p = 0; p < f1.num_nodes; ++p)
        for (std::size_t q = 0; q < f2.num_nodes; ++q) {
            const double* bh = &msgs.beta_hat[(p * f2.num_nodes + q) * ns];
            double acc = 0.0;
            for (std::size_t s = 0; s < ns; ++s) acc += bh[s] * b0[s];
            if (agent == 1)
                stat[p] += acc * f2.nu(q);
            else
                stat[q] += acc * f1.nu(p);
        }
    std::vector<double> out(f.num_nodes);
    // the start distribution is always reached
    update_row(f.initial_dist, stat, 1.0, out, "agent" + std::to_string(agent) + ".nu");
    return out;
}

JointPolicy m_step(const DecPomdpModel& model, const NormalizedRewards& rhat, const SuccessorIndex& succ,
                   const JointPolicy& policy, const MessageSet& msgs) {
    check_inputs(model, policy, msgs);
    const auto as = action_stats(model, rhat, succ, policy, msgs);
    const auto ts = transition_stats(model, succ, policy, msgs, true, true);
    JointPolicy next = policy;
    next.agent1.action_probs = apply_actions(policy.agent1, as.s1, as.mass1, "agent1");
    next.agent2.action_probs = apply_actions(policy.agent2, as.s2, as.mass2, "agent2");
    next.agent1.node_transition = apply_transitions(policy.agent1, ts.l1, ts.g1, "agent1");
    next.agent2.node_transition = apply_transitions(policy.agent2, ts.l2, ts.g2, "agent2");
    next.agent1.initial_dist = update_initial(policy, msgs, model.initial_belief, 1);
    next.agent2.initial_dist = update_initial(policy, msgs, model.initial_belief, 2);
    return next;
}

} // namespace decem

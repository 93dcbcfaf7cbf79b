#pragma once

// Shared fixtures and brute-force reference implementations for the tests.
// The oracles here deliberately avoid the library's sparse structures.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "decem/controller.hpp"
#include "decem/em.hpp"
#include "decem/model.hpp"
#include "decem/rng.hpp"

namespace testing {

using namespace decem;

inline std::string data_path(const std::string& rel) { return std::string(DECEM_DATA_DIR) + "/" + rel; }
inline std::string bench_path(const std::string& name) { return data_path("benchmarks/" + name + ".dpomdp"); }

/// Random row over `n` entries with a random support of at most `max_support`.
inline void random_row(Rng& rng, double* row, std::size_t n, std::size_t max_support) {
    for (std::size_t i = 0; i < n; ++i) row[i] = 0.0;
    const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(std::min(n, max_support)));
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
        const double w = 0.05 + rng.uniform();
        row[i] += w;
        total += w;
    }
    for (std::size_t i = 0; i < n; ++i) row[i] /= total;
}

/// Random model with sparse transition/observation rows and integer rewards in [-5, 5].
inline DecPomdpModel random_model(std::uint64_t seed, std::size_t S, std::size_t A, std::size_t B, std::size_t Y,
                                  std::size_t Z, double gamma, std::size_t max_support = 3) {
    Rng rng(derive_seed(seed, 0xabc));
    auto m = DecPomdpModel::with_dimensions(S, A, B, Y, Z, gamma);
    for (std::size_t r = 0; r < S * A * B; ++r) random_row(rng, &m.transition[r * S], S, max_support);
    const std::size_t yz = Y * Z;
    for (std::size_t r = 0; r < S * A * B; ++r) random_row(rng, &m.observation[r * yz], yz, max_support);
    for (double& v : m.reward) v = std::floor(rng.uniform() * 11.0) - 5.0;
    m.reward[0] = -5.0; // make sure the range is not degenerate
    m.reward[m.reward.size() - 1] = 5.0;
    random_row(rng, m.initial_belief.data(), S, S);
    return m;
}

/// P(p',q',s'|p,q,s) as a dense [x][x'] table summed over every index.
inline std::vector<double> brute_kernel(const DecPomdpModel& m, const JointPolicy& pol) {
    const auto& f1 = pol.agent1;
    const auto& f2 = pol.agent2;
    const std::size_t n1 = f1.num_nodes, n2 = f2.num_nodes, S = m.num_states, n = n1 * n2 * S;
    std::vector<double> k(n * n, 0.0);
    for (std::size_t p = 0; p < n1; ++p)
        for (std::size_t q = 0; q < n2; ++q)
            for (std::size_t s = 0; s < S; ++s)
                for (std::size_t p2 = 0; p2 < n1; ++p2)
                    for (std::size_t q2 = 0; q2 < n2; ++q2)
                        for (std::size_t s2 = 0; s2 < S; ++s2) {
                            double acc = 0.0;
                            for (std::size_t a = 0; a < m.num_actions1; ++a)
                                for (std::size_t b = 0; b < m.num_actions2; ++b)
                                    for (std::size_t y = 0; y < m.num_obs1; ++y)
                                        for (std::size_t z = 0; z < m.num_obs2; ++z)
                                            acc += f1.lambda(p, y, p2) * f2.lambda(q, z, q2) * m.O(s2, a, b, y, z) *
                                                   f1.pi(p, a) * f2.pi(q, b) * m.T(s, a, b, s2);
                            k[((p * n2 + q) * S + s) * n + (p2 * n2 + q2) * S + s2] = acc;
                        }
    return k;
}

/// new ∝ old * stat, positive entries floored at 1e-12, unreachable rows kept.
inline std::vector<double> reweight(const std::vector<double>& old, const std::vector<double>& stat) {
    std::vector<double> out(old.size());
    double c = 0.0;
    for (std::size_t i = 0; i < old.size(); ++i) c += (out[i] = old[i] * stat[i]);
    if (!(c >= 1e-300)) return old;
    double c2 = 0.0;
    for (std::size_t i = 0; i < old.size(); ++i) {
        out[i] /= c;
        if (old[i] > 0.0 && out[i] < 1e-12) out[i] = 1e-12;
        c2 += out[i];
    }
    for (double& v : out) v /= c2;
    return out;
}

/// Action update summed over every index, for agent 1 or 2.
inline std::vector<double> brute_action_update(const DecPomdpModel& m, const NormalizedRewards& rh,
                                               const JointPolicy& pol, const MessageSet& ms, int agent) {
    const auto& f1 = pol.agent1;
    const auto& f2 = pol.agent2;
    const std::size_t n1 = f1.num_nodes, n2 = f2.num_nodes, S = m.num_states;
    const double g = m.discount / (1.0 - m.discount);
    auto ah = [&](std::size_t p, std::size_t q, std::size_t s) { return ms.alpha_hat[(p * n2 + q) * S + s]; };
    auto bh = [&](std::size_t p, std::size_t q, std::size_t s) { return ms.beta_hat[(p * n2 + q) * S + s]; };
    // value of the joint action (a, b) taken at (p, q, s)
    auto inner = [&](std::size_t p, std::size_t q, std::size_t s, std::size_t a, std::size_t b) {
        double fut = 0.0;
        for (std::size_t p2 = 0; p2 < n1; ++p2)
            for (std::size_t q2 = 0; q2 < n2; ++q2)
                for (std::size_t s2 = 0; s2 < S; ++s2)
                    for (std::size_t y = 0; y < m.num_obs1; ++y)
                        for (std::size_t z = 0; z < m.num_obs2; ++z)
                            fut += bh(p2, q2, s2) * f1.lambda(p, y, p2) * f2.lambda(q, z, q2) * m.O(s2, a, b, y, z) *
                                   m.T(s, a, b, s2);
        return rh.r_hat[m.r_index(s, a, b)] + g * fut;
    };
    const AgentFsc& f = pol.agent(agent);
    std::vector<double> out;
    for (std::size_t n = 0; n < f.num_nodes; ++n) {
        std::vector<double> stat(f.num_actions, 0.0);
        for (std::size_t act = 0; act < f.num_actions; ++act) {
            double acc = 0.0;
            if (agent == 1) {
                for (std::size_t q = 0; q < n2; ++q)
                    for (std::size_t s = 0; s < S; ++s)
                        for (std::size_t b = 0; b < m.num_actions2; ++b)
                            acc += ah(n, q, s) * f2.pi(q, b) * inner(n, q, s, act, b);
            } else {
                for (std::size_t p = 0; p < n1; ++p)
                    for (std::size_t s = 0; s < S; ++s)
                        for (std::size_t a = 0; a < m.num_actions1; ++a)
                            acc += ah(p, n, s) * f1.pi(p, a) * inner(p, n, s, a, act);
            }
            stat[act] = acc;
        }
        std::vector<double> old(f.pi_row(n).begin(), f.pi_row(n).end());
        auto row = reweight(old, stat);
        out.insert(out.end(), row.begin(), row.end());
    }
    return out;
}

/// Node-transition update summed over every index, for agent 1 or 2.
inline std::vector<double> brute_transition_update(const DecPomdpModel& m, const JointPolicy& pol,
                                                   const MessageSet& ms, int agent) {
    const auto& f1 = pol.agent1;
    const auto& f2 = pol.agent2;
    const std::size_t n1 = f1.num_nodes, n2 = f2.num_nodes, S = m.num_states;
    auto ah = [&](std::size_t p, std::size_t q, std::size_t s) { return ms.alpha_hat[(p * n2 + q) * S + s]; };
    auto bh = [&](std::size_t p, std::size_t q, std::size_t s) { return ms.beta_hat[(p * n2 + q) * S + s]; };
    const AgentFsc& f = pol.agent(agent);
    std::vector<double> out;
    for (std::size_t nb = 0; nb < f.num_nodes; ++nb)
        for (std::size_t o = 0; o < f.num_obs; ++o) {
            std::vector<double> stat(f.num_nodes, 0.0);
            for (std::size_t nn = 0; nn < f.num_nodes; ++nn) {
                double acc = 0.0;
                for (std::size_t other = 0; other < (agent == 1 ? n2 : n1); ++other)        // q-bar or p-bar
                    for (std::size_t other2 = 0; other2 < (agent == 1 ? n2 : n1); ++other2) // q or p
                        for (std::size_t oo = 0; oo < (agent == 1 ? m.num_obs2 : m.num_obs1); ++oo)
                            for (std::size_t sb = 0; sb < S; ++sb)
                                for (std::size_t s2 = 0; s2 < S; ++s2)
                                    for (std::size_t a = 0; a < m.num_actions1; ++a)
                                        for (std::size_t b = 0; b < m.num_actions2; ++b) {
                                            if (agent == 1) {
                                                acc += ah(nb, other, sb) * bh(nn, other2, s2) *
                                                       f2.lambda(other, oo, other2) * m.O(s2, a, b, o, oo) *
                                                       m.T(sb, a, b, s2) * f1.pi(nb, a) * f2.pi(other, b);
                                            } else {
                                                acc += ah(other, nb, sb) * bh(other2, nn, s2) *
                                                       f1.lambda(other, oo, other2) * m.O(s2, a, b, oo, o) *
                                                       m.T(sb, a, b, s2) * f1.pi(other, a) * f2.pi(nb, b);
                                            }
                                        }
                stat[nn] = acc;
            }
            std::vector<double> old(f.lambda_row(nb, o).begin(), f.lambda_row(nb, o).end());
            auto row = reweight(old, stat);
            out.insert(out.end(), row.begin(), row.end());
        }
    return out;
}

/// Single-agent POMDP with an FSC, solved by EM with dense messages over
/// (node, state). Written from the single-agent derivation, independent of
/// the two-agent code paths.
struct PomdpEm {
    std::size_t S, A, Y, N;
    std::vector<double> T;  // [s][a][s']
    std::vector<double> O;  // [s'][a][y]
    std::vector<double> R;  // [s][a], already normalized to [0,1]
    std::vector<double> b0; // [s]
    double gamma;
    std::size_t K;
    std::vector<double> pi, lam, nu; // [n][a], [n][y][n'], [n]

    void iterate() {
        const std::size_t X = N * S;
        // dense chain over (n, s)
        std::vector<double> P(X * X, 0.0);
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t s = 0; s < S; ++s)
                for (std::size_t a = 0; a < A; ++a)
                    for (std::size_t s2 = 0; s2 < S; ++s2)
                        for (std::size_t y = 0; y < Y; ++y)
                            for (std::size_t n2 = 0; n2 < N; ++n2)
                                P[(n * S + s) * X + n2 * S + s2] += pi[n * A + a] * T[(s * A + a) * S + s2] *
                                                                    O[(s2 * A + a) * Y + y] *
                                                                    lam[(n * Y + y) * N + n2];
        std::vector<double> alpha(X), beta(X), ahat(X, 0.0), bhat(X, 0.0);
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t s = 0; s < S; ++s) {
                alpha[n * S + s] = nu[n] * b0[s];
                double r = 0.0;
                for (std::size_t a = 0; a < A; ++a) r += pi[n * A + a] * R[s * A + a];
                beta[n * S + s] = r;
            }
        for (std::size_t t = 0; t <= K; ++t) {
            const double w = std::pow(gamma, static_cast<double>(t)) * (1.0 - gamma);
            for (std::size_t x = 0; x < X; ++x) {
                ahat[x] += w * alpha[x];
                bhat[x] += w * beta[x];
            }
            std::vector<double> na(X, 0.0), nb(X, 0.0);
            for (std::size_t x = 0; x < X; ++x)
                for (std::size_t x2 = 0; x2 < X; ++x2) {
                    na[x2] += alpha[x] * P[x * X + x2];
                    nb[x] += P[x * X + x2] * beta[x2];
                }
            alpha.swap(na);
            beta.swap(nb);
        }
        const double g = gamma / (1.0 - gamma);
        std::vector<double> npi, nlam, nnu;
        for (std::size_t n = 0; n < N; ++n) {
            std::vector<double> stat(A, 0.0);
            for (std::size_t a = 0; a < A; ++a)
                for (std::size_t s = 0; s < S; ++s) {
                    double fut = 0.0;
                    for (std::size_t s2 = 0; s2 < S; ++s2)
                        for (std::size_t y = 0; y < Y; ++y)
                            for (std::size_t n2 = 0; n2 < N; ++n2)
                                fut += bhat[n2 * S + s2] * lam[(n * Y + y) * N + n2] * O[(s2 * A + a) * Y + y] *
                                       T[(s * A + a) * S + s2];
                    stat[a] += ahat[n * S + s] * (R[s * A + a] + g * fut);
                }
            auto row = reweight({pi.begin() + n * A, pi.begin() + (n + 1) * A}, stat);
            npi.insert(npi.end(), row.begin(), row.end());
        }
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t y = 0; y < Y; ++y) {
                std::vector<double> stat(N, 0.0);
                for (std::size_t n2 = 0; n2 < N; ++n2)
                    for (std::size_t s = 0; s < S; ++s)
                        for (std::size_t a = 0; a < A; ++a)
                            for (std::size_t s2 = 0; s2 < S; ++s2)
                                stat[n2] += ahat[n * S + s] * pi[n * A + a] * T[(s * A + a) * S + s2] *
                                            O[(s2 * A + a) * Y + y] * bhat[n2 * S + s2];
                const std::size_t off = (n * Y + y) * N;
                auto row = reweight({lam.begin() + off, lam.begin() + off + N}, stat);
                nlam.insert(nlam.end(), row.begin(), row.end());
            }
        {
            std::vector<double> stat(N, 0.0);
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t s = 0; s < S; ++s) stat[n] += bhat[n * S + s] * b0[s];
            nnu = reweight(nu, stat);
        }
        pi = npi;
        lam = nlam;
        nu = nnu;
    }
};

} // namespace testing

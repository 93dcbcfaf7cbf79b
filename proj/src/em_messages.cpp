#include "decem/em.hpp"

#include "decem/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace decem {

namespace {

void check_policy_fits(const DecPomdpModel& m, const JointPolicy& policy) {
    const auto& f1 = policy.agent1;
    const auto& f2 = policy.agent2;
    if (f1.num_actions != m.num_actions1 || f2.num_actions != m.num_actions2 || f1.num_obs != m.num_obs1 ||
        f2.num_obs != m.num_obs2 || f1.num_nodes == 0 || f2.num_nodes == 0)
        throw DimensionError("policy does not fit the model's action/observation alphabets");
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double prior(double gamma, std::size_t t) { return std::pow(gamma, static_cast<double>(t)) * (1.0 - gamma); }

} // namespace

double JointKernel::at(std::size_t p, std::size_t q, std::size_t s, std::size_t p2, std::size_t q2,
                       std::size_t s2) const {
    const std::size_t x = index(p, q, s);
    const auto target = static_cast<std::uint32_t>(index(p2, q2, s2));
    auto first = col.begin() + static_cast<std::ptrdiff_t>(row_start[x]);
    auto last = col.begin() + static_cast<std::ptrdiff_t>(row_start[x + 1]);
    auto it = std::lower_bound(first, last, target);
    if (it == last || *it != target) return 0.0;
    return val[static_cast<std::size_t>(it - col.begin())];
}

double JointKernel::row_sum(std::size_t x) const {
    double acc = 0.0;
    for (std::size_t k = row_start[x]; k < row_start[x + 1]; ++k) acc += val[k];
    return acc;
}

void JointKernel::push_forward(std::span<const double> in, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t n = size();
    for (std::size_t x = 0; x < n; ++x) {
        const double w = in[x];
        if (w == 0.0) continue;
        for (std::size_t k = row_start[x]; k < row_start[x + 1]; ++k) out[col[k]] += w * val[k];
    }
}

void JointKernel::pull_back(std::span<const double> in, std::span<double> out) const {
    const std::size_t n = size();
    for (std::size_t x = 0; x < n; ++x) {
        double acc = 0.0;
        for (std::size_t k = row_start[x]; k < row_start[x + 1]; ++k) acc += val[k] * in[col[k]];
        out[x] = acc;
    }
}

JointKernel build_kernel(const DecPomdpModel& m, const JointPolicy& policy, const SuccessorIndex& succ) {
    check_policy_fits(m, policy);
    const auto& f1 = policy.agent1;
    const auto& f2 = policy.agent2;
    JointKernel k;
    k.nodes1 = f1.num_nodes;
    k.nodes2 = f2.num_nodes;
    k.num_states = m.num_states;
    const std::size_t n1 = k.nodes1, n2 = k.nodes2, ns = k.num_states, n = k.size();
    if (n > std::size_t{0xffffffff}) throw DimensionError("joint controller state space is too large");

    k.row_start.reserve(n + 1);
    std::vector<double> dense(n, 0.0);
    std::vector<char> touched(n, 0);
    std::vector<std::uint32_t> cols;
    for (std::size_t p = 0; p < n1; ++p)
        for (std::size_t q = 0; q < n2; ++q)
            for (std::size_t s = 0; s < ns; ++s) {
                k.row_start.push_back(k.col.size());
                cols.clear();
                for (std::size_t a = 0; a < m.num_actions1; ++a) {
                    const double pa = f1.pi(p, a);
                    if (pa == 0.0) continue;
                    for (std::size_t b = 0; b < m.num_actions2; ++b) {
                        const double pab = pa * f2.pi(q, b);
                        if (pab == 0.0) continue;
                        for (const auto& e : succ.block(s, a, b)) {
                            const double c = pab * e.weight;
                            const auto l1 = f1.lambda_row(p, e.y);
                            const auto l2 = f2.lambda_row(q, e.z);
                            for (std::size_t p2 = 0; p2 < n1; ++p2) {
                                if (l1[p2] == 0.0) continue;
                                const double c1 = c * l1[p2];
                                for (std::size_t q2 = 0; q2 < n2; ++q2) {
                                    if (l2[q2] == 0.0) continue;
                                    const std::size_t x2 = (p2 * n2 + q2) * ns + e.next_state;
                                    if (!touched[x2]) {
                                        touched[x2] = 1;
                                        cols.push_back(static_cast<std::uint32_t>(x2));
                                    }
                                    dense[x2] += c1 * l2[q2];
                                }
                            }
                        }
                    }
                }
                std::sort(cols.begin(), cols.end());
                for (std::uint32_t x2 : cols) {
                    k.col.push_back(x2);
                    k.val.push_back(dense[x2]);
                    dense[x2] = 0.0;
                    touched[x2] = 0;
                }
            }
    k.row_start.push_back(k.col.size());
    return k;
}

CutoffMode CutoffMode::parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("cutoff must be fixed:K or adaptive:EPS, got '" + text + "'");
    const std::string kind = text.substr(0, colon), arg = text.substr(colon + 1);
    try {
        std::size_t used = 0;
        if (kind == "fixed") {
            if (arg.empty() || arg.front() == '-') throw std::invalid_argument("negative");
            const unsigned long long v = std::stoull(arg, &used);
            if (used == arg.size()) return fixed(static_cast<std::size_t>(v));
        } else if (kind == "adaptive") {
            const double eps = std::stod(arg, &used);
            if (used == arg.size() && eps > 0.0 && std::isfinite(eps)) return adaptive(eps);
        }
    } catch (const std::logic_error&) {
    }
    throw std::invalid_argument("cutoff must be fixed:K or adaptive:EPS with EPS > 0, got '" + text + "'");
}

std::string CutoffMode::to_string() const {
    if (kind == Kind::Fixed) return "fixed:" + std::to_string(fixed_k);
    char buf[64];
    std::snprintf(buf, sizeof buf, "adaptive:%g", epsilon);
    return buf;
}

std::size_t cutoff_cap(double gamma) {
    if (gamma <= 0.0) return 0;
    return static_cast<std::size_t>(std::ceil(std::log(1e-9) / std::log(gamma)));
}

bool adaptive_rule_fires(double gamma, std::size_t k, double likelihood_2k, double accumulated, double eps) {
    return prior(gamma, 2 * k) * likelihood_2k <= eps * accumulated;
}

std::size_t cutoff_K(double gamma, const CutoffMode& mode, std::span<const double> likelihood_by_T) {
    if (mode.kind == CutoffMode::Kind::Fixed) return mode.fixed_k;
    if (gamma <= 0.0) return 0;
    const std::size_t cap = mode.cap ? mode.cap : cutoff_cap(gamma);
    auto lik = [&](std::size_t T) { return T < likelihood_by_T.size() ? likelihood_by_T[T] : 0.0; };
    double accumulated = lik(0) * prior(gamma, 0);
    for (std::size_t k = 1; 2 * k <= cap; ++k) {
        accumulated += prior(gamma, 2 * k - 1) * lik(2 * k - 1);
        if (adaptive_rule_fires(gamma, k, lik(2 * k), accumulated, mode.epsilon)) return 2 * k;
        accumulated += prior(gamma, 2 * k) * lik(2 * k);
    }
    return cap;
}

std::vector<double> expected_immediate(const DecPomdpModel& m, std::span<const double> reward_table,
                                       const JointPolicy& policy) {
    check_policy_fits(m, policy);
    if (reward_table.size() != m.reward.size()) throw DimensionError("reward table has the wrong length");
    const auto& f1 = policy.agent1;
    const auto& f2 = policy.agent2;
    const std::size_t ns = m.num_states;
    std::vector<double> out(f1.num_nodes * f2.num_nodes * ns, 0.0);
    for (std::size_t p = 0; p < f1.num_nodes; ++p)
        for (std::size_t q = 0; q < f2.num_nodes; ++q)
            for (std::size_t s = 0; s < ns; ++s) {
                double acc = 0.0;
                for (std::size_t a = 0; a < m.num_actions1; ++a) {
                    const double pa = f1.pi(p, a);
                    if (pa == 0.0) continue;
                    for (std::size_t b = 0; b < m.num_actions2; ++b)
                        acc += pa * f2.pi(q, b) * reward_table[m.r_index(s, a, b)];
                }
                out[(p * f2.num_nodes + q) * ns + s] = acc;
            }
    return out;
}

namespace {

std::vector<double> initial_occupancy(const JointPolicy& policy, std::span<const double> b0) {
    const auto& f1 = policy.agent1;
    const auto& f2 = policy.agent2;
    const std::size_t ns = b0.size();
    std::vector<double> a0(f1.num_nodes * f2.num_nodes * ns);
    for (std::size_t p = 0; p < f1.num_nodes; ++p)
        for (std::size_t q = 0; q < f2.num_nodes; ++q)
            for (std::size_t s = 0; s < ns; ++s) a0[(p * f2.num_nodes + q) * ns + s] = f1.nu(p) * f2.nu(q) * b0[s];
    return a0;
}

void check_kernel_fits(const JointKernel& k, const JointPolicy& policy, std::size_t num_states) {
    if (k.nodes1 != policy.agent1.num_nodes || k.nodes2 != policy.agent2.num_nodes || k.num_states != num_states)
        throw DimensionError("kernel was built for different dimensions");
}

} // namespace

std::vector<std::vector<double>> forward_messages(const JointKernel& kernel, const JointPolicy& policy,
                                                  std::span<const double> b0, std::size_t K) {
    check_kernel_fits(kernel, policy, b0.size());
    std::vector<std::vector<double>> alpha;
    alpha.reserve(K + 1);
    alpha.push_back(initial_occupancy(policy, b0));
    for (std::size_t t = 1; t <= K; ++t) {
        std::vector<double> next(kernel.size());
        kernel.push_forward(alpha.back(), next);
        alpha.push_back(std::move(next));
    }
    return alpha;
}

std::vector<std::vector<double>> backward_messages(const DecPomdpModel& model, std::span<const double> reward_table,
                                                   const JointKernel& kernel, const JointPolicy& policy,
                                                   std::size_t K) {
    check_kernel_fits(kernel, policy, model.num_states);
    std::vector<std::vector<double>> beta;
    beta.reserve(K + 1);
    beta.push_back(expected_immediate(model, reward_table, policy));
    for (std::size_t t = 1; t <= K; ++t) {
        std::vector<double> next(kernel.size());
        kernel.pull_back(beta.back(), next);
        beta.push_back(std::move(next));
    }
    return beta;
}

std::vector<std::vector<double>> backward_messages(const DecPomdpModel& model, const NormalizedRewards& rhat,
                                                   const JointKernel& kernel, const JointPolicy& policy,
                                                   std::size_t K) {
    return backward_messages(model, std::span<const double>(rhat.r_hat), kernel, policy, K);
}

namespace {

/// Runs alpha and beta side by side until the adaptive rule fires.
std::size_t resolve_adaptive(const JointKernel& kernel, std::vector<double> alpha, std::vector<double> beta,
                             double gamma, const CutoffMode& mode) {
    if (gamma <= 0.0) return 0;
    const std::size_t cap = mode.cap ? mode.cap : cutoff_cap(gamma);
    std::vector<double> next_alpha(alpha.size()), next_beta(beta.size());
    double accumulated = prior(gamma, 0) * dot(alpha, beta);
    for (std::size_t k = 1; 2 * k <= cap; ++k) {
        kernel.push_forward(alpha, next_alpha);
        alpha.swap(next_alpha);
        // L_{2k-1} = alpha_k . beta_{k-1}
        accumulated += prior(gamma, 2 * k - 1) * dot(alpha, beta);
        kernel.pull_back(beta, next_beta);
        beta.swap(next_beta);
        const double l2k = dot(alpha, beta);
        if (adaptive_rule_fires(gamma, k, l2k, accumulated, mode.epsilon)) return 2 * k;
        accumulated += prior(gamma, 2 * k) * l2k;
    }
    return cap;
}

void check_finite(std::span<const double> v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw NumericalError(std::string("non-finite entry in ") + what);
}

} // namespace

MessageSet compute_messages(const DecPomdpModel& model, const NormalizedRewards& rhat, const JointKernel& kernel,
                            const JointPolicy& policy, const CutoffMode& cutoff, bool keep_sequences) {
    check_kernel_fits(kernel, policy, model.num_states);
    const double gamma = model.discount;
    MessageSet ms;
    ms.gamma = gamma;
    ms.alpha0 = initial_occupancy(policy, model.initial_belief);
    ms.beta0 = expected_immediate(model, rhat.r_hat, policy);
    ms.cutoff = cutoff.kind == CutoffMode::Kind::Fixed ? cutoff.fixed_k
                                                       : resolve_adaptive(kernel, ms.alpha0, ms.beta0, gamma, cutoff);

    const std::size_t n = kernel.size();
    ms.alpha_hat.assign(n, 0.0);
    ms.beta_hat.assign(n, 0.0);
    std::vector<double> alpha = ms.alpha0, beta = ms.beta0, scratch(n);
    if (keep_sequences) {
        ms.alpha.push_back(alpha);
        ms.beta.push_back(beta);
    }
    double weight = 1.0 - gamma;
    for (std::size_t t = 0;; ++t) {
        ms.time_prior_mass += weight;
        for (std::size_t x = 0; x < n; ++x) {
            ms.alpha_hat[x] += weight * alpha[x];
            ms.beta_hat[x] += weight * beta[x];
        }
        if (t == ms.cutoff) break;
        weight *= gamma;
        kernel.push_forward(alpha, scratch);
        alpha.swap(scratch);
        kernel.pull_back(beta, scratch);
        beta.swap(scratch);
        if (keep_sequences) {
            ms.alpha.push_back(alpha);
            ms.beta.push_back(beta);
        }
    }
    ms.alpha_last = std::move(alpha);
    ms.beta_last = std::move(beta);
    check_finite(ms.alpha_hat, "alpha-hat");
    check_finite(ms.beta_hat, "beta-hat");
    return ms;
}

double likelihood(const MessageSet& msgs) {
    if (msgs.alpha_hat.size() != msgs.beta0.size()) throw DimensionError("message vectors have different lengths");
    return dot(msgs.alpha_hat, msgs.beta0);
}

double likelihood_per_horizon(const MessageSet& msgs) {
    const std::size_t K = msgs.cutoff;
    if (msgs.alpha.size() != K + 1 || msgs.beta.size() != K + 1)
        throw DimensionError("per-horizon likelihood needs alpha and beta sequences of length cutoff + 1");
    double total = 0.0;
    for (std::size_t T = 0; T <= K; ++T) {
        const std::size_t t = (T + 1) / 2;
        total += prior(msgs.gamma, T) * dot(msgs.alpha[t], msgs.beta[T - t]);
    }
    return total;
}

double theorem1_value(double L, const NormalizedRewards& rhat, double gamma) {
    return (rhat.range() * L + rhat.r_min) / (1.0 - gamma);
}

} // namespace decem

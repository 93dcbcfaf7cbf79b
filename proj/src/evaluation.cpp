#include "decem/evaluation.hpp"

#include "decem/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <nlohmann/json.hpp>

namespace decem {

std::string to_string(EvalMethod m) {
    switch (m) {
    case EvalMethod::Automatic: return "automatic";
    case EvalMethod::ValueIteration: return "value-iteration";
    case EvalMethod::DirectSolve: return "direct-solve";
    }
    return "unknown";
}

namespace {

void check_compatible(const DecPomdpModel& model, const JointPolicy& policy) {
    const auto& f1 = policy.agent1;
    const auto& f2 = policy.agent2;
    if (f1.num_actions != model.num_actions1 || f2.num_actions != model.num_actions2 ||
        f1.num_obs != model.num_obs1 || f2.num_obs != model.num_obs2 || f1.num_nodes == 0 ||
        f2.num_nodes == 0)
        throw DimensionError("policy alphabets (A=" + std::to_string(f1.num_actions) +
                             ", B=" + std::to_string(f2.num_actions) + ", Y=" + std::to_string(f1.num_obs) +
                             ", Z=" + std::to_string(f2.num_obs) + ") do not match the model (A=" +
                             std::to_string(model.num_actions1) + ", B=" + std::to_string(model.num_actions2) +
                             ", Y=" + std::to_string(model.num_obs1) + ", Z=" + std::to_string(model.num_obs2) + ")");
}

/// Sparse joint-chain matrix M and expected reward r for a fixed policy.
struct JointChain {
    std::size_t size = 0;
    std::vector<std::size_t> row_start;
    std::vector<std::uint32_t> col;
    std::vector<double> val;
    std::vector<double> reward;
};

JointChain assemble_chain(const DecPomdpModel& m, const JointPolicy& policy) {
    const auto& f1 = policy.agent1;
    const auto& f2 = policy.agent2;
    const std::size_t n1 = f1.num_nodes, n2 = f2.num_nodes, ns = m.num_states;
    const std::size_t na = m.num_actions1, nb = m.num_actions2, ny = m.num_obs1, nz = m.num_obs2;
    JointChain c;
    c.size = n1 * n2 * ns;
    c.reward.assign(c.size, 0.0);
    c.row_start.reserve(c.size + 1);
    std::vector<double> dense(c.size, 0.0);
    std::vector<char> touched(c.size, 0);
    std::vector<std::uint32_t> cols;
    for (std::size_t p = 0; p < n1; ++p)
        for (std::size_t q = 0; q < n2; ++q)
            for (std::size_t s = 0; s < ns; ++s) {
                std::size_t x = (p * n2 + q) * ns + s;
                c.row_start.push_back(c.col.size());
                cols.clear();
                double r = 0.0;
                for (std::size_t a = 0; a < na; ++a) {
                    double pa = f1.pi(p, a);
                    if (pa == 0.0) continue;
                    for (std::size_t b = 0; b < nb; ++b) {
                        double w = pa * f2.pi(q, b);
                        if (w == 0.0) continue;
                        r += w * m.R(s, a, b);
                        for (std::size_t s2 = 0; s2 < ns; ++s2) {
                            double pt = m.T(s, a, b, s2);
                            if (pt == 0.0) continue;
                            for (std::size_t y = 0; y < ny; ++y)
                                for (std::size_t z = 0; z < nz; ++z) {
                                    double po = m.O(s2, a, b, y, z);
                                    if (po == 0.0) continue;
                                    double base = w * pt * po;
                                    for (std::size_t p2 = 0; p2 < n1; ++p2) {
                                        double l1 = f1.lambda(p, y, p2);
                                        if (l1 == 0.0) continue;
                                        for (std::size_t q2 = 0; q2 < n2; ++q2) {
                                            double l2 = f2.lambda(q, z, q2);
                                            if (l2 == 0.0) continue;
                                            std::size_t x2 = (p2 * n2 + q2) * ns + s2;
                                            if (!touched[x2]) {
                                                touched[x2] = 1;
                                                cols.push_back(static_cast<std::uint32_t>(x2));
                                            }
                                            dense[x2] += base * l1 * l2;
                                        }
                                    }
                                }
                        }
                    }
                }
                c.reward[x] = r;
                std::sort(cols.begin(), cols.end());
                for (std::uint32_t x2 : cols) {
                    c.col.push_back(x2);
                    c.val.push_back(dense[x2]);
                    dense[x2] = 0.0;
                    touched[x2] = 0;
                }
            }
    c.row_start.push_back(c.col.size());
    return c;
}

void apply_backup(const JointChain& c, double gamma, std::span<const double> v, std::span<double> out) {
    for (std::size_t x = 0; x < c.size; ++x) {
        double acc = 0.0;
        for (std::size_t k = c.row_start[x]; k < c.row_start[x + 1]; ++k) acc += c.val[k] * v[c.col[k]];
        out[x] = c.reward[x] + gamma * acc;
    }
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

} // namespace

ValueTable evaluate_exact(const DecPomdpModel& model, const JointPolicy& policy, const EvalOptions& options) {
    check_compatible(model, policy);
    if (!(options.tol > 0.0)) throw std::invalid_argument("evaluation tolerance must be positive");
    auto t0 = std::chrono::steady_clock::now();
    const double gamma = model.discount;
    JointChain chain = assemble_chain(model, policy);

    ValueTable vt;
    vt.nodes1 = policy.agent1.num_nodes;
    vt.nodes2 = policy.agent2.num_nodes;
    vt.num_states = model.num_states;
    vt.method = options.method;
    if (vt.method == EvalMethod::Automatic)
        vt.method = chain.size <= options.direct_limit ? EvalMethod::DirectSolve : EvalMethod::ValueIteration;

    std::vector<double> next(chain.size);
    if (vt.method == EvalMethod::DirectSolve) {
        std::vector<Eigen::Triplet<double>> triplets;
        triplets.reserve(chain.val.size() + chain.size);
        for (std::size_t x = 0; x < chain.size; ++x) {
            triplets.emplace_back(static_cast<int>(x), static_cast<int>(x), 1.0);
            for (std::size_t k = chain.row_start[x]; k < chain.row_start[x + 1]; ++k)
                triplets.emplace_back(static_cast<int>(x), static_cast<int>(chain.col[k]), -gamma * chain.val[k]);
        }
        const int n = static_cast<int>(chain.size);
        Eigen::SparseMatrix<double> A(n, n);
        A.setFromTriplets(triplets.begin(), triplets.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(A);
        if (lu.info() != Eigen::Success) throw NumericalError("sparse LU factorization of (I - gamma M) failed");
        Eigen::Map<const Eigen::VectorXd> r(chain.reward.data(), n);
        Eigen::VectorXd x = lu.solve(r);
        vt.v.assign(x.data(), x.data() + n);
        // polish with backups until the residual contract holds
        for (std::size_t it = 0; it < 100; ++it) {
            apply_backup(chain, gamma, vt.v, next);
            vt.residual = max_abs_diff(next, vt.v);
            if (vt.residual <= options.tol) break;
            vt.v.swap(next);
        }
    } else {
        vt.v.assign(chain.size, 0.0);
        vt.residual = 0.0;
        for (std::size_t it = 0; it < options.max_iterations; ++it) {
            apply_backup(chain, gamma, vt.v, next);
            double delta = max_abs_diff(next, vt.v);
            vt.v.swap(next);
            // residual of the new iterate is at most gamma * delta
            vt.residual = gamma * delta;
            if (vt.residual <= options.tol) break;
        }
        apply_backup(chain, gamma, vt.v, next);
        vt.residual = max_abs_diff(next, vt.v);
    }
    vt.v_b0 = value_at_belief(vt, policy, model.initial_belief);
    vt.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return vt;
}

double value_at_belief(const ValueTable& vt, const JointPolicy& policy, std::span<const double> b0) {
    if (policy.agent1.num_nodes != vt.nodes1 || policy.agent2.num_nodes != vt.nodes2 || b0.size() != vt.num_states)
        throw DimensionError("value table, policy and belief dimensions disagree");
    double total = 0.0;
    for (std::size_t p = 0; p < vt.nodes1; ++p) {
        double w1 = policy.agent1.nu(p);
        if (w1 == 0.0) continue;
        for (std::size_t q = 0; q < vt.nodes2; ++q) {
            double w12 = w1 * policy.agent2.nu(q);
            if (w12 == 0.0) continue;
            for (std::size_t s = 0; s < vt.num_states; ++s) total += w12 * b0[s] * vt.at(p, q, s);
        }
    }
    return total;
}

std::vector<double> bellman_backup(const DecPomdpModel& m, const JointPolicy& policy, std::span<const double> v) {
    check_compatible(m, policy);
    const auto& f1 = policy.agent1;
    const auto& f2 = policy.agent2;
    const std::size_t n1 = f1.num_nodes, n2 = f2.num_nodes, ns = m.num_states;
    if (v.size() != n1 * n2 * ns) throw DimensionError("value vector has the wrong length");
    const double gamma = m.discount;
    std::vector<double> out(v.size(), 0.0);
    for (std::size_t p = 0; p < n1; ++p)
        for (std::size_t q = 0; q < n2; ++q)
            for (std::size_t s = 0; s < ns; ++s) {
                double total = 0.0;
                for (std::size_t a = 0; a < m.num_actions1; ++a)
                    for (std::size_t b = 0; b < m.num_actions2; ++b) {
                        double w = f1.pi(p, a) * f2.pi(q, b);
                        if (w == 0.0) continue;
                        double future = 0.0;
                        for (std::size_t s2 = 0; s2 < ns; ++s2) {
                            double pt = m.T(s, a, b, s2);
                            if (pt == 0.0) continue;
                            double inner = 0.0;
                            for (std::size_t y = 0; y < m.num_obs1; ++y)
                                for (std::size_t z = 0; z < m.num_obs2; ++z) {
                                    double po = m.O(s2, a, b, y, z);
                                    if (po == 0.0) continue;
                                    double nodes = 0.0;
                                    for (std::size_t p2 = 0; p2 < n1; ++p2)
                                        for (std::size_t q2 = 0; q2 < n2; ++q2)
                                            nodes += f1.lambda(p, y, p2) * f2.lambda(q, z, q2) *
                                                     v[(p2 * n2 + q2) * ns + s2];
                                    inner += po * nodes;
                                }
                            future += pt * inner;
                        }
                        total += w * (m.R(s, a, b) + gamma * future);
                    }
                out[(p * n2 + q) * ns + s] = total;
            }
    return out;
}

double bellman_residual(const DecPomdpModel& model, const JointPolicy& policy, std::span<const double> v) {
    auto next = bellman_backup(model, policy, v);
    return max_abs_diff(next, v);
}

nlohmann::json evaluation_report(const ValueTable& vt) {
    return {{"v_b0", vt.v_b0},
            {"residual", vt.residual},
            {"method", to_string(vt.method)},
            {"wall_ms", vt.wall_ms},
            {"nodes", {vt.nodes1, vt.nodes2}},
            {"states", vt.num_states}};
}

nlohmann::json simulation_report(const SimulationEstimate& est) {
    return {{"mean", est.mean},
            {"std_error", est.std_error},
            {"episodes", est.episodes},
            {"horizon", est.horizon},
            {"seed", est.seed}};
}

} // namespace decem

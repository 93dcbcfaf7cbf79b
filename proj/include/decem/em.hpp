#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "decem/controller.hpp"
#include "decem/model.hpp"

namespace decem {

/// P(p',q',s' | p,q,s) for a fixed joint policy, as a sparse row-major matrix
/// over joint indices x = (p * nodes2 + q) * num_states + s.
struct JointKernel {
    std::size_t nodes1 = 0, nodes2 = 0, num_states = 0;
    std::vector<std::size_t> row_start;
    std::vector<std::uint32_t> col;
    std::vector<double> val;

    std::size_t size() const { return nodes1 * nodes2 * num_states; }
    std::size_t index(std::size_t p, std::size_t q, std::size_t s) const { return (p * nodes2 + q) * num_states + s; }

    /// Dense lookup; linear in the row length.
    double at(std::size_t p, std::size_t q, std::size_t s, std::size_t p2, std::size_t q2, std::size_t s2) const;
    double row_sum(std::size_t x) const;

    /// out = in * K (one forward step of an occupancy distribution).
    void push_forward(std::span<const double> in, std::span<double> out) const;
    /// out = K * in (one backward step of an expectation).
    void pull_back(std::span<const double> in, std::span<double> out) const;
};

/// Builds the kernel by summing over joint actions and the successor sets of
/// `succ` only; identical to the unrestricted sum.
JointKernel build_kernel(const DecPomdpModel& model, const JointPolicy& policy, const SuccessorIndex& succ);

/// How far to propagate messages.
struct CutoffMode {
    enum class Kind { Fixed, Adaptive };
    Kind kind = Kind::Adaptive;
    std::size_t fixed_k = 0;
    double epsilon = 1e-8;
    std::size_t cap = 0; // 0: ceil(log(1e-9) / log(gamma))

    static CutoffMode fixed(std::size_t k) { return {Kind::Fixed, k, 0.0, 0}; }
    static CutoffMode adaptive(double eps = 1e-8, std::size_t cap = 0) { return {Kind::Adaptive, 0, eps, cap}; }

    /// "fixed:K" or "adaptive:EPS"
    static CutoffMode parse(const std::string& text);
    std::string to_string() const;
};

/// ceil(log(1e-9) / log(gamma)); 0 when gamma == 0.
std::size_t cutoff_cap(double gamma);

/// The propagation stopping rule after k forward and k backward steps:
/// P(T=2k) L_{2k} <= eps * sum_{T<2k} P(T) L_T, with P(T) = gamma^T (1 - gamma).
bool adaptive_rule_fires(double gamma, std::size_t k, double likelihood_2k, double accumulated, double eps);

/// Resolves a cutoff. For the adaptive mode `likelihood_by_T[T]` supplies
/// L_T (entries past its end count as zero).
std::size_t cutoff_K(double gamma, const CutoffMode& mode, std::span<const double> likelihood_by_T = {});

/// Per-(p,q,s) expected immediate reward sum_{a,b} pi1(a|p) pi2(b|q) r(s,a,b)
/// for an arbitrary reward table laid out like DecPomdpModel::reward.
std::vector<double> expected_immediate(const DecPomdpModel& model, std::span<const double> reward_table,
                                       const JointPolicy& policy);

/// alpha_0 .. alpha_K with alpha_0 = nu1 x nu2 x b0.
std::vector<std::vector<double>> forward_messages(const JointKernel& kernel, const JointPolicy& policy,
                                                  std::span<const double> b0, std::size_t K);

/// beta_0 .. beta_K computed with the normalized rewards.
std::vector<std::vector<double>> backward_messages(const DecPomdpModel& model, const NormalizedRewards& rhat,
                                                   const JointKernel& kernel, const JointPolicy& policy,
                                                   std::size_t K);

/// Same recursion seeded with an arbitrary reward table (raw R gives a
/// truncated policy-evaluation series; used as a cross-check).
std::vector<std::vector<double>> backward_messages(const DecPomdpModel& model, std::span<const double> reward_table,
                                                   const JointKernel& kernel, const JointPolicy& policy,
                                                   std::size_t K);

/// Everything the M-step needs from one E-step.
struct MessageSet {
    double gamma = 0.0;
    std::size_t cutoff = 0;        // K
    double time_prior_mass = 0.0;  // sum_{t<=K} gamma^t (1 - gamma)
    std::vector<double> alpha_hat; // sum_t P(T=t) alpha_t
    std::vector<double> beta_hat;  // sum_tau P(T=tau) beta_tau
    std::vector<double> alpha0, beta0;
    std::vector<double> alpha_last, beta_last; // alpha_K, beta_K
    // Full sequences, kept only on request.
    std::vector<std::vector<double>> alpha, beta;
};

/// Runs one forward and one backward sweep (R-hat rewards) up to the cutoff.
MessageSet compute_messages(const DecPomdpModel& model, const NormalizedRewards& rhat, const JointKernel& kernel,
                            const JointPolicy& policy, const CutoffMode& cutoff, bool keep_sequences = false);

/// L = sum_{T<=K} P(T) L_T, evaluated as sum_x alpha_hat(x) beta_0(x).
double likelihood(const MessageSet& msgs);

/// The same quantity summed per horizon: sum_{T<=K} P(T) sum_x alpha_t beta_{T-t}
/// with t = ceil(T/2). Needs the stored sequences.
double likelihood_per_horizon(const MessageSet& msgs);

/// Policy value implied by a likelihood: (r_max - r_min) L / (1 - gamma) + r_min / (1 - gamma).
double theorem1_value(double likelihood, const NormalizedRewards& rhat, double gamma);

/// Closed-form re-estimates. Each returns the new table for one agent
/// (1 or 2) in the AgentFsc layout. Rows of unreachable nodes keep their old
/// values; a zero normalizer on a reachable row throws NumericalError.
std::vector<double> update_actions(const DecPomdpModel& model, const NormalizedRewards& rhat,
                                   const SuccessorIndex& succ, const JointPolicy& policy, const MessageSet& msgs,
                                   int agent);
std::vector<double> update_node_transitions(const DecPomdpModel& model, const SuccessorIndex& succ,
                                            const JointPolicy& policy, const MessageSet& msgs, int agent);
std::vector<double> update_initial(const JointPolicy& policy, const MessageSet& msgs, std::span<const double> b0,
                                   int agent);

/// All six updates from one set of messages, applied together.
JointPolicy m_step(const DecPomdpModel& model, const NormalizedRewards& rhat, const SuccessorIndex& succ,
                   const JointPolicy& policy, const MessageSet& msgs);

struct EmConfig {
    std::size_t max_iters = 1000;
    double lik_tol = 1e-8; // relative likelihood improvement
    CutoffMode cutoff = CutoffMode::adaptive();
    std::size_t audit_every = 0; // 0: audit only the final policy
};

enum class StopReason { Tolerance, MaxIterations, DegenerateReward };

std::string to_string(StopReason r);

struct IterationRecord {
    std::size_t iter = 0;
    double likelihood = 0.0;
    double value_thm1 = 0.0;
    std::optional<double> value_exact;
    double ms = 0.0; // wall time since the run started
};

struct EmRunLog {
    std::vector<IterationRecord> records;
    StopReason reason = StopReason::MaxIterations;
    std::size_t cutoff = 0;
    std::string warning;
};

struct EmResult {
    JointPolicy policy;
    EmRunLog log;
};

/// Expectation-maximization over controller parameters. The adaptive cutoff
/// is resolved on the first E-step and then held fixed, so the logged
/// likelihoods are comparable across iterations.
EmResult em_solve(const DecPomdpModel& model, const JointPolicy& initial, const EmConfig& config = {});

/// One JSON object per line; the last line carries the stop reason and the
/// policy hash.
void write_run_log(std::ostream& out, const EmRunLog& log, const std::string& policy_hash);

/// 16 hex digits identifying a policy's tables.
std::string policy_hash(const JointPolicy& policy);

} // namespace decem

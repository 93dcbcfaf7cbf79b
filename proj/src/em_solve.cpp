#include "decem/em.hpp"

#include "decem/errors.hpp"
#include "decem/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

#include <nlohmann/json.hpp>

namespace decem {

std::string to_string(StopReason r) {
    switch (r) {
    case StopReason::Tolerance: return "tolerance";
    case StopReason::MaxIterations: return "max-iterations";
    case StopReason::DegenerateReward: return "degenerate-reward";
    }
    return "unknown";
}

namespace {

void check_tables_finite(const JointPolicy& p) {
    for (const AgentFsc* f : {&p.agent1, &p.agent2})
        for (const auto* table : {&f->action_probs, &f->node_transition, &f->initial_dist})
            for (double v : *table)
                if (!std::isfinite(v)) throw NumericalError("non-finite entry in a controller table");
}

} // namespace

EmResult em_solve(const DecPomdpModel& model, const JointPolicy& initial, const EmConfig& config) {
    if (auto report = validate_policy(initial, model); !report.empty())
        throw DimensionError("initial policy is not valid for this model: " + report.front().message);
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    };
    auto audit = [&](const JointPolicy& p) { return evaluate_exact(model, p).v_b0; };

    EmResult result{initial, {}};
    EmRunLog& log = result.log;
    const NormalizedRewards rhat = normalize_rewards(model);
    if (rhat.degenerate) {
        log.reason = StopReason::DegenerateReward;
        log.warning = "reward is constant; every policy has the same value, EM skipped";
        IterationRecord rec;
        rec.value_thm1 = theorem1_value(0.0, rhat, model.discount);
        rec.value_exact = audit(initial);
        rec.ms = elapsed();
        log.records.push_back(rec);
        return result;
    }

    const SuccessorIndex succ = build_successor_index(model);
    CutoffMode cutoff = config.cutoff;
    JointPolicy& policy = result.policy;
    for (std::size_t iter = 0;; ++iter) {
        check_tables_finite(policy);
        const JointKernel kernel = build_kernel(model, policy, succ);
        const MessageSet msgs = compute_messages(model, rhat, kernel, policy, cutoff);
        if (iter == 0) {
            // hold K fixed so every logged likelihood refers to the same objective
            cutoff = CutoffMode::fixed(msgs.cutoff);
            log.cutoff = msgs.cutoff;
        }
        IterationRecord rec;
        rec.iter = iter;
        rec.likelihood = likelihood(msgs);
        if (!std::isfinite(rec.likelihood)) throw NumericalError("likelihood became non-finite");
        rec.value_thm1 = theorem1_value(rec.likelihood, rhat, model.discount);

        bool stop = false;
        if (iter > 0) {
            const double prev = log.records.back().likelihood;
            if (rec.likelihood - prev < config.lik_tol * std::abs(prev)) {
                log.reason = StopReason::Tolerance;
                stop = true;
            }
        }
        if (!stop && iter >= config.max_iters) {
            log.reason = StopReason::MaxIterations;
            stop = true;
        }
        if (stop || (config.audit_every > 0 && iter % config.audit_every == 0)) rec.value_exact = audit(policy);
        rec.ms = elapsed();
        log.records.push_back(rec);
        if (stop) break;
        policy = m_step(model, rhat, succ, policy, msgs);
    }
    return result;
}

void write_run_log(std::ostream& out, const EmRunLog& log, const std::string& hash) {
    for (std::size_t i = 0; i < log.records.size(); ++i) {
        const auto& r = log.records[i];
        nlohmann::json j = {{"iter", r.iter}, {"likelihood", r.likelihood}, {"value_thm1", r.value_thm1}};
        if (r.value_exact) j["value_exact"] = *r.value_exact;
        j["ms"] = r.ms;
        if (i + 1 == log.records.size()) {
            j["reason"] = to_string(log.reason);
            j["policy_hash"] = hash;
            j["cutoff"] = log.cutoff;
            if (!log.warning.empty()) j["warning"] = log.warning;
        }
        out << j.dump() << '\n';
    }
}

std::string policy_hash(const JointPolicy& policy) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : policy_to_json(policy).dump()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace decem

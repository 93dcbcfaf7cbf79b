#include "doctest.h"

#include "support.hpp"

#include "decem/errors.hpp"
#include "decem/evaluation.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

using namespace decem;
using testing::bench_path;
using testing::random_model;

namespace {

struct Setup {
    DecPomdpModel model;
    JointPolicy policy;
    NormalizedRewards rhat;
    SuccessorIndex succ;
    JointKernel kernel;
};

Setup make_setup(DecPomdpModel m, std::size_t n1, std::size_t n2, std::uint64_t seed) {
    Setup s{std::move(m), {}, {}, {}, {}};
    s.policy = init_random(s.model, n1, n2, seed);
    s.rhat = normalize_rewards(s.model);
    s.succ = build_successor_index(s.model);
    s.kernel = build_kernel(s.model, s.policy, s.succ);
    return s;
}

NormalizedRewards constant_rhat(const DecPomdpModel& m, double value) {
    NormalizedRewards r;
    r.r_hat.assign(m.reward.size(), value);
    r.r_min = 0.0;
    r.r_max = 1.0;
    return r;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

std::vector<DecPomdpModel> oracle_models() {
    std::vector<DecPomdpModel> ms;
    ms.push_back(random_model(1, 3, 2, 2, 2, 2, 0.9));
    ms.push_back(random_model(2, 4, 3, 2, 2, 3, 0.95));
    ms.push_back(random_model(3, 2, 2, 3, 3, 2, 0.0));
    ms.push_back(random_model(4, 5, 2, 2, 2, 2, 0.7, 5));
    ms.push_back(load_model(bench_path("dectiger")));
    return ms;
}

} // namespace

TEST_CASE("sparse kernel equals the brute-force sum") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const std::size_t S = 2 + seed % 4;
        auto s = make_setup(random_model(seed, S, 2, 3, 2, 2, 0.9), 2 + seed % 2, 2, seed);
        const auto dense = testing::brute_kernel(s.model, s.policy);
        const std::size_t n = s.kernel.size();
        double worst = 0.0;
        for (std::size_t x = 0; x < n; ++x) {
            CHECK(s.kernel.row_sum(x) == doctest::Approx(1.0).epsilon(1e-12));
            const std::size_t p = x / (s.kernel.nodes2 * S), q = (x / S) % s.kernel.nodes2, st = x % S;
            for (std::size_t x2 = 0; x2 < n; ++x2) {
                const std::size_t p2 = x2 / (s.kernel.nodes2 * S), q2 = (x2 / S) % s.kernel.nodes2, st2 = x2 % S;
                worst = std::max(worst, std::abs(s.kernel.at(p, q, st, p2, q2, st2) - dense[x * n + x2]));
            }
        }
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("cutoff resolution") {
    const std::vector<double> ones(400, 1.0);
    SUBCASE("adaptive rule on a constant likelihood") {
        // (1-g) g^{2k} <= eps (1 - g^{2k}) first holds at k = 55 for g = 0.9, eps = 1e-6
        CHECK(cutoff_K(0.9, CutoffMode::adaptive(1e-6), ones) == 110);
        CHECK_FALSE(adaptive_rule_fires(0.9, 54, 1.0, 1.0 - std::pow(0.9, 108), 1e-6));
        CHECK(adaptive_rule_fires(0.9, 55, 1.0, 1.0 - std::pow(0.9, 110), 1e-6));
    }
    SUBCASE("fixed and degenerate discounts") {
        CHECK(cutoff_K(0.9, CutoffMode::fixed(100)) == 100);
        CHECK(cutoff_K(0.0, CutoffMode::adaptive(1e-8), ones) == 0);
        CHECK(cutoff_cap(0.9) == 197);
        CHECK(cutoff_cap(0.0) == 0);
    }
    SUBCASE("a vanishing likelihood stops at the cap") {
        CHECK(cutoff_K(0.9, CutoffMode::adaptive(1e-300, 40), ones) <= 40);
    }
    SUBCASE("text form") {
        CHECK(CutoffMode::parse("fixed:12").fixed_k == 12);
        CHECK(CutoffMode::parse("adaptive:1e-6").epsilon == 1e-6);
        CHECK(CutoffMode::parse(CutoffMode::fixed(7).to_string()).fixed_k == 7);
        for (const char* bad : {"fixed", "fixed:-1", "fixed:x", "adaptive:0", "adaptive:-1", "other:3"})
            CHECK_THROWS_AS(CutoffMode::parse(bad), std::invalid_argument);
    }
}

TEST_CASE("messages with constant normalized rewards") {
    auto s = make_setup(random_model(8, 4, 2, 2, 2, 2, 0.9), 2, 3, 8);
    SUBCASE("r-hat = 1 gives beta = 1 and L = 1 - g^(K+1)") {
        const auto r1 = constant_rhat(s.model, 1.0);
        for (std::size_t K : {0, 1, 5, 40}) {
            auto msgs = compute_messages(s.model, r1, s.kernel, s.policy, CutoffMode::fixed(K), true);
            CHECK(msgs.cutoff == K);
            for (const auto& b : msgs.beta)
                for (double v : b) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(likelihood(msgs) == doctest::Approx(1.0 - std::pow(0.9, K + 1.0)).epsilon(1e-12));
            CHECK(msgs.time_prior_mass == doctest::Approx(1.0 - std::pow(0.9, K + 1.0)).epsilon(1e-12));
        }
        auto adaptive = compute_messages(s.model, r1, s.kernel, s.policy, CutoffMode::adaptive(1e-6));
        CHECK(adaptive.cutoff == 110);
    }
    SUBCASE("r-hat = 0 gives L = 0") {
        const auto r0 = constant_rhat(s.model, 0.0);
        auto msgs = compute_messages(s.model, r0, s.kernel, s.policy, CutoffMode::fixed(30));
        CHECK(likelihood(msgs) == 0.0);
    }
    SUBCASE("K = 0 keeps only the first step") {
        auto msgs = compute_messages(s.model, s.rhat, s.kernel, s.policy, CutoffMode::fixed(0));
        for (std::size_t x = 0; x < msgs.alpha0.size(); ++x) {
            CHECK(msgs.alpha_hat[x] == doctest::Approx(0.1 * msgs.alpha0[x]).epsilon(1e-14));
            CHECK(msgs.beta_hat[x] == doctest::Approx(0.1 * msgs.beta0[x]).epsilon(1e-14));
        }
    }
}

TEST_CASE("alpha messages stay distributions") {
    auto s = make_setup(load_model(bench_path("recycling")), 3, 2, 4);
    auto alphas = forward_messages(s.kernel, s.policy, s.model.initial_belief, 30);
    for (const auto& a : alphas) {
        double total = 0.0;
        for (double v : a) total += v;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("likelihood computed per horizon agrees with the mixed form") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto s = make_setup(random_model(seed + 30, 4, 2, 2, 2, 2, 0.85), 2, 2, seed);
        for (std::size_t K : {0, 1, 2, 7, 60}) {
            auto msgs = compute_messages(s.model, s.rhat, s.kernel, s.policy, CutoffMode::fixed(K), true);
            CHECK(std::abs(likelihood_per_horizon(msgs) - likelihood(msgs)) < 1e-10);
        }
    }
}

TEST_CASE("likelihood maps to the exact value") {
    std::vector<DecPomdpModel> models{load_model(bench_path("dectiger")), load_model(bench_path("broadcast")),
                                      random_model(77, 5, 3, 2, 2, 2, 0.9)};
    for (const auto& m : models) {
        const auto rhat = normalize_rewards(m);
        const auto succ = build_successor_index(m);
        const std::size_t K = cutoff_cap(m.discount);
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            auto p = init_random(m, 1 + seed % 3, 1 + (seed / 3) % 3, seed);
            auto msgs = compute_messages(m, rhat, build_kernel(m, p, succ), p, CutoffMode::fixed(K));
            const double thm = theorem1_value(likelihood(msgs), rhat, m.discount);
            const double exact = evaluate_exact(m, p).v_b0;
            // the truncated series misses at most range * g^(K+1) / (1 - g)
            const double slack = rhat.range() * std::pow(m.discount, K + 1.0) / (1.0 - m.discount) + 1e-8;
            CHECK(std::abs(thm - exact) <= slack);
        }
    }
}

TEST_CASE("updates match the brute-force sums") {
    auto models = oracle_models();
    for (std::size_t i = 0; i < models.size(); ++i) {
        CAPTURE(i);
        auto s = make_setup(models[i], 2, 3, 40 + i);
        auto msgs = compute_messages(s.model, s.rhat, s.kernel, s.policy, CutoffMode::fixed(25));
        for (int agent : {1, 2}) {
            CAPTURE(agent);
            auto lib_pi = update_actions(s.model, s.rhat, s.succ, s.policy, msgs, agent);
            auto ref_pi = testing::brute_action_update(s.model, s.rhat, s.policy, msgs, agent);
            CHECK(max_abs_diff(lib_pi, ref_pi) < 1e-10);
            auto lib_lam = update_node_transitions(s.model, s.succ, s.policy, msgs, agent);
            auto ref_lam = testing::brute_transition_update(s.model, s.policy, msgs, agent);
            CHECK(max_abs_diff(lib_lam, ref_lam) < 1e-10);

            const AgentFsc& f = s.policy.agent(agent);
            const AgentFsc& other = s.policy.agent(3 - agent);
            std::vector<double> stat(f.num_nodes, 0.0);
            for (std::size_t n = 0; n < f.num_nodes; ++n)
                for (std::size_t o = 0; o < other.num_nodes; ++o)
                    for (std::size_t st = 0; st < s.model.num_states; ++st) {
                        const std::size_t x = agent == 1 ? s.kernel.index(n, o, st) : s.kernel.index(o, n, st);
                        stat[n] += msgs.beta_hat[x] * other.nu(o) * s.model.initial_belief[st];
                    }
            auto lib_nu = update_initial(s.policy, msgs, s.model.initial_belief, agent);
            CHECK(max_abs_diff(lib_nu, testing::reweight(f.initial_dist, stat)) < 1e-12);
        }
        auto next = m_step(s.model, s.rhat, s.succ, s.policy, msgs);
        CHECK(validate_policy(next, s.model).empty());
    }
}

TEST_CASE("myopic action update moves mass to the better action") {
    // one state, no future: pi(a) is reweighted by r-hat(a)
    auto m = DecPomdpModel::with_dimensions(1, 2, 1, 1, 1, 0.0);
    m.transition = {1.0, 1.0};
    m.observation = {1.0, 1.0};
    m.reward = {1.0, 3.0};
    m.initial_belief = {1.0};
    auto s = make_setup(m, 1, 1, 3);
    s.policy.agent1.action_probs = {0.5, 0.5};
    s.kernel = build_kernel(s.model, s.policy, s.succ);
    auto msgs = compute_messages(s.model, s.rhat, s.kernel, s.policy, CutoffMode::adaptive());
    CHECK(msgs.cutoff == 0);
    auto pi = update_actions(s.model, s.rhat, s.succ, s.policy, msgs, 1);
    // r-hat = (0, 1): the worse action falls to the floor
    CHECK(pi[1] == doctest::Approx(1.0).epsilon(1e-11));
    CHECK(pi[0] == doctest::Approx(1e-12).epsilon(1e-3));
}

TEST_CASE("deterministic controllers are fixed points") {
    auto m = load_model(bench_path("dectiger"));
    DeterministicFsc f{{0, 1}, {{1, 0}, {0, 1}}, 0};
    auto s = make_setup(m, 1, 1, 0);
    s.policy = make_deterministic(m, f, f);
    s.kernel = build_kernel(m, s.policy, s.succ);
    auto msgs = compute_messages(m, s.rhat, s.kernel, s.policy, CutoffMode::fixed(50));
    auto next = m_step(m, s.rhat, s.succ, s.policy, msgs);
    CHECK(next.agent1.action_probs == s.policy.agent1.action_probs);
    CHECK(next.agent2.node_transition == s.policy.agent2.node_transition);
    CHECK(next.agent1.initial_dist == s.policy.agent1.initial_dist);
}

TEST_CASE("symmetric agents stay symmetric") {
    auto m = load_model(bench_path("dectiger"));
    auto s = make_setup(m, 2, 2, 6);
    s.policy.agent2 = s.policy.agent1;
    for (int it = 0; it < 5; ++it) {
        s.kernel = build_kernel(m, s.policy, s.succ);
        auto msgs = compute_messages(m, s.rhat, s.kernel, s.policy, CutoffMode::fixed(60));
        s.policy = m_step(m, s.rhat, s.succ, s.policy, msgs);
        CHECK(max_abs_diff(s.policy.agent1.action_probs, s.policy.agent2.action_probs) < 1e-12);
        CHECK(max_abs_diff(s.policy.agent1.node_transition, s.policy.agent2.node_transition) < 1e-12);
    }
}

TEST_CASE("uninformative observations give identical transition rows") {
    auto m = random_model(9, 4, 2, 2, 2, 2, 0.9);
    std::fill(m.observation.begin(), m.observation.end(), 0.25);
    auto s = make_setup(m, 3, 2, 9);
    auto& f = s.policy.agent1;
    for (std::size_t n = 0; n < f.num_nodes; ++n)
        std::copy_n(&f.node_transition[(n * 2) * 3], 3, &f.node_transition[(n * 2 + 1) * 3]);
    s.kernel = build_kernel(m, s.policy, s.succ);
    auto msgs = compute_messages(m, s.rhat, s.kernel, s.policy, CutoffMode::fixed(40));
    auto lam = update_node_transitions(m, s.succ, s.policy, msgs, 1);
    for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t k = 0; k < 3; ++k)
            CHECK(lam[(n * 2) * 3 + k] == doctest::Approx(lam[(n * 2 + 1) * 3 + k]).epsilon(1e-12));
}

TEST_CASE("start node with the larger backward value gains mass") {
    auto s = make_setup(load_model(bench_path("broadcast")), 2, 2, 13);
    auto msgs = compute_messages(s.model, s.rhat, s.kernel, s.policy, CutoffMode::fixed(80));
    double v[2] = {0.0, 0.0};
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t q = 0; q < 2; ++q)
            for (std::size_t st = 0; st < s.model.num_states; ++st)
                v[n] += msgs.beta_hat[s.kernel.index(n, q, st)] * s.policy.agent2.nu(q) * s.model.initial_belief[st];
    auto nu = update_initial(s.policy, msgs, s.model.initial_belief, 1);
    const std::size_t better = v[0] > v[1] ? 0 : 1;
    CHECK(nu[better] > s.policy.agent1.nu(better));
}

TEST_CASE("single-agent reduction matches an independent POMDP EM") {
    const std::size_t S = 4, A = 3, Y = 2, N = 3, K = 40;
    auto m = random_model(55, S, A, 1, Y, 1, 0.9);
    const auto rhat = normalize_rewards(m);
    const auto succ = build_successor_index(m);
    auto policy = init_random(m, N, 1, 55);

    testing::PomdpEm ref;
    ref.S = S;
    ref.A = A;
    ref.Y = Y;
    ref.N = N;
    ref.gamma = m.discount;
    ref.K = K;
    ref.b0 = m.initial_belief;
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < A; ++a) {
            for (std::size_t s2 = 0; s2 < S; ++s2) ref.T.push_back(m.T(s, a, 0, s2));
            ref.R.push_back(rhat.r_hat[m.r_index(s, a, 0)]);
        }
    for (std::size_t s2 = 0; s2 < S; ++s2)
        for (std::size_t a = 0; a < A; ++a)
            for (std::size_t y = 0; y < Y; ++y) ref.O.push_back(m.O(s2, a, 0, y, 0));
    ref.pi = policy.agent1.action_probs;
    ref.lam = policy.agent1.node_transition;
    ref.nu = policy.agent1.initial_dist;

    for (int it = 0; it < 25; ++it) {
        auto msgs = compute_messages(m, rhat, build_kernel(m, policy, succ), policy, CutoffMode::fixed(K));
        policy = m_step(m, rhat, succ, policy, msgs);
        ref.iterate();
    }
    CHECK(max_abs_diff(policy.agent1.action_probs, ref.pi) < 1e-10);
    CHECK(max_abs_diff(policy.agent1.node_transition, ref.lam) < 1e-10);
    CHECK(max_abs_diff(policy.agent1.initial_dist, ref.nu) < 1e-10);
}

TEST_CASE("em_solve never lowers the likelihood") {
    std::vector<DecPomdpModel> models{load_model(bench_path("dectiger")), load_model(bench_path("recycling")),
                                      random_model(101, 5, 2, 3, 2, 2, 0.9), random_model(102, 6, 3, 2, 3, 2, 0.95)};
    for (std::size_t i = 0; i < models.size(); ++i) {
        EmConfig cfg;
        cfg.max_iters = 60;
        cfg.lik_tol = 0.0;
        cfg.audit_every = 20;
        auto res = em_solve(models[i], init_random(models[i], 2, 2, i), cfg);
        const auto& rec = res.log.records;
        REQUIRE(rec.size() >= 2);
        for (std::size_t k = 1; k < rec.size(); ++k)
            CHECK(rec[k].likelihood >= rec[k - 1].likelihood - 1e-12 * std::abs(rec[k - 1].likelihood));
        CHECK(rec.front().value_exact.has_value());
        CHECK(rec.back().value_exact.has_value());
        CHECK(validate_policy(res.policy, models[i]).empty());
        CHECK(*rec.back().value_exact >= *rec.front().value_exact - 1e-6);
    }
}

TEST_CASE("em_solve stopping rules") {
    auto m = load_model(bench_path("dectiger"));
    auto p0 = init_random(m, 2, 2, 1);
    SUBCASE("max_iters = 0 returns the initial policy") {
        EmConfig cfg;
        cfg.max_iters = 0;
        auto res = em_solve(m, p0, cfg);
        CHECK(res.log.records.size() == 1);
        CHECK(res.log.reason == StopReason::MaxIterations);
        CHECK(res.policy.agent1.action_probs == p0.agent1.action_probs);
        CHECK(*res.log.records[0].value_exact == doctest::Approx(evaluate_exact(m, p0).v_b0));
    }
    SUBCASE("a loose tolerance stops early") {
        EmConfig cfg;
        cfg.lik_tol = 1e-2;
        auto res = em_solve(m, p0, cfg);
        CHECK(res.log.reason == StopReason::Tolerance);
        CHECK(res.log.records.size() < 1000);
    }
    SUBCASE("the cutoff is frozen after the first E-step") {
        EmConfig cfg;
        cfg.max_iters = 3;
        auto res = em_solve(m, p0, cfg);
        CHECK(res.log.cutoff > 0);
        CHECK(res.log.cutoff <= cutoff_cap(m.discount));
    }
}

TEST_CASE("constant reward skips EM with a warning") {
    auto m = load_model(bench_path("dectiger"));
    std::fill(m.reward.begin(), m.reward.end(), -2.0);
    auto p0 = init_random(m, 2, 2, 1);
    auto res = em_solve(m, p0, {});
    CHECK(res.log.reason == StopReason::DegenerateReward);
    CHECK_FALSE(res.log.warning.empty());
    CHECK(res.policy.agent1.node_transition == p0.agent1.node_transition);
    CHECK(res.log.records[0].value_thm1 == doctest::Approx(-20.0));
    CHECK(*res.log.records[0].value_exact == doctest::Approx(-20.0));
}

TEST_CASE("em_solve input errors") {
    auto m = load_model(bench_path("dectiger"));
    auto bad = init_random(m, 2, 2, 1);
    bad.agent1.action_probs[0] += 0.1;
    CHECK_THROWS_AS(em_solve(m, bad, {}), DimensionError);
    auto nan_model = m;
    nan_model.reward[3] = std::nan("");
    CHECK_THROWS_AS(em_solve(nan_model, init_random(m, 2, 2, 1), {}), NumericalError);
}

TEST_CASE("run log is one JSON object per line") {
    auto m = load_model(bench_path("broadcast"));
    EmConfig cfg;
    cfg.max_iters = 5;
    auto res = em_solve(m, init_random(m, 2, 2, 3), cfg);
    std::ostringstream os;
    const std::string hash = policy_hash(res.policy);
    write_run_log(os, res.log, hash);
    std::istringstream is(os.str());
    std::string line;
    std::vector<nlohmann::json> rows;
    while (std::getline(is, line)) rows.push_back(nlohmann::json::parse(line));
    REQUIRE(rows.size() == 6);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i]["iter"] == i);
        CHECK(rows[i].contains("likelihood"));
        CHECK(rows[i].contains("value_thm1"));
    }
    CHECK(rows.back()["reason"] == "max-iterations");
    CHECK(rows.back()["policy_hash"] == hash);
    CHECK(rows.back().contains("value_exact"));
    CHECK(hash.size() == 16);
    CHECK(policy_hash(res.policy) == hash);
}

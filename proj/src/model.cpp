#include "decem/model.hpp"

#include "decem/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace decem {

DecPomdpModel DecPomdpModel::with_dimensions(std::size_t states, std::size_t actions1,
                                             std::size_t actions2, std::size_t obs1,
                                             std::size_t obs2, double discount) {
    DecPomdpModel m;
    m.num_states = states;
    m.num_actions1 = actions1;
    m.num_actions2 = actions2;
    m.num_obs1 = obs1;
    m.num_obs2 = obs2;
    m.discount = discount;
    m.transition.assign(states * actions1 * actions2 * states, 0.0);
    m.observation.assign(states * actions1 * actions2 * obs1 * obs2, 0.0);
    m.reward.assign(states * actions1 * actions2, 0.0);
    m.initial_belief.assign(states, 0.0);
    return m;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string name_or_index(const std::vector<std::string>& names, std::size_t i) {
    return names.empty() ? std::to_string(i) : names[i];
}

void check_row(ValidationReport& report, const std::string& table, std::vector<std::size_t> index,
               std::span<const double> row) {
    double sum = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
        double v = row[i];
        if (!(v >= 0.0 && v <= 1.0)) {
            auto idx = index;
            idx.push_back(i);
            report.push_back({table, std::move(idx), v, "probability outside [0, 1]"});
        }
        sum += v;
    }
    if (!(std::abs(sum - 1.0) <= kStochasticTolerance))
        report.push_back({table, std::move(index), sum - 1.0, "row does not sum to 1"});
}

} // namespace

std::string serialize_model(const DecPomdpModel& m) {
    std::ostringstream os;
    auto names_line = [&](const std::vector<std::string>& names, std::size_t n) {
        if (names.empty()) {
            os << n << '\n';
            return;
        }
        for (std::size_t i = 0; i < names.size(); ++i) os << (i ? " " : "") << names[i];
        os << '\n';
    };
    os << "agents: 2\n";
    os << "discount: " << fmt(m.discount) << '\n';
    os << "values: reward\n";
    os << "states: ";
    names_line(m.state_names, m.num_states);
    os << "start:\n";
    for (std::size_t s = 0; s < m.num_states; ++s) os << (s ? " " : "") << fmt(m.initial_belief[s]);
    os << '\n';
    os << "actions:\n";
    names_line(m.action_names1, m.num_actions1);
    names_line(m.action_names2, m.num_actions2);
    os << "observations:\n";
    names_line(m.obs_names1, m.num_obs1);
    names_line(m.obs_names2, m.num_obs2);

    auto act = [&](std::size_t a, std::size_t b) {
        return name_or_index(m.action_names1, a) + " " + name_or_index(m.action_names2, b);
    };
    for (std::size_t s = 0; s < m.num_states; ++s)
        for (std::size_t a = 0; a < m.num_actions1; ++a)
            for (std::size_t b = 0; b < m.num_actions2; ++b)
                for (std::size_t s2 = 0; s2 < m.num_states; ++s2) {
                    double p = m.T(s, a, b, s2);
                    if (p != 0.0)
                        os << "T: " << act(a, b) << " : " << name_or_index(m.state_names, s) << " : "
                           << name_or_index(m.state_names, s2) << ' ' << fmt(p) << '\n';
                }
    for (std::size_t s2 = 0; s2 < m.num_states; ++s2)
        for (std::size_t a = 0; a < m.num_actions1; ++a)
            for (std::size_t b = 0; b < m.num_actions2; ++b)
                for (std::size_t y = 0; y < m.num_obs1; ++y)
                    for (std::size_t z = 0; z < m.num_obs2; ++z) {
                        double p = m.O(s2, a, b, y, z);
                        if (p != 0.0)
                            os << "O: " << act(a, b) << " : " << name_or_index(m.state_names, s2) << " : "
                               << name_or_index(m.obs_names1, y) << ' ' << name_or_index(m.obs_names2, z) << ' '
                               << fmt(p) << '\n';
                    }
    for (std::size_t s = 0; s < m.num_states; ++s)
        for (std::size_t a = 0; a < m.num_actions1; ++a)
            for (std::size_t b = 0; b < m.num_actions2; ++b) {
                double r = m.R(s, a, b);
                if (r != 0.0)
                    os << "R: " << act(a, b) << " : " << name_or_index(m.state_names, s) << " : * : * * "
                       << fmt(r) << '\n';
            }
    return os.str();
}

ValidationReport validate_model(const DecPomdpModel& m) {
    ValidationReport report;
    const std::size_t ns = m.num_states, na = m.num_actions1, nb = m.num_actions2;
    const std::size_t nyz = m.num_joint_obs();
    auto expect_size = [&](const std::string& table, std::size_t have, std::size_t want) {
        if (have != want)
            report.push_back({table, {}, static_cast<double>(have),
                              "size " + std::to_string(have) + ", expected " + std::to_string(want)});
        return have == want;
    };
    bool shapes = expect_size("transition", m.transition.size(), ns * na * nb * ns);
    shapes &= expect_size("observation", m.observation.size(), ns * na * nb * nyz);
    shapes &= expect_size("reward", m.reward.size(), ns * na * nb);
    shapes &= expect_size("initial_belief", m.initial_belief.size(), ns);
    if (!(m.discount >= 0.0 && m.discount < 1.0))
        report.push_back({"discount", {}, m.discount, "discount must lie in [0, 1)"});
    if (!shapes) return report;

    std::span<const double> t(m.transition), o(m.observation);
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t a = 0; a < na; ++a)
            for (std::size_t b = 0; b < nb; ++b) {
                check_row(report, "transition", {s, a, b}, t.subspan(m.t_index(s, a, b, 0), ns));
                check_row(report, "observation", {s, a, b}, o.subspan(m.o_index(s, a, b, 0, 0), nyz));
            }
    for (std::size_t i = 0; i < m.reward.size(); ++i)
        if (!std::isfinite(m.reward[i]))
            report.push_back({"reward", {i / (na * nb), (i / nb) % na, i % nb}, m.reward[i], "reward is not finite"});
    check_row(report, "initial_belief", {}, m.initial_belief);
    return report;
}

nlohmann::json model_to_json(const DecPomdpModel& m) {
    nlohmann::json j;
    j["num_states"] = m.num_states;
    j["num_actions"] = {m.num_actions1, m.num_actions2};
    j["num_observations"] = {m.num_obs1, m.num_obs2};
    j["state_names"] = m.state_names;
    j["action_names"] = {m.action_names1, m.action_names2};
    j["observation_names"] = {m.obs_names1, m.obs_names2};
    j["discount"] = m.discount;
    j["initial_belief"] = m.initial_belief;
    j["transition"] = m.transition;
    j["observation"] = m.observation;
    j["reward"] = m.reward;
    j["layout"] = {{"transition", "[s][a][b][s']"},
                   {"observation", "[s'][a][b][y][z]"},
                   {"reward", "[s][a][b]"}};
    return j;
}

std::string model_hash(const DecPomdpModel& m) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : serialize_model(m)) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

NormalizedRewards normalize_rewards(const DecPomdpModel& m) {
    NormalizedRewards n;
    n.r_hat.assign(m.reward.size(), 0.0);
    if (m.reward.empty()) {
        n.degenerate = true;
        return n;
    }
    auto [lo, hi] = std::minmax_element(m.reward.begin(), m.reward.end());
    n.r_min = *lo;
    n.r_max = *hi;
    if (!(n.r_max > n.r_min)) {
        n.degenerate = true;
        return n;
    }
    const double width = n.r_max - n.r_min;
    for (std::size_t i = 0; i < m.reward.size(); ++i) {
        double v = (m.reward[i] - n.r_min) / width;
        n.r_hat[i] = std::clamp(v, 0.0, 1.0);
    }
    // exact endpoints regardless of rounding in the division
    n.r_hat[static_cast<std::size_t>(lo - m.reward.begin())] = 0.0;
    n.r_hat[static_cast<std::size_t>(hi - m.reward.begin())] = 1.0;
    return n;
}

std::span<const SuccessorIndex::Entry> SuccessorIndex::successors(std::size_t s, std::size_t a,
                                                                  std::size_t b, std::size_t y,
                                                                  std::size_t z) const {
    std::size_t k = (((s * num_actions1_ + a) * num_actions2_ + b) * num_obs1_ + y) * num_obs2_ + z;
    return std::span<const Entry>(entries_).subspan(set_offsets_[k], set_offsets_[k + 1] - set_offsets_[k]);
}

std::span<const SuccessorIndex::Entry> SuccessorIndex::block(std::size_t s, std::size_t a,
                                                             std::size_t b) const {
    std::size_t nyz = num_obs1_ * num_obs2_;
    std::size_t k = ((s * num_actions1_ + a) * num_actions2_ + b) * nyz;
    return std::span<const Entry>(entries_).subspan(set_offsets_[k], set_offsets_[k + nyz] - set_offsets_[k]);
}

std::span<const std::uint32_t> SuccessorIndex::forward(std::size_t s, std::size_t a, std::size_t b) const {
    std::size_t k = (s * num_actions1_ + a) * num_actions2_ + b;
    return std::span<const std::uint32_t>(forward_states_)
        .subspan(forward_offsets_[k], forward_offsets_[k + 1] - forward_offsets_[k]);
}

SuccessorIndex build_successor_index(const DecPomdpModel& m, double threshold) {
    if (m.num_obs1 > std::numeric_limits<std::uint16_t>::max() ||
        m.num_obs2 > std::numeric_limits<std::uint16_t>::max() ||
        m.num_states > std::numeric_limits<std::uint32_t>::max())
        throw DimensionError("model too large for the successor index");
    SuccessorIndex idx;
    idx.num_actions1_ = m.num_actions1;
    idx.num_actions2_ = m.num_actions2;
    idx.num_obs1_ = m.num_obs1;
    idx.num_obs2_ = m.num_obs2;
    const std::size_t ns = m.num_states, na = m.num_actions1, nb = m.num_actions2;
    const std::size_t ny = m.num_obs1, nz = m.num_obs2;
    idx.set_offsets_.reserve(ns * na * nb * ny * nz + 1);
    idx.forward_offsets_.reserve(ns * na * nb + 1);
    std::vector<std::uint32_t> fwd;
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t a = 0; a < na; ++a)
            for (std::size_t b = 0; b < nb; ++b) {
                fwd.clear();
                idx.forward_offsets_.push_back(idx.forward_states_.size());
                for (std::size_t s2 = 0; s2 < ns; ++s2)
                    if (m.T(s, a, b, s2) > threshold) fwd.push_back(static_cast<std::uint32_t>(s2));
                idx.forward_states_.insert(idx.forward_states_.end(), fwd.begin(), fwd.end());
                for (std::size_t y = 0; y < ny; ++y)
                    for (std::size_t z = 0; z < nz; ++z) {
                        std::size_t begin = idx.entries_.size();
                        idx.set_offsets_.push_back(begin);
                        for (std::uint32_t s2 : fwd) {
                            double w = m.T(s, a, b, s2) * m.O(s2, a, b, y, z);
                            if (w > threshold)
                                idx.entries_.push_back({s2, static_cast<std::uint16_t>(y),
                                                        static_cast<std::uint16_t>(z), w});
                        }
                        idx.max_set_size_ = std::max(idx.max_set_size_, idx.entries_.size() - begin);
                    }
            }
    idx.set_offsets_.push_back(idx.entries_.size());
    idx.forward_offsets_.push_back(idx.forward_states_.size());
    return idx;
}

} // namespace decem

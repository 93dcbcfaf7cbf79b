// Reader for the two-agent `.dpomdp` text format (the multi-agent extension of
// Cassandra's POMDP format).
//
// Header:   agents: 2 | <name> <name>
//           discount: <g>
//           values: reward | cost
//           states: <n> | <names...>
//           start: <probs...> | uniform | <state>
//           actions:      (one line per agent: <n> | <names...>)
//           observations: (one line per agent)
// Entries:  T: <a1 a2> : <s> : <s'> <p>      T: <a1 a2> : <s> <row>      T: <a1 a2> <matrix>
//           O: <a1 a2> : <s'> : <y z> <p>    O: <a1 a2> : <s'> <row>     O: <a1 a2> <matrix>
//           R: <a1 a2> : <s> : <s'> : <y z> <v>    R: <a1 a2> : <s> : <s'> <row>
//           R: <a1 a2> : <s> <matrix>
// A joint action or observation may also be written as one joint index (last
// agent fastest). `*` matches everything; `uniform` and `identity` expand as
// in the single-agent format. Later entries override earlier ones.

#include "decem/errors.hpp"
#include "decem/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <unordered_map>

namespace decem {
namespace {

struct Token {
    std::string text;
    std::size_t line;
    std::size_t column;
};

using Line = std::vector<Token>;

std::vector<Line> tokenize(std::string_view text) {
    std::vector<Line> lines;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        std::string_view raw = text.substr(pos, end - pos);
        if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        Line toks;
        std::size_t i = 0;
        while (i < raw.size()) {
            char c = raw[i];
            if (c == ' ' || c == '\t' || c == '\r') {
                ++i;
                continue;
            }
            if (c == ':') {
                toks.push_back({":", line_no, i + 1});
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j < raw.size() && raw[j] != ' ' && raw[j] != '\t' && raw[j] != '\r' &&
                   raw[j] != ':')
                ++j;
            toks.push_back({std::string(raw.substr(i, j - i)), line_no, i + 1});
            i = j;
        }
        if (!toks.empty()) lines.push_back(std::move(toks));
        if (end == text.size()) break;
        pos = end + 1;
    }
    return lines;
}

std::optional<double> to_number(const std::string& s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return v;
}

std::optional<std::size_t> to_index(const std::string& s) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

[[noreturn]] void fail(const Token& t, const std::string& msg) {
    throw ParseError(msg, t.line, t.column);
}

/// A named alphabet (states, or one agent's actions/observations).
struct Alphabet {
    std::string what;
    std::vector<std::string> names;
    std::size_t size = 0;
    std::unordered_map<std::string, std::size_t> lookup;

    void define(const Line& toks, std::size_t from) {
        if (from >= toks.size()) throw ParseError("empty " + what + " declaration");
        if (toks.size() - from == 1) {
            if (auto n = to_index(toks[from].text)) {
                if (*n == 0) fail(toks[from], what + " count must be positive");
                size = *n;
                return;
            }
        }
        for (std::size_t i = from; i < toks.size(); ++i) {
            if (lookup.count(toks[i].text)) fail(toks[i], "duplicate " + what + " name '" + toks[i].text + "'");
            lookup.emplace(toks[i].text, names.size());
            names.push_back(toks[i].text);
        }
        size = names.size();
    }

    /// Index, or -1 for the wildcard.
    long resolve(const Token& t) const {
        if (t.text == "*") return -1;
        if (auto it = lookup.find(t.text); it != lookup.end()) return static_cast<long>(it->second);
        if (auto n = to_index(t.text)) {
            if (*n >= size) fail(t, what + " index " + t.text + " out of range (size " + std::to_string(size) + ")");
            return static_cast<long>(*n);
        }
        fail(t, "unknown " + what + " '" + t.text + "'");
    }
};

/// A resolved pair of per-agent indices (-1 = wildcard).
struct Pair {
    long first = -1;
    long second = -1;
};

struct RewardRule {
    long a1, a2, s, s2, y, z;
    double value;
};

class Parser {
public:
    explicit Parser(std::string_view text) : lines_(tokenize(text)) {
        states_.what = "state";
        actions_[0].what = actions_[1].what = "action";
        obs_[0].what = obs_[1].what = "observation";
    }

    DecPomdpModel run();

private:
    // Data tokens following an entry header can continue on later lines.
    const Token& next_data_token(const Token& context) {
        if (pending_pos_ < pending_.size()) return pending_[pending_pos_++];
        while (line_pos_ < lines_.size()) {
            const Line& l = lines_[line_pos_];
            if (is_entry_start(l)) break;
            pending_ = l;
            pending_pos_ = 0;
            ++line_pos_;
            return pending_[pending_pos_++];
        }
        fail(context, "unexpected end of data");
    }

    double next_number(const Token& context) {
        const Token& t = next_data_token(context);
        auto v = to_number(t.text);
        if (!v) fail(t, "expected a number, got '" + t.text + "'");
        return *v;
    }

    static bool is_keyword_line(const Line& l) {
        static const char* kw[] = {"agents", "discount", "values", "states", "start",
                                   "actions", "observations", "T", "O", "R"};
        if (l.size() < 2 || l[1].text != ":") return false;
        return std::any_of(std::begin(kw), std::end(kw), [&](const char* k) { return l[0].text == k; });
    }
    static bool is_entry_start(const Line& l) { return is_keyword_line(l); }

    void require_header(const Token& t) {
        if (!have_states_ || !have_actions_ || !have_obs_)
            fail(t, "entries must follow the states, actions and observations declarations");
        if (!allocated_) allocate();
    }

    void allocate();
    void parse_header_line(const Line& l);
    void parse_start(const Line& l);
    void parse_agent_lines(Alphabet (&alpha)[2], const Line& l);
    void parse_t(const Line& l);
    void parse_o(const Line& l);
    void parse_r(const Line& l);

    Pair resolve_joint(const std::vector<Token>& field, Alphabet (&alpha)[2], const Token& context) const;
    std::vector<std::vector<Token>> split_fields(const Line& l) const;

    template <typename F>
    static void for_each(long v, std::size_t n, F&& f) {
        if (v >= 0) {
            f(static_cast<std::size_t>(v));
            return;
        }
        for (std::size_t i = 0; i < n; ++i) f(i);
    }

    void finish_rows(const Token& where);
    void reduce_rewards();

    std::vector<Line> lines_;
    std::size_t line_pos_ = 0;
    Line pending_;
    std::size_t pending_pos_ = 0;

    DecPomdpModel m_;
    Alphabet states_;
    Alphabet actions_[2];
    Alphabet obs_[2];
    bool have_agents_ = false, have_discount_ = false, have_states_ = false;
    bool have_actions_ = false, have_obs_ = false, have_start_ = false;
    bool allocated_ = false;
    bool cost_values_ = false;
    Line start_tokens_;
    std::vector<RewardRule> reward_rules_;
};

std::vector<std::vector<Token>> Parser::split_fields(const Line& l) const {
    std::vector<std::vector<Token>> fields(1);
    for (std::size_t i = 2; i < l.size(); ++i) {
        if (l[i].text == ":") {
            fields.emplace_back();
            continue;
        }
        fields.back().push_back(l[i]);
    }
    return fields;
}

Pair Parser::resolve_joint(const std::vector<Token>& field, Alphabet (&alpha)[2],
                           const Token& context) const {
    if (field.size() == 2) return {alpha[0].resolve(field[0]), alpha[1].resolve(field[1])};
    if (field.size() == 1) {
        if (field[0].text == "*") return {-1, -1};
        auto joint = to_index(field[0].text);
        if (!joint) fail(field[0], "expected a joint index or one " + alpha[0].what + " per agent");
        if (*joint >= alpha[0].size * alpha[1].size) fail(field[0], "joint " + alpha[0].what + " index out of range");
        return {static_cast<long>(*joint / alpha[1].size), static_cast<long>(*joint % alpha[1].size)};
    }
    fail(field.empty() ? context : field[0], "expected one " + alpha[0].what + " per agent (2 agents)");
}

void Parser::allocate() {
    m_ = DecPomdpModel::with_dimensions(states_.size, actions_[0].size, actions_[1].size,
                                        obs_[0].size, obs_[1].size, m_.discount);
    m_.state_names = states_.names;
    m_.action_names1 = actions_[0].names;
    m_.action_names2 = actions_[1].names;
    m_.obs_names1 = obs_[0].names;
    m_.obs_names2 = obs_[1].names;
    allocated_ = true;
}

void Parser::parse_agent_lines(Alphabet (&alpha)[2], const Line& l) {
    std::size_t agent = 0;
    if (l.size() > 2) {
        alpha[0].define(l, 2);
        agent = 1;
    }
    while (agent < 2) {
        if (line_pos_ >= lines_.size() || is_keyword_line(lines_[line_pos_]))
            fail(l[0], "expected one " + alpha[0].what + " line per agent");
        alpha[agent].define(lines_[line_pos_], 0);
        ++line_pos_;
        ++agent;
    }
}

void Parser::parse_start(const Line& l) {
    start_tokens_.assign(l.begin() + 2, l.end());
    while (line_pos_ < lines_.size() && !is_keyword_line(lines_[line_pos_])) {
        const Line& more = lines_[line_pos_++];
        start_tokens_.insert(start_tokens_.end(), more.begin(), more.end());
    }
    if (start_tokens_.empty()) fail(l[0], "empty start declaration");
    have_start_ = true;
}

void Parser::parse_header_line(const Line& l) {
    const std::string& key = l[0].text;
    if (key == "agents") {
        if (l.size() < 3) fail(l[0], "missing agent count");
        std::size_t count = l.size() - 2;
        if (count == 1) {
            auto n = to_index(l[2].text);
            count = n ? *n : 1;
        }
        if (count != 2) fail(l[2], "exactly 2 agents are supported, found " + std::to_string(count));
        have_agents_ = true;
    } else if (key == "discount") {
        if (l.size() != 3) fail(l[0], "discount takes one value");
        auto v = to_number(l[2].text);
        if (!v) fail(l[2], "discount is not a number");
        if (!(*v >= 0.0 && *v < 1.0)) fail(l[2], "discount must lie in [0, 1)");
        m_.discount = *v;
        have_discount_ = true;
    } else if (key == "values") {
        if (l.size() != 3 || (l[2].text != "reward" && l[2].text != "cost"))
            fail(l[0], "values must be 'reward' or 'cost'");
        cost_values_ = l[2].text == "cost";
    } else if (key == "states") {
        if (l.size() > 2) {
            states_.define(l, 2);
        } else {
            if (line_pos_ >= lines_.size()) fail(l[0], "missing states");
            states_.define(lines_[line_pos_++], 0);
        }
        have_states_ = true;
    } else if (key == "start") {
        parse_start(l);
    } else if (key == "actions") {
        parse_agent_lines(actions_, l);
        have_actions_ = true;
    } else if (key == "observations") {
        parse_agent_lines(obs_, l);
        have_obs_ = true;
    }
}

void Parser::parse_t(const Line& l) {
    require_header(l[0]);
    auto fields = split_fields(l);
    if (fields.size() > 3) fail(l[0], "too many ':' fields in T entry");
    Pair act = resolve_joint(fields[0], actions_, l[0]);
    const std::size_t ns = m_.num_states;
    auto assign = [&](long s, long s2, double p) {
        for_each(act.first, m_.num_actions1, [&](std::size_t a) {
            for_each(act.second, m_.num_actions2, [&](std::size_t b) {
                for_each(s, ns, [&](std::size_t si) {
                    for_each(s2, ns, [&](std::size_t sj) { m_.transition[m_.t_index(si, a, b, sj)] = p; });
                });
            });
        });
    };
    if (fields.size() == 3) {
        if (fields[1].size() != 1) fail(l[0], "T entry needs exactly one start state");
        long s = states_.resolve(fields[1][0]);
        auto& f = fields[2];
        if (f.empty() || f.size() > 2) fail(l[0], "T entry needs '<end-state> <probability>'");
        long s2 = states_.resolve(f[0]);
        double p = 0.0;
        if (f.size() == 2) {
            auto v = to_number(f[1].text);
            if (!v) fail(f[1], "expected a probability");
            p = *v;
        } else {
            p = next_number(f[0]);
        }
        assign(s, s2, p);
    } else if (fields.size() == 2) {
        if (fields[1].size() != 1) fail(l[0], "T entry needs exactly one start state");
        long s = states_.resolve(fields[1][0]);
        const Token& first = next_data_token(l[0]);
        if (first.text == "uniform") {
            assign(s, -1, 1.0 / static_cast<double>(ns));
            return;
        }
        --pending_pos_;
        for (std::size_t j = 0; j < ns; ++j) assign(s, static_cast<long>(j), next_number(l[0]));
    } else {
        const Token& first = next_data_token(l[0]);
        if (first.text == "uniform") {
            assign(-1, -1, 1.0 / static_cast<double>(ns));
            return;
        }
        if (first.text == "identity") {
            for (std::size_t i = 0; i < ns; ++i)
                for (std::size_t j = 0; j < ns; ++j)
                    assign(static_cast<long>(i), static_cast<long>(j), i == j ? 1.0 : 0.0);
            return;
        }
        --pending_pos_;
        for (std::size_t i = 0; i < ns; ++i)
            for (std::size_t j = 0; j < ns; ++j)
                assign(static_cast<long>(i), static_cast<long>(j), next_number(l[0]));
    }
}

void Parser::parse_o(const Line& l) {
    require_header(l[0]);
    auto fields = split_fields(l);
    if (fields.size() > 3) fail(l[0], "too many ':' fields in O entry");
    Pair act = resolve_joint(fields[0], actions_, l[0]);
    const std::size_t ns = m_.num_states;
    const std::size_t nyz = m_.num_joint_obs();
    auto assign = [&](long s2, Pair o, double p) {
        for_each(act.first, m_.num_actions1, [&](std::size_t a) {
            for_each(act.second, m_.num_actions2, [&](std::size_t b) {
                for_each(s2, ns, [&](std::size_t sj) {
                    for_each(o.first, m_.num_obs1, [&](std::size_t y) {
                        for_each(o.second, m_.num_obs2,
                                 [&](std::size_t z) { m_.observation[m_.o_index(sj, a, b, y, z)] = p; });
                    });
                });
            });
        });
    };
    auto joint = [&](std::size_t k) {
        return Pair{static_cast<long>(k / m_.num_obs2), static_cast<long>(k % m_.num_obs2)};
    };
    if (fields.size() == 3) {
        if (fields[1].size() != 1) fail(l[0], "O entry needs exactly one end state");
        long s2 = states_.resolve(fields[1][0]);
        auto f = fields[2];
        std::optional<double> p;
        // "<y> <z> <p>", "<joint> <p>", "<y> <z>" + p on the next line, or "<joint>" + p.
        if (f.size() == 3 || (f.size() == 2 && to_number(f[1].text) &&
                              (to_index(f[0].text) || f[0].text == "*"))) {
            p = to_number(f.back().text);
            if (!p) fail(f.back(), "expected a probability");
            f.pop_back();
        }
        if (f.empty()) fail(l[0], "O entry needs an observation");
        Pair o = resolve_joint(f, obs_, l[0]);
        assign(s2, o, p ? *p : next_number(f[0]));
    } else if (fields.size() == 2) {
        if (fields[1].size() != 1) fail(l[0], "O entry needs exactly one end state");
        long s2 = states_.resolve(fields[1][0]);
        const Token& first = next_data_token(l[0]);
        if (first.text == "uniform") {
            assign(s2, {-1, -1}, 1.0 / static_cast<double>(nyz));
            return;
        }
        --pending_pos_;
        for (std::size_t k = 0; k < nyz; ++k) assign(s2, joint(k), next_number(l[0]));
    } else {
        const Token& first = next_data_token(l[0]);
        if (first.text == "uniform") {
            assign(-1, {-1, -1}, 1.0 / static_cast<double>(nyz));
            return;
        }
        --pending_pos_;
        for (std::size_t j = 0; j < ns; ++j)
            for (std::size_t k = 0; k < nyz; ++k)
                assign(static_cast<long>(j), joint(k), next_number(l[0]));
    }
}

void Parser::parse_r(const Line& l) {
    require_header(l[0]);
    auto fields = split_fields(l);
    if (fields.size() < 2 || fields.size() > 4) fail(l[0], "malformed R entry");
    Pair act = resolve_joint(fields[0], actions_, l[0]);
    if (fields[1].size() != 1) fail(l[0], "R entry needs exactly one start state");
    long s = states_.resolve(fields[1][0]);
    const double sign = cost_values_ ? -1.0 : 1.0;
    auto add = [&](long s2, Pair o, double v) {
        reward_rules_.push_back({act.first, act.second, s, s2, o.first, o.second, sign * v});
    };
    const std::size_t nyz = m_.num_joint_obs();
    if (fields.size() == 4) {
        if (fields[2].size() != 1) fail(l[0], "R entry needs exactly one end state");
        long s2 = states_.resolve(fields[2][0]);
        auto f = fields[3];
        std::optional<double> v;
        if (f.size() == 3 || (f.size() == 2 && to_number(f[1].text) &&
                              (to_index(f[0].text) || f[0].text == "*"))) {
            v = to_number(f.back().text);
            if (!v) fail(f.back(), "expected a reward value");
            f.pop_back();
        }
        if (f.empty()) fail(l[0], "R entry needs an observation");
        Pair o = resolve_joint(f, obs_, l[0]);
        add(s2, o, v ? *v : next_number(f[0]));
    } else if (fields.size() == 3) {
        if (fields[2].size() != 1) fail(l[0], "R entry needs exactly one end state");
        long s2 = states_.resolve(fields[2][0]);
        for (std::size_t k = 0; k < nyz; ++k)
            add(s2, {static_cast<long>(k / m_.num_obs2), static_cast<long>(k % m_.num_obs2)},
                next_number(l[0]));
    } else {
        for (std::size_t j = 0; j < m_.num_states; ++j)
            for (std::size_t k = 0; k < nyz; ++k)
                add(static_cast<long>(j),
                    {static_cast<long>(k / m_.num_obs2), static_cast<long>(k % m_.num_obs2)},
                    next_number(l[0]));
    }
}

void renormalize_row(std::span<double> row, const std::string& table,
                     std::vector<std::size_t> index) {
    double sum = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (row[i] < 0.0 || row[i] > 1.0 + kStochasticTolerance || !std::isfinite(row[i])) {
            auto idx = index;
            idx.push_back(i);
            std::ostringstream os;
            os << "probability " << row[i] << " outside [0,1] in " << table << " at [";
            for (std::size_t k = 0; k < idx.size(); ++k) os << (k ? "," : "") << idx[k];
            os << "]";
            throw ParseError(os.str());
        }
        sum += row[i];
    }
    if (std::abs(sum - 1.0) > kStochasticTolerance) {
        std::ostringstream os;
        os.precision(12);
        os << "non-stochastic row in " << table << " at [";
        for (std::size_t k = 0; k < index.size(); ++k) os << (k ? "," : "") << index[k];
        os << "]: sums to " << sum;
        throw ParseError(os.str());
    }
    // Rounding-level deviations are left alone so serialized models read back bit for bit.
    if (std::abs(sum - 1.0) > 1e-12)
        for (double& v : row) v /= sum;
}

void Parser::finish_rows(const Token& where) {
    (void)where;
    const std::size_t ns = m_.num_states, na = m_.num_actions1, nb = m_.num_actions2;
    const std::size_t nyz = m_.num_joint_obs();
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t a = 0; a < na; ++a)
            for (std::size_t b = 0; b < nb; ++b) {
                renormalize_row(std::span<double>(m_.transition).subspan(m_.t_index(s, a, b, 0), ns),
                                "transition", {s, a, b});
                renormalize_row(std::span<double>(m_.observation).subspan(m_.o_index(s, a, b, 0, 0), nyz),
                                "observation", {s, a, b});
            }
    renormalize_row(m_.initial_belief, "initial_belief", {});
}

// Reward rules may be specific in s' and the joint observation. Each (s,a,b)
// takes the last rule that is a full wildcard over (s', y, z) as its base, and
// any later specific rules are folded in by expectation over P(s'|s,a,b) and
// P(y,z|s',a,b).
void Parser::reduce_rewards() {
    const std::size_t ns = m_.num_states, na = m_.num_actions1, nb = m_.num_actions2;
    const std::size_t ny = m_.num_obs1, nz = m_.num_obs2;
    std::vector<std::vector<std::size_t>> by_state(ns + 1); // last bucket: wildcard s
    for (std::size_t i = 0; i < reward_rules_.size(); ++i) {
        long s = reward_rules_[i].s;
        by_state[s < 0 ? ns : static_cast<std::size_t>(s)].push_back(i);
    }
    auto matches = [](long pattern, std::size_t v) { return pattern < 0 || static_cast<std::size_t>(pattern) == v; };
    std::vector<std::size_t> rules;
    for (std::size_t s = 0; s < ns; ++s) {
        rules.clear();
        std::merge(by_state[s].begin(), by_state[s].end(), by_state[ns].begin(), by_state[ns].end(),
                   std::back_inserter(rules));
        for (std::size_t a = 0; a < na; ++a)
            for (std::size_t b = 0; b < nb; ++b) {
                double base = 0.0;
                std::size_t first_specific = 0;
                bool any_specific = false;
                for (std::size_t k = 0; k < rules.size(); ++k) {
                    const RewardRule& r = reward_rules_[rules[k]];
                    if (!matches(r.a1, a) || !matches(r.a2, b)) continue;
                    if (r.s2 < 0 && r.y < 0 && r.z < 0) {
                        base = r.value;
                        any_specific = false;
                        first_specific = k + 1;
                    } else if (!any_specific) {
                        any_specific = true;
                        first_specific = k;
                    }
                }
                if (!any_specific) {
                    m_.reward[m_.r_index(s, a, b)] = base;
                    continue;
                }
                double expected = 0.0;
                for (std::size_t s2 = 0; s2 < ns; ++s2) {
                    double pt = m_.T(s, a, b, s2);
                    if (pt == 0.0) continue;
                    for (std::size_t y = 0; y < ny; ++y)
                        for (std::size_t z = 0; z < nz; ++z) {
                            double po = m_.O(s2, a, b, y, z);
                            if (po == 0.0) continue;
                            double v = base;
                            for (std::size_t k = first_specific; k < rules.size(); ++k) {
                                const RewardRule& r = reward_rules_[rules[k]];
                                if (matches(r.a1, a) && matches(r.a2, b) && matches(r.s2, s2) &&
                                    matches(r.y, y) && matches(r.z, z))
                                    v = r.value;
                            }
                            expected += pt * po * v;
                        }
                }
                m_.reward[m_.r_index(s, a, b)] = expected;
            }
    }
}

DecPomdpModel Parser::run() {
    while (line_pos_ < lines_.size()) {
        const Line& l = lines_[line_pos_++];
        pending_.clear();
        pending_pos_ = 0;
        if (!is_keyword_line(l)) fail(l[0], "unexpected '" + l[0].text + "'");
        const std::string& key = l[0].text;
        if (key == "T") {
            parse_t(l);
        } else if (key == "O") {
            parse_o(l);
        } else if (key == "R") {
            parse_r(l);
        } else {
            if (allocated_ && (key == "states" || key == "actions" || key == "observations"))
                fail(l[0], key + " redeclared after table entries");
            parse_header_line(l);
        }
        if (pending_pos_ < pending_.size())
            fail(pending_[pending_pos_], "unexpected extra data '" + pending_[pending_pos_].text + "'");
    }
    if (!have_agents_) throw ParseError("missing 'agents:' declaration");
    if (!have_discount_) throw ParseError("missing 'discount:' declaration");
    if (!have_states_ || !have_actions_ || !have_obs_)
        throw ParseError("missing states, actions or observations declaration");
    if (!allocated_) allocate();

    const std::size_t ns = m_.num_states;
    if (!have_start_ || (start_tokens_.size() == 1 && start_tokens_[0].text == "uniform")) {
        std::fill(m_.initial_belief.begin(), m_.initial_belief.end(), 1.0 / static_cast<double>(ns));
    } else if (start_tokens_.size() == ns && std::all_of(start_tokens_.begin(), start_tokens_.end(),
                                                         [](const Token& t) { return to_number(t.text).has_value(); })) {
        for (std::size_t i = 0; i < ns; ++i) m_.initial_belief[i] = *to_number(start_tokens_[i].text);
    } else if (start_tokens_.size() == 1) {
        long s = states_.resolve(start_tokens_[0]);
        if (s < 0) fail(start_tokens_[0], "start state cannot be a wildcard");
        std::fill(m_.initial_belief.begin(), m_.initial_belief.end(), 0.0);
        m_.initial_belief[static_cast<std::size_t>(s)] = 1.0;
    } else {
        fail(start_tokens_[0], "start needs " + std::to_string(ns) + " probabilities, 'uniform' or one state");
    }

    finish_rows(lines_.empty() ? Token{} : lines_.back().front());
    reduce_rewards();
    return std::move(m_);
}

} // namespace

DecPomdpModel parse_model(std::string_view text) {
    Parser parser(text);
    return parser.run();
}

DecPomdpModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open model file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_model(buf.str());
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

} // namespace decem

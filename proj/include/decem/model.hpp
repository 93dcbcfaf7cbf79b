#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace decem {

/// Two-agent DEC-POMDP with joint tables stored flat in row-major order.
///
/// Agent 1 chooses actions a in A and observes y in Y; agent 2 chooses b in B
/// and observes z in Z. All tables are dense:
///   transition  P(s'|s,a,b)     [s][a][b][s']
///   observation P(y,z|s',a,b)   [s'][a][b][y][z]
///   reward      R(s,a,b)        [s][a][b]
struct DecPomdpModel {
    std::size_t num_states = 0;
    std::size_t num_actions1 = 0; // |A|
    std::size_t num_actions2 = 0; // |B|
    std::size_t num_obs1 = 0;     // |Y|
    std::size_t num_obs2 = 0;     // |Z|

    std::vector<std::string> state_names;
    std::vector<std::string> action_names1, action_names2;
    std::vector<std::string> obs_names1, obs_names2;

    std::vector<double> transition;
    std::vector<double> observation;
    std::vector<double> reward;
    double discount = 0.0;
    std::vector<double> initial_belief;

    /// Allocates zeroed tables for the given dimensions; names are cleared.
    static DecPomdpModel with_dimensions(std::size_t states, std::size_t actions1,
                                         std::size_t actions2, std::size_t obs1,
                                         std::size_t obs2, double discount);

    std::size_t t_index(std::size_t s, std::size_t a, std::size_t b, std::size_t s2) const {
        return ((s * num_actions1 + a) * num_actions2 + b) * num_states + s2;
    }
    std::size_t o_index(std::size_t s2, std::size_t a, std::size_t b, std::size_t y,
                        std::size_t z) const {
        return (((s2 * num_actions1 + a) * num_actions2 + b) * num_obs1 + y) * num_obs2 + z;
    }
    std::size_t r_index(std::size_t s, std::size_t a, std::size_t b) const {
        return (s * num_actions1 + a) * num_actions2 + b;
    }

    double T(std::size_t s, std::size_t a, std::size_t b, std::size_t s2) const {
        return transition[t_index(s, a, b, s2)];
    }
    double O(std::size_t s2, std::size_t a, std::size_t b, std::size_t y, std::size_t z) const {
        return observation[o_index(s2, a, b, y, z)];
    }
    double R(std::size_t s, std::size_t a, std::size_t b) const {
        return reward[r_index(s, a, b)];
    }

    std::size_t num_joint_obs() const { return num_obs1 * num_obs2; }
};

/// One invariant violation found by a validator.
struct Violation {
    std::string table;               // e.g. "transition", "initial_belief", "agent1.lambda"
    std::vector<std::size_t> index;  // position of the offending row or entry
    double magnitude = 0.0;          // offending value, or row-sum deviation
    std::string message;
};

using ValidationReport = std::vector<Violation>;

inline constexpr double kStochasticTolerance = 1e-9;

/// Parses `.dpomdp` text. Throws ParseError on syntax, agent count, dimension
/// or stochasticity problems. Rows whose sums are within 1e-9 of one are
/// renormalized exactly; rewards depending on s' or observations are reduced
/// to their expectation R(s,a,b).
DecPomdpModel parse_model(std::string_view text);

DecPomdpModel load_model(const std::string& path);

/// Canonical `.dpomdp` rendering; `parse_model(serialize_model(m))` reproduces
/// every table to full double precision.
std::string serialize_model(const DecPomdpModel& m);

/// Lists every violated model invariant; empty means valid.
ValidationReport validate_model(const DecPomdpModel& m);

/// JSON mirror of the model, for debugging.
nlohmann::json model_to_json(const DecPomdpModel& m);

/// 64-bit FNV-1a hash of the canonical serialization, as 16 hex digits.
std::string model_hash(const DecPomdpModel& m);

struct NormalizedRewards {
    std::vector<double> r_hat; // [s][a][b], in [0, 1]
    double r_min = 0.0;
    double r_max = 0.0;
    bool degenerate = false; // r_max == r_min; r_hat is identically zero

    double range() const { return r_max - r_min; }
};

NormalizedRewards normalize_rewards(const DecPomdpModel& m);

/// For each (s,a,b,y,z) the states s' with P(s'|s,a,b) P(y,z|s',a,b) > threshold,
/// together with that product. Entries of one (s,a,b) are stored contiguously,
/// ordered by (y, z, s'), so callers can walk either one successor set or the
/// whole (s,a,b) block.
class SuccessorIndex {
public:
    struct Entry {
        std::uint32_t next_state;
        std::uint16_t y;
        std::uint16_t z;
        double weight; // P(s'|s,a,b) * P(y,z|s',a,b)
    };

    SuccessorIndex() = default;

    std::span<const Entry> successors(std::size_t s, std::size_t a, std::size_t b,
                                      std::size_t y, std::size_t z) const;
    /// All (y, z, s') entries for one (s,a,b).
    std::span<const Entry> block(std::size_t s, std::size_t a, std::size_t b) const;
    /// States s' with P(s'|s,a,b) > threshold, ascending.
    std::span<const std::uint32_t> forward(std::size_t s, std::size_t a, std::size_t b) const;

    /// Largest successor-set size over all (s,a,b,y,z).
    std::size_t max_set_size() const { return max_set_size_; }
    std::size_t total_entries() const { return entries_.size(); }

    friend SuccessorIndex build_successor_index(const DecPomdpModel& m, double threshold);

private:
    std::size_t num_actions1_ = 0, num_actions2_ = 0, num_obs1_ = 0, num_obs2_ = 0;
    std::vector<std::size_t> set_offsets_;     // per (s,a,b,y,z), plus sentinel
    std::vector<Entry> entries_;
    std::vector<std::size_t> forward_offsets_; // per (s,a,b), plus sentinel
    std::vector<std::uint32_t> forward_states_;
    std::size_t max_set_size_ = 0;
};

SuccessorIndex build_successor_index(const DecPomdpModel& m, double threshold = 0.0);

} // namespace decem

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbsim/fairness.hpp"

namespace pbsim {

using BuilderIndex = std::size_t;

struct BuilderProfile {
    BuilderIndex id = 0;
    double initial_share = 0.0;
    double bid_ratio = 1.0;     ///< fixed-ratio bid multiplier, used with RatioBinding::fixed
    double loyal_share = 0.0;   ///< share floor from exclusive searcher partnerships
    double timing_boost = 0.0;  ///< probability of winning outright from proposer delay
};

/// Order-flow generator: N ~ Poisson(poisson_rate) flows per round, each worth
/// w ~ LogNormal(lognormal_mu, lognormal_sigma). Each round `delta` of flow mass
/// moves to the winner; with probability `drop_prob` the loser loses it.
struct FlowModel {
    double poisson_rate = 5.0;
    double lognormal_mu = 0.0;
    double lognormal_sigma = 1.0;
    double delta = 0.0002;
    double drop_prob = 1.0;
    double reserve = 0.0;
};

struct MarketState {
    long long round = 0;
    std::vector<double> shares;
    double total_mass = 1.0;
    std::vector<long long> win_counts;
    long long rounds_elapsed = 0;

    std::size_t builders() const { return shares.size(); }
    /// Cumulative win rate of builder k; 0 before any round has elapsed.
    double lambda(BuilderIndex k) const;
    std::vector<double> lambdas() const;
};

struct RoundOutcome {
    long long round = 0;
    long long flow_count = 0;
    std::vector<long long> flow_counts;  ///< per-builder allocation of the N flows
    std::vector<double> private_values;
    std::vector<double> valuations;
    std::vector<double> bids;
    std::vector<bool> competitive;       ///< bid >= reserve and builder participating
    std::optional<BuilderIndex> winner;
    bool boost_fired = false;
};

enum class ScenarioKind { baseline, collaboration, timing_game, multi_builder };

std::string to_string(ScenarioKind kind);
ScenarioKind parse_scenario_kind(const std::string& name);

/// How fixed bid ratios are bound to builders each round.
enum class RatioBinding {
    share_rank,  ///< current share leader bids strong_ratio, the rest weak_ratio
    fixed,       ///< each builder always bids its own bid_ratio
};

std::string to_string(RatioBinding binding);
RatioBinding parse_ratio_binding(const std::string& name);

struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::baseline;
    std::vector<BuilderProfile> builders;
    FlowModel flow_model;
    long long rounds = 6000;
    long long repetitions = 1000;
    std::uint64_t seed = 42;
    long long warmup_rounds = 500;
    std::vector<long long> warmup_wins;
    FairnessSpec fairness;
    double initial_mass = 1.0;  ///< a + b, the absolute order-flow mass at round 0
    RatioBinding ratio_binding = RatioBinding::share_rank;
    double strong_ratio = 0.7;
    double weak_ratio = 0.9;
};

/// One violated invariant, addressed by its dotted configuration key.
struct Violation {
    std::string field;
    std::string message;
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<Violation> violations);
    const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
    std::vector<Violation> violations_;
};

/// All violated invariants of `config`; empty when valid.
std::vector<Violation> check(const ScenarioConfig& config);

/// Returns `config` unchanged when valid, otherwise throws ConfigError.
const ScenarioConfig& validate(const ScenarioConfig& config);

/// Round-zero state: shares from initial_share, win counts from the warmup.
MarketState initial_state(const ScenarioConfig& config);

}  // namespace pbsim

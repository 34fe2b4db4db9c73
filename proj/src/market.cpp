#include "pbsim/market.hpp"

#include <cmath>
#include <numeric>

namespace pbsim {

double MarketState::lambda(BuilderIndex k) const {
    if (rounds_elapsed <= 0) return 0.0;
    return static_cast<double>(win_counts.at(k)) / static_cast<double>(rounds_elapsed);
}

std::vector<double> MarketState::lambdas() const {
    std::vector<double> out(win_counts.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = lambda(k);
    return out;
}

std::string to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::baseline: return "baseline";
        case ScenarioKind::collaboration: return "collaboration";
        case ScenarioKind::timing_game: return "timing_game";
        case ScenarioKind::multi_builder: return "multi_builder";
    }
    return "baseline";
}

ScenarioKind parse_scenario_kind(const std::string& name) {
    if (name == "baseline") return ScenarioKind::baseline;
    if (name == "collaboration") return ScenarioKind::collaboration;
    if (name == "timing_game") return ScenarioKind::timing_game;
    if (name == "multi_builder") return ScenarioKind::multi_builder;
    throw std::invalid_argument("unknown scenario kind '" + name + "'");
}

std::string to_string(RatioBinding binding) {
    return binding == RatioBinding::fixed ? "fixed" : "share_rank";
}

RatioBinding parse_ratio_binding(const std::string& name) {
    if (name == "share_rank") return RatioBinding::share_rank;
    if (name == "fixed") return RatioBinding::fixed;
    throw std::invalid_argument("unknown ratio binding '" + name + "'");
}

namespace {

std::string join_messages(const std::vector<Violation>& v) {
    std::string out = "invalid configuration:";
    for (const auto& x : v) out += "\n  " + x.field + ": " + x.message;
    return out;
}

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace

ConfigError::ConfigError(std::vector<Violation> violations)
    : std::runtime_error(join_messages(violations)), violations_(std::move(violations)) {}

std::vector<Violation> check(const ScenarioConfig& c) {
    std::vector<Violation> out;
    auto bad = [&](std::string field, std::string msg) {
        out.push_back({std::move(field), std::move(msg)});
    };

    if (c.builders.size() < 2) bad("builders", "at least two builders are required");
    double share_sum = 0.0;
    int boosted = 0;
    for (std::size_t k = 0; k < c.builders.size(); ++k) {
        const auto& b = c.builders[k];
        const std::string p = "builders." + std::to_string(k) + ".";
        if (b.id != k) bad(p + "id", "id must equal its position " + std::to_string(k));
        if (!in_unit(b.initial_share)) bad(p + "initial_share", "must lie in [0,1]");
        if (!(b.bid_ratio > 0.0 && b.bid_ratio <= 1.0)) bad(p + "bid_ratio", "must lie in (0,1]");
        if (!(b.loyal_share >= 0.0 && b.loyal_share < 1.0)) bad(p + "loyal_share", "must lie in [0,1)");
        if (b.loyal_share > b.initial_share)
            bad(p + "loyal_share", "loyal_share exceeds initial_share");
        if (!(b.timing_boost >= 0.0 && b.timing_boost < 1.0)) bad(p + "timing_boost", "must lie in [0,1)");
        if (b.timing_boost > 0.0) ++boosted;
        share_sum += b.initial_share;
    }
    if (!c.builders.empty() && std::abs(share_sum - 1.0) > 1e-12)
        bad("builders.initial_share", "shares sum ≠ 1 (sum = " + std::to_string(share_sum) + ")");
    if (boosted > 1) bad("builders.timing_boost", "at most one builder may have a timing boost");

    const auto& f = c.flow_model;
    if (!(f.poisson_rate > 0.0)) bad("flow_model.poisson_rate", "poisson_rate must be positive");
    if (!std::isfinite(f.lognormal_mu)) bad("flow_model.lognormal_mu", "must be finite");
    if (!(f.lognormal_sigma > 0.0)) bad("flow_model.lognormal_sigma", "lognormal_sigma must be positive");
    if (!(f.delta >= 0.0)) bad("flow_model.delta", "delta must be nonnegative");
    if (!in_unit(f.drop_prob)) bad("flow_model.drop_prob", "must lie in [0,1]");
    if (!(f.reserve >= 0.0)) bad("flow_model.reserve", "reserve must be nonnegative");

    if (c.rounds <= 0) bad("rounds", "rounds must be positive");
    if (c.repetitions <= 0) bad("repetitions", "repetitions must be positive");
    if (c.warmup_rounds < 0) bad("warmup_rounds", "must be nonnegative");
    if (c.warmup_wins.size() != c.builders.size()) {
        bad("warmup_wins", "needs one entry per builder");
    } else {
        long long sum = 0;
        bool neg = false;
        for (auto w : c.warmup_wins) {
            sum += w;
            neg = neg || w < 0;
        }
        if (neg) bad("warmup_wins", "entries must be nonnegative");
        if (sum != c.warmup_rounds)
            bad("warmup_wins", "warmup mismatch: wins sum to " + std::to_string(sum) +
                                   ", warmup_rounds is " + std::to_string(c.warmup_rounds));
    }

    if (!(c.fairness.epsilon >= 0.0)) bad("fairness.epsilon", "must be nonnegative");
    if (!in_unit(c.fairness.delta)) bad("fairness.delta", "must lie in [0,1]");
    if (!in_unit(c.fairness.lambda0)) bad("fairness.lambda0", "must lie in [0,1]");
    if (c.fairness.fair_low() > c.fairness.fair_high())
        bad("fairness", "fair interval is empty");

    if (!(c.initial_mass > 0.0)) bad("initial_mass", "must be positive");
    if (!(c.strong_ratio > 0.0 && c.strong_ratio <= 1.0)) bad("strong_ratio", "must lie in (0,1]");
    if (!(c.weak_ratio > 0.0 && c.weak_ratio <= 1.0)) bad("weak_ratio", "must lie in (0,1]");
    return out;
}

const ScenarioConfig& validate(const ScenarioConfig& config) {
    auto v = check(config);
    if (!v.empty()) throw ConfigError(std::move(v));
    return config;
}

MarketState initial_state(const ScenarioConfig& config) {
    MarketState s;
    s.round = 0;
    s.total_mass = config.initial_mass;
    for (const auto& b : config.builders) s.shares.push_back(b.initial_share);
    s.win_counts = config.warmup_wins;
    s.rounds_elapsed = config.warmup_rounds;
    return s;
}

}  // namespace pbsim

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pbsim/fairness.hpp"
#include "pbsim/market.hpp"

namespace pbsim {

struct RoundRecord {
    long long round = 0;
    std::vector<double> shares;
    std::vector<double> lambdas;
    std::optional<BuilderIndex> winner;
    std::vector<double> valuations;  ///< empty for the warmup row
    std::vector<double> bids;        ///< -inf for builders that have exited
    bool boost_fired = false;
};

struct Absorption {
    long long round = 0;
    BuilderIndex builder = 0;
    double share = 1.0;      ///< ceiling reached: 1 minus the others' loyal floors
    bool at_ceiling = false; ///< true when the ceiling is below 1
};

enum class RecordMode {
    summary,  ///< designated-builder lambda at recorded rounds only
    full,     ///< plus a RoundRecord per recorded round
};

struct Trajectory {
    long long repetition = 0;
    std::vector<long long> recorded_rounds;
    std::vector<double> designated_lambda;  ///< builder 0's lambda at each recorded round
    std::vector<RoundRecord> records;       ///< full mode only
    MarketState final_state;
    std::optional<Absorption> absorption;
    std::vector<double> max_shares;         ///< per builder, over all rounds
    bool full_monopoly = false;             ///< some share reached exactly 1
};

/// Rounds 0..T that are recorded: all of them for T <= 1e4, every 10th above
/// (T itself is always included).
std::vector<long long> recorded_rounds(long long rounds);

/// One repetition: warmup counts, then T rounds of sample_valuations,
/// place_bids, select_winner and step_shares. A builder with share 0 and no
/// loyal floor has exited and does not bid.
Trajectory run_repetition(const ScenarioConfig& config, std::uint64_t repetition_seed, long long repetition = 0,
                          RecordMode mode = RecordMode::full);

/// First recorded round where some share reaches 1 minus the others' loyal
/// floors (within 1e-12).
std::optional<Absorption> absorption_round(const std::vector<RoundRecord>& records, std::span<const double> loyal);

struct AbsorptionStats {
    long long count = 0;
    long long at_ceiling = 0;
    std::optional<double> median;
    std::optional<long long> min;
    std::optional<long long> max;
};

struct RepetitionSummary {
    std::optional<Absorption> absorption;
    std::vector<double> final_shares;
    std::vector<double> final_lambdas;
    std::vector<double> max_shares;
    bool full_monopoly = false;
};

struct EnsembleResult {
    std::string config_digest;
    ScenarioKind kind = ScenarioKind::baseline;
    long long repetitions = 0;
    long long rounds = 0;
    std::vector<long long> rounds_axis;
    std::vector<double> mean_lambda;  ///< designated builder, per recorded round
    std::vector<double> se_lambda;
    std::vector<double> band_low;
    std::vector<double> band_high;
    AbsorptionStats absorption;
    FairnessReport fairness;  ///< designated builder at the final round
    std::vector<double> final_mean_lambda;
    std::vector<double> max_shares;
    long long full_monopolies = 0;
    std::vector<RepetitionSummary> per_repetition;
    std::vector<Trajectory> trajectories;  ///< full records of the first kept repetitions
};

struct EnsembleOptions {
    unsigned workers = 0;            ///< 0: hardware concurrency
    long long keep_trajectories = 0; ///< first N repetitions keep full records
};

/// Runs all repetitions with seeds stream_seed(config.seed, r). Results do not
/// depend on the worker count.
EnsembleResult run_ensemble(const ScenarioConfig& config, const EnsembleOptions& options = {});

/// Tunables of the built-in scenarios.
struct ScenarioParams {
    int multi_builder_count = 10;
    double loyal_share = 0.1;
    double timing_boost = 0.2;
};

/// Built-in scenarios; `overrides` are "key=value" assignments applied last.
ScenarioConfig build_scenario(ScenarioKind kind, const std::vector<std::string>& overrides = {},
                              const ScenarioParams& params = {});

/// CSV with columns rep, round, z_k, lambda_k, winner, v_k, b_k, boost_fired.
void write_trajectories_csv(std::ostream& out, std::span<const Trajectory> trajectories, std::size_t builders);

std::string ensemble_json(const EnsembleResult& result);

}  // namespace pbsim

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pbsim {

/// (epsilon, delta)-fairness requirement around the initial win rate lambda0.
struct FairnessSpec {
    double epsilon = 0.1;
    double delta = 0.1;
    double lambda0 = 0.6;

    /// Fair interval [(1-eps)lambda0, (1+eps)lambda0] clipped to [0, 1].
    double fair_low() const;
    double fair_high() const;
};

struct FairnessReport {
    double empirical_prob = 0.0;
    bool satisfied = false;
    double fair_low = 0.0;
    double fair_high = 0.0;
    std::size_t sample_count = 0;
};

/// Fraction of samples inside the closed fair interval; satisfied iff that
/// fraction is at least 1 - delta. Throws std::invalid_argument on an empty
/// sample list or samples outside [0, 1].
FairnessReport robust_fairness(std::span<const double> samples, const FairnessSpec& spec);

struct PercentileBands {
    std::vector<double> low;
    std::vector<double> median;
    std::vector<double> high;
};

/// Nearest-rank percentile of an already sorted, nonempty range.
double nearest_rank(std::span<const double> sorted, double percent);

/// Per-round nearest-rank percentile bands over repetitions.
/// `trajectories[r][t]` is the value of repetition r at recorded round t;
/// every row must have the same length.
PercentileBands percentile_bands(const std::vector<std::vector<double>>& trajectories,
                                 double low_percent = 5.0, double high_percent = 95.0);

enum class ShareCoverage {
    complete,  ///< shares describe the whole market and sum to 1
    partial,   ///< top-N listing; the unlisted remainder is ignored
};

/// Herfindahl-Hirschman index, sum of squared shares.
double hhi(std::span<const double> shares, ShareCoverage coverage = ShareCoverage::complete);

/// Builder profit margin as a fraction. Methods: "value_relative"
/// (value - payment) / value, and "payment_relative" (value - payment) / payment.
double profit_margin(double block_value, double payment,
                     const std::string& method = "value_relative");

/// One row of a builder-statistics table.
struct BuilderStats {
    std::string builder;
    long long blocks = 0;
    double market_share = 0.0;     ///< fraction in [0, 1]
    double total_payments = 0.0;
    double total_block_value = 0.0;
    bool has_reported_margin = false;
    double reported_margin = 0.0;  ///< fraction, from an optional profit_margin column
};

/// Parses builder-statistics CSV with header columns
/// builder, blocks, market_share, total_payments, total_block_value
/// and an optional profit_margin column. market_share and profit_margin are
/// percentages, as in published builder tables. Throws std::runtime_error on
/// malformed input.
std::vector<BuilderStats> parse_builder_csv(const std::string& text);

}  // namespace pbsim

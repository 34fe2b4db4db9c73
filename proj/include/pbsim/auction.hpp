#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "pbsim/equilibrium.hpp"
#include "pbsim/market.hpp"
#include "pbsim/rng.hpp"

namespace pbsim {

struct BidStrategy {
    enum class Kind { fixed_ratio, equilibrium };
    Kind kind = Kind::fixed_ratio;
    double ratio = 1.0;
    std::shared_ptr<const BidEquilibrium> equilibrium;
    int side = 0;  ///< 0 = strong side (phi_i), 1 = weak side (phi_j)

    static BidStrategy fixed(double ratio);
    static BidStrategy from_equilibrium(std::shared_ptr<const BidEquilibrium> eq, int side);
};

/// Fills flow_count, flow_counts, private_values and valuations of a round:
/// N ~ Poisson, each flow goes to one builder by a categorical draw on `shares`
/// and carries a LogNormal profit; valuation = reserve + private value.
RoundOutcome sample_valuations(std::span<const double> shares, const FlowModel& flow_model, Rng& rng);

struct BidVector {
    std::vector<double> bids;
    std::vector<bool> competitive;  ///< bid >= reserve
    std::vector<bool> clamped;      ///< equilibrium valuation outside the solved support
};

BidVector place_bids(std::span<const double> valuations, std::span<const BidStrategy> strategies, double reserve);

struct WinnerDraw {
    std::optional<BuilderIndex> winner;
    bool boost_fired = false;
};

/// If a builder has timing boost tau > 0, it wins outright with probability tau
/// provided its bid is competitive. Otherwise the highest bid >= reserve wins,
/// ties uniformly at random. A builder whose bid is -infinity is not bidding.
WinnerDraw select_winner(std::span<const double> bids, double reserve, std::span<const double> timing_boosts,
                         Rng& rng);

/// Monte Carlo win frequency of each builder at frozen shares.
std::vector<double> empirical_win_prob(std::span<const double> shares, const FlowModel& flow_model,
                                       std::span<const BidStrategy> strategies, long long samples, Rng& rng);

}  // namespace pbsim

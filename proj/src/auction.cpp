#include "pbsim/auction.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace pbsim {

BidStrategy BidStrategy::fixed(double ratio) {
    if (!(ratio > 0.0 && ratio <= 1.0)) throw std::invalid_argument("fixed-ratio strategy: ratio must lie in (0,1]");
    BidStrategy s;
    s.kind = Kind::fixed_ratio;
    s.ratio = ratio;
    return s;
}

BidStrategy BidStrategy::from_equilibrium(std::shared_ptr<const BidEquilibrium> eq, int side) {
    if (!eq) throw std::invalid_argument("equilibrium strategy: null equilibrium");
    if (side != 0 && side != 1) throw std::invalid_argument("equilibrium strategy: side must be 0 or 1");
    const auto& p = eq->phi(side);
    for (std::size_t k = 1; k < p.size(); ++k)
        if (!(p[k] > p[k - 1])) throw std::invalid_argument("equilibrium strategy: inverse bid not increasing");
    BidStrategy s;
    s.kind = Kind::equilibrium;
    s.equilibrium = std::move(eq);
    s.side = side;
    return s;
}

RoundOutcome sample_valuations(std::span<const double> shares, const FlowModel& flow_model, Rng& rng) {
    const std::size_t K = shares.size();
    RoundOutcome out;
    out.flow_counts.assign(K, 0);
    out.private_values.assign(K, 0.0);
    out.flow_count = std::poisson_distribution<long long>(flow_model.poisson_rate)(rng);
    std::lognormal_distribution<double> profit(flow_model.lognormal_mu, flow_model.lognormal_sigma);
    for (long long n = 0; n < out.flow_count; ++n) {
        const double u = uniform01(rng);
        std::size_t k = 0;
        double acc = shares[0];
        while (k + 1 < K && u >= acc) acc += shares[++k];
        // u can exceed a float-rounded total; fall back to the last builder with mass
        while (shares[k] <= 0.0 && k > 0) --k;
        ++out.flow_counts[k];
        out.private_values[k] += profit(rng);
    }
    out.valuations.resize(K);
    for (std::size_t k = 0; k < K; ++k) out.valuations[k] = flow_model.reserve + out.private_values[k];
    return out;
}

BidVector place_bids(std::span<const double> valuations, std::span<const BidStrategy> strategies, double reserve) {
    if (valuations.size() != strategies.size()) throw std::invalid_argument("place_bids: one strategy per builder");
    BidVector out;
    const std::size_t K = valuations.size();
    out.bids.resize(K);
    out.competitive.resize(K);
    out.clamped.assign(K, false);
    for (std::size_t k = 0; k < K; ++k) {
        const auto& s = strategies[k];
        if (s.kind == BidStrategy::Kind::fixed_ratio) {
            out.bids[k] = s.ratio * valuations[k];
        } else {
            bool clamped = false;
            out.bids[k] = s.equilibrium->bid_for_value(s.side, valuations[k], &clamped);
            out.clamped[k] = clamped;
        }
        out.competitive[k] = out.bids[k] >= reserve;
    }
    return out;
}

WinnerDraw select_winner(std::span<const double> bids, double reserve, std::span<const double> timing_boosts,
                         Rng& rng) {
    WinnerDraw out;
    for (std::size_t k = 0; k < timing_boosts.size(); ++k) {
        if (timing_boosts[k] <= 0.0) continue;
        if (bernoulli(rng, timing_boosts[k]) && bids[k] >= reserve) {
            out.winner = k;
            out.boost_fired = true;
            return out;
        }
        break;
    }
    double best = -std::numeric_limits<double>::infinity();
    std::size_t ties = 0;
    for (double b : bids) {
        if (!(b >= reserve)) continue;
        if (b > best) {
            best = b;
            ties = 1;
        } else if (b == best) {
            ++ties;
        }
    }
    if (ties == 0) return out;
    std::size_t pick = 0;
    if (ties > 1) pick = std::min(ties - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(ties)));
    for (std::size_t k = 0; k < bids.size(); ++k) {
        if (bids[k] >= reserve && bids[k] == best) {
            if (pick == 0) {
                out.winner = k;
                break;
            }
            --pick;
        }
    }
    return out;
}

std::vector<double> empirical_win_prob(std::span<const double> shares, const FlowModel& flow_model,
                                       std::span<const BidStrategy> strategies, long long samples, Rng& rng) {
    if (samples < 10000) throw std::invalid_argument("empirical_win_prob: need at least 1e4 samples");
    std::vector<double> wins(shares.size(), 0.0);
    for (long long s = 0; s < samples; ++s) {
        const auto round = sample_valuations(shares, flow_model, rng);
        const auto bids = place_bids(round.valuations, strategies, flow_model.reserve);
        const auto w = select_winner(bids.bids, flow_model.reserve, {}, rng);
        if (w.winner) wins[*w.winner] += 1.0;
    }
    for (auto& w : wins) w /= static_cast<double>(samples);
    return wins;
}

}  // namespace pbsim

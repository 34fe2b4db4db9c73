#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pbsim/distribution.hpp"
#include "pbsim/rng.hpp"

namespace pbsim {

/// Inverse bid functions of a two-bidder first-price equilibrium on [b_low, b_high].
/// Side i is the strong (dominating) bidder, side j the weak one.
struct BidEquilibrium {
    std::vector<double> bid_grid;
    std::vector<double> phi_i;
    std::vector<double> phi_j;
    double b_low = 0.0;
    double b_high = 0.0;
    double reserve = 0.0;
    double residual_max = 0.0;
    /// Grid points below this index come from the boundary patch, not the ODE.
    std::size_t patch_end = 0;
    int stages = 0;

    const std::vector<double>& phi(int side) const { return side == 0 ? phi_i : phi_j; }
    /// phi_side(b) by linear interpolation; clamps outside [b_low, b_high].
    double value_for_bid(int side, double b) const;
    /// Inverse of phi_side. Values outside [phi(b_low), phi(b_high)] are clamped
    /// to the end bids and `clamped` (if given) is set.
    double bid_for_value(int side, double v, bool* clamped = nullptr) const;
};

class NoCompetitionError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shooting could not bracket the maximum bid. history holds (low, high) guesses.
class SolverDivergence : public std::runtime_error {
public:
    SolverDivergence(const std::string& what, std::vector<std::pair<double, double>> history)
        : std::runtime_error(what), history_(std::move(history)) {}
    const std::vector<std::pair<double, double>>& history() const { return history_; }

private:
    std::vector<std::pair<double, double>> history_;
};

class NonConvergence : public std::runtime_error {
public:
    NonConvergence(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

class NumericalIntegrityError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Lowest equilibrium bid for strong bidder i against weak bidder j.
/// Throws NoCompetitionError when the reserve exceeds the weak bidder's top value.
double lower_bound_bid(const ValueDistribution& dist_i, const ValueDistribution& dist_j, double reserve);

/// Solves phi_i' = (F_i/f_i)(phi_i) / (phi_j - b), phi_j' = (F_j/f_j)(phi_j) / (phi_i - b)
/// by backward shooting on the common top bid. Both sides must share a lower support.
/// Throws SolverDivergence or NonConvergence (residual_max > 1e-4).
BidEquilibrium solve_equilibrium(const ValueDistribution& dist_i, const ValueDistribution& dist_j,
                                 double reserve, int grid_size = 2048);

/// Max relative first-order-condition residual over interior non-patch grid points.
double equilibrium_residual(const BidEquilibrium& eq, const ValueDistribution& dist_i,
                            const ValueDistribution& dist_j);

struct VerificationReport {
    double residual_max = 0.0;
    bool residual_ok = true;

    bool best_response_ok = true;
    double worst_gain = 0.0;   ///< largest (max deviation utility - prescribed utility) / v
    int worst_side = -1;
    double worst_value = 0.0;
    double worst_bid = 0.0;

    bool dominance_ok = true;  ///< F_i(phi_i(b)) <= F_j(phi_j(b)) on the interior
    double dominance_violation_bid = 0.0;
    bool ordering_ok = true;   ///< phi_i(b) >= phi_j(b) on the interior
    double ordering_violation_bid = 0.0;

    double strong_win_prob = 0.0;
    double strong_win_se = 0.0;

    std::vector<std::string> failures;
    bool passed() const { return failures.empty(); }
};

/// Residual re-check, Monte Carlo best-response test at 50 valuation quantiles
/// per side over a +-10% bid grid (tolerance 1e-3 v), dominance and ordering
/// checks, and a strong-side single-round win probability from `samples` draws.
VerificationReport verify_equilibrium(const BidEquilibrium& eq, const ValueDistribution& dist_i,
                                      const ValueDistribution& dist_j, long long samples, Rng& rng);

struct RevenueEstimate {
    double revenue = 0.0;     ///< Stieltjes integral on the bid grid
    double mc_revenue = 0.0;  ///< Monte Carlo mean of the highest bid
    double mc_se = 0.0;
};

/// Expected proposer revenue of the (H^m, H^n) cartel equilibrium, cross-checked
/// by Monte Carlo. Throws NumericalIntegrityError if the two disagree by more
/// than 2 standard errors.
RevenueEstimate expected_revenue(const BidEquilibrium& eq, int m, int n, const ValueDistribution& base,
                                 long long samples, Rng& rng);

struct CrossingReport {
    std::vector<double> crossings;   ///< bids where G_I - G_II changes sign
    std::vector<double> violations;  ///< crossings where G_I'/G_I >= G_II'/G_II
    double below_fraction = 0.0;     ///< share of interior bids with G_I < G_II
};

/// Compares the bid CDFs G = F_i(phi_i) F_j(phi_j) of two equilibria on their
/// common interior support.
CrossingReport bid_cdf_crossings(const BidEquilibrium& eq_I, const ValueDistribution& i_I,
                                 const ValueDistribution& j_I, const BidEquilibrium& eq_II,
                                 const ValueDistribution& i_II, const ValueDistribution& j_II);

/// Columnar text: header lines "b_low", "b_high", "reserve", "residual_max",
/// then a "b phi_i phi_j" line and one row per grid point.
void write_equilibrium(std::ostream& out, const BidEquilibrium& eq);
BidEquilibrium read_equilibrium(std::istream& in);

}  // namespace pbsim
